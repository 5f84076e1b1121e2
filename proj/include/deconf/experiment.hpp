#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <tuple>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "errors.hpp"
#include "evaluation.hpp"
#include "generate.hpp"
#include "io.hpp"
#include "scenario.hpp"

namespace deconf {

// ---------------------------------------------------------------------------
// Configuration

namespace config {

inline std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> parts;
    boost::split(parts, s, boost::is_any_of(","));
    std::vector<std::string> out;
    for (auto& p : parts) {
        boost::trim(p);
        if (!p.empty()) out.push_back(p);
    }
    return out;
}

inline double to_double(const std::string& key, const std::string& v)
{
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw InputError("config key '" + key + "': '" + v + "' is not a number");
    }
}

inline Index to_index(const std::string& key, const std::string& v)
{
    const double d = to_double(key, v);
    if (d != std::floor(d)) throw InputError("config key '" + key + "': '" + v + "' is not an integer");
    return static_cast<Index>(d);
}

inline bool to_bool(const std::string& key, std::string v)
{
    boost::to_lower(v);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw InputError("config key '" + key + "': '" + v + "' is not a boolean");
}

inline Method parse_method(std::string v)
{
    boost::to_lower(v);
    boost::replace_all(v, "-", "_");
    if (v == "lasso") return Method::lasso;
    if (v == "pc_lasso" || v == "pclasso") return Method::pc_lasso;
    if (v == "plmm") return Method::plmm;
    throw InputError("unknown method '" + v + "' (expected lasso, pc_lasso, plmm)");
}

inline SignLayout parse_layout(std::string v)
{
    boost::to_lower(v);
    if (v == "balanced") return SignLayout::balanced;
    if (v == "nearly_balanced") return SignLayout::nearly_balanced;
    throw InputError("unknown sign layout '" + v + "'");
}

inline Convention parse_convention(std::string v)
{
    boost::to_lower(v);
    if (v == "standardized") return Convention::standardized;
    if (v == "raw") return Convention::raw;
    throw InputError("unknown convention '" + v + "' (expected standardized or raw)");
}

// Flat key = value text with optional [section] headers. Keys are looked up
// as "section.key" first and then bare.
class KeyValues {
public:
    static KeyValues parse(std::istream& in)
    {
        KeyValues kv;
        try {
            boost::property_tree::ini_parser::read_ini(in, kv.tree_);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw InputError("config line " + std::to_string(e.line()) + ": " + e.message());
        }
        return kv;
    }

    static KeyValues load(const std::string& path)
    {
        std::ifstream in(path);
        if (!in) throw InputError("cannot open config " + path);
        return parse(in);
    }

    std::optional<std::string> get(const std::string& section, const std::string& key) const
    {
        if (auto v = tree_.get_optional<std::string>(section + "." + key)) return boost::trim_copy(*v);
        if (auto v = tree_.get_optional<std::string>(key)) return boost::trim_copy(*v);
        return std::nullopt;
    }

private:
    boost::property_tree::ptree tree_;
};

} // namespace config

struct ExperimentConfig {
    std::string name = "experiment";
    std::vector<Index> n{300}, p{600}, q{10}, s{8}, factors{0};
    std::vector<double> snr{1.5}, bnr{0.0}, var_psi{1.0}, sigma_e{1.0};
    // PC counts for PC-LASSO; the token "q" means k equals the scenario's q.
    std::vector<std::string> k_values{"10"};
    bool standardize = true;
    SignLayout layout = SignLayout::balanced;
    int replications = 1;
    std::uint64_t base_seed = 1;
    std::vector<Method> methods{Method::lasso, Method::pc_lasso, Method::plmm};
    std::string output_dir = "results";
    int threads = 0; // 0: DECONF_THREADS or hardware concurrency
    int folds = 10;
    bool pcs_within_folds = true;
};

inline ExperimentConfig parse_experiment_config(const config::KeyValues& kv)
{
    using namespace config;
    ExperimentConfig c;
    auto idx_list = [&](const char* key, std::vector<Index>& dst) {
        if (auto v = kv.get("grid", key)) {
            dst.clear();
            for (auto& t : split_list(*v)) dst.push_back(to_index(key, t));
        }
    };
    auto dbl_list = [&](const char* key, std::vector<double>& dst) {
        if (auto v = kv.get("grid", key)) {
            dst.clear();
            for (auto& t : split_list(*v)) dst.push_back(to_double(key, t));
        }
    };
    idx_list("n", c.n);
    idx_list("p", c.p);
    idx_list("q", c.q);
    idx_list("s", c.s);
    idx_list("factors", c.factors);
    dbl_list("snr", c.snr);
    dbl_list("bnr", c.bnr);
    dbl_list("var_psi", c.var_psi);
    dbl_list("sigma_e", c.sigma_e);
    if (auto v = kv.get("grid", "k")) c.k_values = split_list(*v);
    if (auto v = kv.get("grid", "standardize")) c.standardize = to_bool("standardize", *v);
    if (auto v = kv.get("grid", "convention")) c.standardize = parse_convention(*v) == Convention::standardized;
    if (auto v = kv.get("grid", "layout")) c.layout = parse_layout(*v);

    if (auto v = kv.get("experiment", "name")) c.name = *v;
    if (auto v = kv.get("experiment", "replications")) c.replications = static_cast<int>(to_index("replications", *v));
    if (auto v = kv.get("experiment", "base_seed"))
        c.base_seed = static_cast<std::uint64_t>(to_index("base_seed", *v));
    if (auto v = kv.get("experiment", "seed")) c.base_seed = static_cast<std::uint64_t>(to_index("seed", *v));
    if (auto v = kv.get("experiment", "methods")) {
        c.methods.clear();
        for (auto& t : split_list(*v)) c.methods.push_back(parse_method(t));
    }
    if (auto v = kv.get("experiment", "output_dir")) c.output_dir = *v;
    if (auto v = kv.get("experiment", "threads")) c.threads = static_cast<int>(to_index("threads", *v));
    if (auto v = kv.get("experiment", "folds")) c.folds = static_cast<int>(to_index("folds", *v));
    if (auto v = kv.get("experiment", "pcs_within_folds")) c.pcs_within_folds = to_bool("pcs_within_folds", *v);
    return c;
}

// Thread count: explicit value, else DECONF_THREADS, else all cores.
inline int resolve_threads(int requested)
{
    if (requested > 0) return requested;
    if (const char* env = std::getenv("DECONF_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

// Runs fn(i) for i in [0, count) on `threads` workers. Results must be
// written by index; completion order is irrelevant.
inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn)
{
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) fn(i);
    };
    const int t = std::max(1, std::min<int>(threads, static_cast<int>(count)));
    if (t == 1) {
        worker();
        return;
    }
    std::vector<std::thread> pool;
    for (int i = 0; i < t; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// Grid expansion

struct ScenarioPoint {
    std::string name;
    ScenarioSpec spec;
    std::vector<MethodSpec> methods;
};

inline std::string scenario_name(const ScenarioSpec& s)
{
    std::ostringstream os;
    os << "n" << s.n << "_p" << s.p << "_q" << s.q << "_s" << s.s << "_snr" << io::format_double(s.snr) << "_bnr"
       << io::format_double(s.bnr);
    if (s.var_psi_target != 1.0) os << "_vpsi" << io::format_double(s.var_psi_target);
    if (s.sigma_e != 1.0) os << "_se" << io::format_double(s.sigma_e);
    if (s.factors > 0 && s.factors != s.q) os << "_f" << s.factors;
    return os.str();
}

inline std::vector<MethodSpec> expand_methods(const std::vector<Method>& methods,
                                              const std::vector<std::string>& k_values, Index q)
{
    std::vector<MethodSpec> out;
    for (Method m : methods) {
        if (m != Method::pc_lasso) {
            out.push_back({m, 0});
            continue;
        }
        for (const auto& k : k_values) {
            const Index kk = (k == "q") ? q : config::to_index("k", k);
            const MethodSpec ms{Method::pc_lasso, kk};
            if (std::none_of(out.begin(), out.end(), [&](const MethodSpec& o) { return o.label() == ms.label(); }))
                out.push_back(ms);
        }
    }
    return out;
}

// Cartesian product of the grid lists; every point is solved once up front so
// an unreachable target fails before any replication runs.
inline std::vector<ScenarioPoint> expand_grid(const ExperimentConfig& c)
{
    if (c.replications < 1) throw InputError("replications must be >= 1");
    if (c.methods.empty()) throw InputError("no methods requested");
    std::vector<ScenarioPoint> pts;
    for (Index n : c.n)
        for (Index p : c.p)
            for (Index q : c.q)
                for (Index s : c.s)
                    for (Index f : c.factors)
                        for (double snr : c.snr)
                            for (double bnr : c.bnr)
                                for (double vp : c.var_psi)
                                    for (double se : c.sigma_e) {
                                        ScenarioPoint pt;
                                        pt.spec.n = n;
                                        pt.spec.p = p;
                                        pt.spec.q = q;
                                        pt.spec.s = s;
                                        pt.spec.factors = f;
                                        pt.spec.snr = snr;
                                        pt.spec.bnr = bnr;
                                        pt.spec.var_psi_target = vp;
                                        pt.spec.sigma_e = se;
                                        pt.spec.standardize = c.standardize;
                                        pt.spec.layout = c.layout;
                                        pt.name = scenario_name(pt.spec);
                                        pt.methods = expand_methods(c.methods, c.k_values, q);
                                        const Index train = n - (n + c.folds - 1) / c.folds;
                                        for (const auto& m : pt.methods)
                                            if (m.method == Method::pc_lasso && (m.k > train - 1 || m.k > p))
                                                throw InputError("k=" + std::to_string(m.k) +
                                                                 " PCs exceed training-fold rank for " + pt.name);
                                        pts.push_back(std::move(pt));
                                    }
    if (pts.empty()) throw InputError("empty scenario grid");
    for (const auto& pt : pts) (void)solve_scenario(pt.spec);
    return pts;
}

// ---------------------------------------------------------------------------
// One replication

inline ReplicationRecord evaluate_fit(const SelectedFit& fit, const std::string& scenario, int replication,
                                      std::uint64_t seed, const GroundTruth* truth)
{
    ReplicationRecord rec;
    rec.scenario = scenario;
    rec.method = fit.spec.label();
    rec.replication = replication;
    rec.seed = seed;
    rec.lambda_min = fit.lambda_min();
    rec.model_size = fit.model_size();
    rec.pe = fit.prediction_error();
    if (truth) {
        const auto err = estimation_errors(fit.beta(), truth->beta);
        rec.se2 = err.se2;
        rec.ae = err.ae;
        if (!truth->support.empty()) {
            rec.precision = precision_curve(fit.fit.path, truth->support).filled(kPaucLimit);
            rec.pauc50 = pauc(rec.precision, kPaucLimit);
        }
    }
    return rec;
}

inline std::vector<ReplicationRecord> run_methods(const Dataset& ds, const std::vector<MethodSpec>& methods,
                                                  const std::string& scenario, int replication, std::uint64_t seed,
                                                  const CvOptions& cv)
{
    std::vector<ReplicationRecord> out;
    for (const auto& m : methods) {
        const SelectedFit fit = fit_and_select(m, ds.X, ds.y, cv);
        out.push_back(evaluate_fit(fit, scenario, replication, seed, ds.truth ? &*ds.truth : nullptr));
    }
    return out;
}

struct ExperimentResult {
    std::vector<ScenarioPoint> points;
    std::vector<ReplicationRecord> records; // ordered by (scenario, replication, method)
    std::vector<std::string> failures;
    MetricsSummary summary;
};

// ---------------------------------------------------------------------------
// CSV output

inline void write_replications_csv(std::ostream& out, const std::vector<ScenarioPoint>& points,
                                   const std::vector<ReplicationRecord>& records)
{
    std::map<std::string, const ScenarioSpec*> specs;
    for (const auto& p : points) specs[p.name] = &p.spec;
    out << "scenario,n,p,q,s,snr,bnr,factors,method,replication,seed,lambda_min,model_size,se2,ae,pauc50,pe\n";
    for (const auto& r : records) {
        const ScenarioSpec* s = specs.count(r.scenario) ? specs.at(r.scenario) : nullptr;
        out << r.scenario << ',';
        if (s)
            out << s->n << ',' << s->p << ',' << s->q << ',' << s->s << ',' << io::format_double(s->snr) << ','
                << io::format_double(s->bnr) << ',' << s->factor_count() << ',';
        else
            out << "NA,NA,NA,NA,NA,NA,NA,";
        out << r.method << ',' << r.replication << ',' << r.seed << ',' << io::format_double(r.lambda_min) << ','
            << r.model_size << ',' << io::format_double(r.se2) << ',' << io::format_double(r.ae) << ','
            << io::format_double(r.pauc50) << ',' << io::format_double(r.pe) << '\n';
    }
}

inline void write_precision_csv(std::ostream& out, const std::vector<ReplicationRecord>& records)
{
    out << "scenario,method,replication,size,precision\n";
    for (const auto& r : records)
        for (std::size_t i = 0; i < r.precision.size(); ++i)
            out << r.scenario << ',' << r.method << ',' << r.replication << ',' << (i + 1) << ','
                << io::format_double(r.precision[i]) << '\n';
}

inline void write_aggregate_csv(std::ostream& out, const MetricsSummary& summary)
{
    out << "scenario,method,replications,mse,mae,relative_mse,relative_mae,model_size,size_q10,size_q25,size_q50,"
           "size_q75,size_q90,pauc50,precision_at_cv_size,pe\n";
    for (const auto& s : summary.rows) {
        out << s.scenario << ',' << s.method << ',' << s.replications << ',' << io::format_double(s.mse) << ','
            << io::format_double(s.mae) << ',' << io::format_double(s.relative_mse) << ','
            << io::format_double(s.relative_mae) << ',' << io::format_double(s.model_size);
        for (double q : s.model_size_quantiles) out << ',' << io::format_double(q);
        out << ',' << io::format_double(s.pauc50) << ',' << io::format_double(s.precision_at_cv_size) << ','
            << io::format_double(s.pe) << '\n';
    }
}

// Plot-ready mean precision curves (one row per scenario, method, size).
inline void write_precision_curves_csv(std::ostream& out, const MetricsSummary& summary)
{
    out << "scenario,method,size,precision\n";
    for (const auto& s : summary.rows)
        for (std::size_t i = 0; i < s.precision.size(); ++i)
            out << s.scenario << ',' << s.method << ',' << (i + 1) << ',' << io::format_double(s.precision[i]) << '\n';
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    body(out);
}

inline void append_log(const std::filesystem::path& dir, const std::string& msg)
{
    std::ofstream log(dir / "run.log", std::ios::app);
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", std::gmtime(&now));
    log << buf << ' ' << msg << '\n';
}

} // namespace detail

inline void write_experiment_outputs(const std::filesystem::path& dir, const ExperimentResult& res)
{
    std::filesystem::create_directories(dir);
    detail::write_file(dir / "replications.csv",
                       [&](std::ostream& o) { write_replications_csv(o, res.points, res.records); });
    detail::write_file(dir / "precision.csv", [&](std::ostream& o) { write_precision_csv(o, res.records); });
    if (!res.summary.rows.empty()) {
        detail::write_file(dir / "aggregate.csv", [&](std::ostream& o) { write_aggregate_csv(o, res.summary); });
        detail::write_file(dir / "precision_curves.csv",
                           [&](std::ostream& o) { write_precision_curves_csv(o, res.summary); });
    }
}

// ---------------------------------------------------------------------------
// Experiment runner

inline CvOptions cv_options(int folds, std::uint64_t seed, bool pcs_within_folds)
{
    CvOptions cv;
    cv.n_folds = folds;
    cv.seed = derive_seed(seed, 1);
    cv.pcs_within_folds = pcs_within_folds;
    return cv;
}

// Every (grid point, replication) is an independent task with data seed
// base_seed + replication; results are collected by task index.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, bool write_files = true)
{
    ExperimentResult res;
    res.points = expand_grid(cfg);
    std::vector<ScenarioParams> params;
    for (const auto& pt : res.points) params.push_back(solve_scenario(pt.spec));

    const std::size_t reps = static_cast<std::size_t>(cfg.replications);
    const std::size_t tasks = res.points.size() * reps;
    std::vector<std::vector<ReplicationRecord>> out(tasks);
    std::vector<std::string> errors(tasks);

    parallel_for(tasks, resolve_threads(cfg.threads), [&](std::size_t t) {
        const std::size_t pi = t / reps;
        const int rep = static_cast<int>(t % reps);
        const auto& pt = res.points[pi];
        const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(rep);
        try {
            const Dataset ds = generate_dataset(params[pi], pt.spec.n, pt.spec.s, pt.spec.sigma_e, seed);
            out[t] = run_methods(ds, pt.methods, pt.name, rep, seed, cv_options(cfg.folds, seed, cfg.pcs_within_folds));
        } catch (const std::exception& e) {
            errors[t] = pt.name + " replication " + std::to_string(rep) + ": " + e.what();
        }
    });

    for (std::size_t t = 0; t < tasks; ++t) {
        if (!errors[t].empty()) res.failures.push_back(errors[t]);
        for (auto& r : out[t]) res.records.push_back(std::move(r));
    }
    if (!res.records.empty()) res.summary = aggregate_replications(res.records);

    if (write_files) {
        const std::filesystem::path dir(cfg.output_dir);
        write_experiment_outputs(dir, res);
        detail::append_log(dir, "experiment '" + cfg.name + "': " + std::to_string(res.points.size()) +
                                    " grid points x " + std::to_string(cfg.replications) + " replications, " +
                                    std::to_string(res.failures.size()) + " failed");
        for (const auto& f : res.failures) detail::append_log(dir, "FAILED " + f);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Reading results back (report)

inline std::vector<ReplicationRecord> read_replication_records(const std::string& replications_csv,
                                                               const std::string& precision_csv)
{
    const io::CsvTable t = io::read_csv(replications_csv);
    auto col = [&](const char* name) {
        const Index c = t.column(name);
        if (c < 0) throw InputError(replications_csv + ": missing column '" + name + "'");
        return static_cast<std::size_t>(c);
    };
    const auto c_scn = col("scenario"), c_m = col("method"), c_rep = col("replication"), c_seed = col("seed"),
               c_lam = col("lambda_min"), c_size = col("model_size"), c_se2 = col("se2"), c_ae = col("ae"),
               c_pauc = col("pauc50"), c_pe = col("pe");
    auto num = [&](std::size_t i, std::size_t c) {
        const auto& v = t.rows[i][c];
        if (v == "NA") return std::numeric_limits<double>::quiet_NaN();
        return io::parse_number(v, t.line_numbers[i], t.header[c]);
    };
    std::vector<ReplicationRecord> recs;
    std::map<std::tuple<std::string, std::string, int>, std::size_t> where;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        ReplicationRecord r;
        r.scenario = t.rows[i][c_scn];
        r.method = t.rows[i][c_m];
        r.replication = static_cast<int>(num(i, c_rep));
        r.seed = std::stoull(t.rows[i][c_seed]);
        r.lambda_min = num(i, c_lam);
        r.model_size = static_cast<Index>(num(i, c_size));
        r.se2 = num(i, c_se2);
        r.ae = num(i, c_ae);
        r.pauc50 = num(i, c_pauc);
        r.pe = num(i, c_pe);
        where[{r.scenario, r.method, r.replication}] = recs.size();
        recs.push_back(std::move(r));
    }
    if (!precision_csv.empty() && std::filesystem::exists(precision_csv)) {
        const io::CsvTable pt = io::read_csv(precision_csv);
        for (std::size_t i = 0; i < pt.rows.size(); ++i) {
            const auto& row = pt.rows[i];
            const int rep = static_cast<int>(io::parse_number(row[2], pt.line_numbers[i], "replication"));
            auto it = where.find({row[0], row[1], rep});
            if (it == where.end()) throw InputError(precision_csv + ": line " + std::to_string(pt.line_numbers[i]) +
                                                    " has no matching replication row");
            recs[it->second].precision.push_back(io::parse_number(row[4], pt.line_numbers[i], "precision"));
        }
    }
    return recs;
}

// Scenario columns of a replications CSV, so a report can be regenerated
// from files alone.
inline std::vector<ScenarioPoint> read_scenario_points(const std::string& replications_csv)
{
    const io::CsvTable t = io::read_csv(replications_csv);
    std::vector<ScenarioPoint> pts;
    std::map<std::string, bool> seen;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        if (seen[row[0]]) continue;
        seen[row[0]] = true;
        ScenarioPoint pt;
        pt.name = row[0];
        if (row[1] != "NA") {
            const auto ln = t.line_numbers[i];
            pt.spec.n = static_cast<Index>(io::parse_number(row[1], ln, "n"));
            pt.spec.p = static_cast<Index>(io::parse_number(row[2], ln, "p"));
            pt.spec.q = static_cast<Index>(io::parse_number(row[3], ln, "q"));
            pt.spec.s = static_cast<Index>(io::parse_number(row[4], ln, "s"));
            pt.spec.snr = io::parse_number(row[5], ln, "snr");
            pt.spec.bnr = io::parse_number(row[6], ln, "bnr");
            pt.spec.factors = static_cast<Index>(io::parse_number(row[7], ln, "factors"));
        }
        pts.push_back(std::move(pt));
    }
    return pts;
}

// ---------------------------------------------------------------------------
// Semi-synthetic study on a user-supplied feature matrix

struct SemisynthConfig {
    std::vector<double> g{0.0, 0.5, 1.0, 2.0};
    Index s = 5;
    double sigma_e = 1.0;
    int replications = 100;
    std::uint64_t base_seed = 1;
    std::vector<MethodSpec> methods{{Method::lasso, 0}, {Method::pc_lasso, 10}, {Method::plmm, 0}};
    int folds = 10;
    int threads = 0;
    bool pcs_within_folds = true;
};

struct SemisynthResult {
    std::vector<std::string> scenarios; // one per g, in input order
    std::vector<ReplicationRecord> records;
    std::vector<std::string> failures;
    MetricsSummary summary;
};

inline std::string g_label(double g) { return "g=" + io::format_double(g); }

inline SemisynthResult run_semisynth(const MatrixXd& X, const std::vector<std::string>& labels,
                                     const SemisynthConfig& cfg)
{
    if (cfg.g.empty()) throw InputError("no g values");
    if (cfg.replications < 1) throw InputError("replications must be >= 1");
    (void)label_indicators(labels);

    SemisynthResult res;
    for (double g : cfg.g) res.scenarios.push_back(g_label(g));
    const std::size_t reps = static_cast<std::size_t>(cfg.replications);
    const std::size_t tasks = cfg.g.size() * reps;
    std::vector<std::vector<ReplicationRecord>> out(tasks);
    std::vector<std::string> errors(tasks);
    parallel_for(tasks, resolve_threads(cfg.threads), [&](std::size_t t) {
        const std::size_t gi = t / reps;
        const int rep = static_cast<int>(t % reps);
        const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(rep);
        try {
            const Dataset ds = generate_semisynthetic(X, labels, cfg.g[gi], cfg.s, cfg.sigma_e, seed);
            out[t] = run_methods(ds, cfg.methods, res.scenarios[gi], rep, seed,
                                 cv_options(cfg.folds, seed, cfg.pcs_within_folds));
        } catch (const std::exception& e) {
            errors[t] = res.scenarios[gi] + " replication " + std::to_string(rep) + ": " + e.what();
        }
    });
    for (std::size_t t = 0; t < tasks; ++t) {
        if (!errors[t].empty()) res.failures.push_back(errors[t]);
        for (auto& r : out[t]) res.records.push_back(std::move(r));
    }
    if (!res.records.empty()) res.summary = aggregate_replications(res.records);
    return res;
}

// Metric-by-method rows with one column per g.
inline void write_semisynth_summary(std::ostream& out, const SemisynthResult& res,
                                    const std::vector<MethodSpec>& methods)
{
    out << "metric,method";
    for (const auto& s : res.scenarios) out << ',' << s;
    out << '\n';
    struct Metric {
        const char* name;
        double MethodSummary::*field;
    };
    const Metric metrics[] = {{"relative_mse", &MethodSummary::relative_mse},
                              {"relative_mae", &MethodSummary::relative_mae},
                              {"pauc50", &MethodSummary::pauc50},
                              {"model_size", &MethodSummary::model_size}};
    for (const auto& m : metrics)
        for (const auto& ms : methods) {
            out << m.name << ',' << ms.label();
            for (const auto& s : res.scenarios) {
                const MethodSummary* row = res.summary.find(s, ms.label());
                out << ',' << (row ? io::format_double(row->*(m.field)) : std::string("NA"));
            }
            out << '\n';
        }
}

// ---------------------------------------------------------------------------
// Fit report on user data

struct FitReportRow {
    std::string method;
    Index model_size = 0;
    double pe = 0.0;
    double lambda_min = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::string> selected;
};

inline std::vector<FitReportRow> fit_report(const MatrixXd& X, const VectorXd& y,
                                            const std::vector<std::string>& names,
                                            const std::vector<MethodSpec>& methods, int folds, std::uint64_t seed,
                                            int threads = 1)
{
    CvOptions cv;
    cv.n_folds = folds;
    cv.seed = seed;
    std::vector<FitReportRow> rows(methods.size() + 1);
    rows[0].method = "null";
    rows[0].pe = null_model_cve(y, assign_folds(X.rows(), folds, seed), folds);
    std::vector<std::string> errors(methods.size());
    parallel_for(methods.size(), threads, [&](std::size_t i) {
        try {
            const SelectedFit fit = fit_and_select(methods[i], X, y, cv);
            FitReportRow& row = rows[i + 1];
            row.method = methods[i].label();
            row.model_size = fit.model_size();
            row.pe = fit.prediction_error();
            row.lambda_min = fit.lambda_min();
            const VectorXd b = fit.beta();
            for (Index j = 0; j < b.size(); ++j)
                if (b[j] != 0.0) row.selected.push_back(names[static_cast<std::size_t>(j)]);
        } catch (const std::exception& e) {
            errors[i] = methods[i].label() + ": " + e.what();
        }
    });
    for (const auto& e : errors)
        if (!e.empty()) throw Error(e);
    return rows;
}

} // namespace deconf
