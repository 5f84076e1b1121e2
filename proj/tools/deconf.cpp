// Command-line driver: scenario solving, simulation, experiment runs,
// semi-synthetic studies, fits on user data, and report regeneration.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <deconf.hpp>

namespace fs = std::filesystem;
using namespace deconf;

namespace {

enum ExitCode { kOk = 0, kRuntime = 1, kUnsolvable = 2, kInput = 3 };

std::vector<MethodSpec> method_specs(const std::vector<std::string>& methods, const std::vector<std::string>& ks)
{
    std::vector<Method> ms;
    for (const auto& m : methods)
        for (const auto& t : config::split_list(m)) ms.push_back(config::parse_method(t));
    std::vector<std::string> kv;
    for (const auto& k : ks)
        for (const auto& t : config::split_list(k)) kv.push_back(t);
    return expand_methods(ms, kv, 0);
}

std::vector<double> number_list(const std::vector<std::string>& items, const char* what)
{
    std::vector<double> out;
    for (const auto& it : items)
        for (const auto& t : config::split_list(it)) out.push_back(config::to_double(what, t));
    return out;
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body)
{
    fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    body(out);
}

int cmd_solve(const ScenarioSpec& spec, const std::string& format)
{
    const ScenarioParams par = solve_scenario(spec);
    if (format == "csv") {
        std::printf("q,bnr,bsr,snr,rho,r,b,a,g,var_psi,convention\n");
        std::printf("%lld,%s,%s,%s,%s,%s,%s,%s,%s,%s,%s\n", static_cast<long long>(spec.q),
                    io::format_double(spec.bnr).c_str(), io::format_double(spec.bsr()).c_str(),
                    io::format_double(spec.snr).c_str(), io::format_double(par.rho).c_str(),
                    io::format_double(par.r).c_str(), io::format_double(par.b).c_str(),
                    io::format_double(par.a).c_str(), io::format_double(par.g).c_str(),
                    io::format_double(par.var_psi).c_str(), to_string(spec.convention()));
        return kOk;
    }
    std::printf("%5s %6s %6s %6s %6s %6s %6s\n", "q", "BNR", "BSR", "SNR", "rho", "r", "b");
    std::printf("%5lld %6.2f %6.2f %6.2f %6.2f %6.2f %6.2f\n", static_cast<long long>(spec.q), spec.bnr, spec.bsr(),
                spec.snr, par.rho, par.r, par.b);
    return kOk;
}

ScenarioSpec scenario_from_file(const config::KeyValues& kv)
{
    using namespace config;
    ScenarioSpec s;
    if (auto v = kv.get("scenario", "n")) s.n = to_index("n", *v);
    if (auto v = kv.get("scenario", "p")) s.p = to_index("p", *v);
    if (auto v = kv.get("scenario", "q")) s.q = to_index("q", *v);
    if (auto v = kv.get("scenario", "s")) s.s = to_index("s", *v);
    if (auto v = kv.get("scenario", "snr")) s.snr = to_double("snr", *v);
    if (auto v = kv.get("scenario", "bnr")) s.bnr = to_double("bnr", *v);
    if (auto v = kv.get("scenario", "var_psi")) s.var_psi_target = to_double("var_psi", *v);
    if (auto v = kv.get("scenario", "sigma_e")) s.sigma_e = to_double("sigma_e", *v);
    if (auto v = kv.get("scenario", "standardize")) s.standardize = to_bool("standardize", *v);
    if (auto v = kv.get("scenario", "factors")) s.factors = to_index("factors", *v);
    if (auto v = kv.get("scenario", "layout")) s.layout = parse_layout(*v);
    return s;
}

int cmd_simulate(const std::string& cfg_path, const std::string& out_dir, std::optional<std::uint64_t> seed_flag)
{
    const auto kv = config::KeyValues::load(cfg_path);
    const ScenarioSpec spec = scenario_from_file(kv);
    std::uint64_t seed = 1;
    int reps = 1;
    if (auto v = kv.get("scenario", "seed")) seed = static_cast<std::uint64_t>(config::to_index("seed", *v));
    if (auto v = kv.get("scenario", "replications")) reps = static_cast<int>(config::to_index("replications", *v));
    if (seed_flag) seed = *seed_flag;
    const ScenarioParams par = solve_scenario(spec);
    const fs::path dir(out_dir);
    for (int r = 0; r < reps; ++r) {
        const std::uint64_t s = seed + static_cast<std::uint64_t>(r);
        const Dataset ds = generate_dataset(par, spec.n, spec.s, spec.sigma_e, s);
        char tag[32];
        std::snprintf(tag, sizeof tag, "%04d", r);
        write_file(dir / ("dataset_" + std::string(tag) + ".csv"),
                   [&](std::ostream& o) { io::write_dataset_csv(o, ds.X, ds.y, ds.feature_names); });
        write_file(dir / ("truth_" + std::string(tag) + ".csv"), [&](std::ostream& o) {
            io::write_truth_csv(o, ds.truth->beta, ds.truth->gamma, ds.truth->tau, ds.truth->support);
        });
    }
    std::printf("wrote %d dataset(s) to %s (a=%s r=%s b=%s)\n", reps, dir.string().c_str(),
                io::format_double(par.a).c_str(), io::format_double(par.r).c_str(), io::format_double(par.b).c_str());
    return kOk;
}

int cmd_run(const std::string& cfg_path, const std::string& out, int threads, std::optional<std::uint64_t> seed)
{
    ExperimentConfig cfg = parse_experiment_config(config::KeyValues::load(cfg_path));
    if (!out.empty()) cfg.output_dir = out;
    if (threads > 0) cfg.threads = threads;
    if (seed) cfg.base_seed = *seed;
    const ExperimentResult res = run_experiment(cfg);
    std::printf("%zu grid point(s), %zu record(s), output in %s\n", res.points.size(), res.records.size(),
                cfg.output_dir.c_str());
    if (!res.failures.empty()) {
        std::fprintf(stderr, "%zu replication(s) failed:\n", res.failures.size());
        for (const auto& f : res.failures) std::fprintf(stderr, "  %s\n", f.c_str());
        return kRuntime;
    }
    return kOk;
}

struct LabeledMatrix {
    MatrixXd X;
    std::vector<std::string> names;
    std::vector<std::string> labels;
};

LabeledMatrix load_with_label(const std::string& path, const std::string& label)
{
    const io::CsvTable t = io::read_csv(path);
    const Index lc = t.column(label);
    if (lc < 0)
        throw InputError("label column '" + label + "' not found; available columns: " + t.available_columns());
    std::vector<Index> cols;
    LabeledMatrix out;
    for (Index j = 0; j < static_cast<Index>(t.header.size()); ++j)
        if (j != lc) {
            cols.push_back(j);
            out.names.push_back(t.header[static_cast<std::size_t>(j)]);
        }
    out.X = io::numeric_columns(t, cols);
    out.labels = io::string_column(t, lc);
    return out;
}

int cmd_semisynth(const std::string& matrix, const std::string& label, SemisynthConfig cfg, const std::string& out)
{
    LabeledMatrix lm = load_with_label(matrix, label);
    standardize_columns(lm.X);
    const SemisynthResult res = run_semisynth(lm.X, lm.labels, cfg);
    const fs::path dir(out);
    write_file(dir / "replications.csv", [&](std::ostream& o) { write_replications_csv(o, {}, res.records); });
    write_file(dir / "precision.csv", [&](std::ostream& o) { write_precision_csv(o, res.records); });
    write_file(dir / "aggregate.csv", [&](std::ostream& o) { write_aggregate_csv(o, res.summary); });
    write_file(dir / "semisynth_summary.csv", [&](std::ostream& o) { write_semisynth_summary(o, res, cfg.methods); });
    write_semisynth_summary(std::cout, res, cfg.methods);
    if (!res.failures.empty()) {
        for (const auto& f : res.failures) std::fprintf(stderr, "FAILED %s\n", f.c_str());
        return kRuntime;
    }
    return kOk;
}

int cmd_fit(const std::string& x_path, const std::string& y_col, const std::vector<MethodSpec>& methods, int folds,
            std::uint64_t seed, int threads, const std::string& out)
{
    const io::NamedMatrix nm = io::load_matrix(x_path);
    Index yc = -1;
    for (std::size_t j = 0; j < nm.names.size(); ++j)
        if (nm.names[j] == y_col) yc = static_cast<Index>(j);
    if (yc < 0) {
        std::string avail;
        for (std::size_t j = 0; j < nm.names.size(); ++j) avail += (j ? ", " : "") + nm.names[j];
        throw InputError("outcome column '" + y_col + "' not found; available columns: " + avail);
    }
    const VectorXd y = nm.data.col(yc);
    MatrixXd X(nm.data.rows(), nm.data.cols() - 1);
    std::vector<std::string> names;
    for (Index j = 0, c = 0; j < nm.data.cols(); ++j)
        if (j != yc) {
            X.col(c++) = nm.data.col(j);
            names.push_back(nm.names[static_cast<std::size_t>(j)]);
        }
    standardize_columns(X);
    const auto rows = fit_report(X, y, names, methods, folds, seed, resolve_threads(threads));

    std::printf("%-16s %10s %12s\n", "method", "model_size", "pe");
    for (const auto& r : rows) std::printf("%-16s %10lld %12.6g\n", r.method.c_str(), static_cast<long long>(r.model_size), r.pe);
    if (!out.empty()) {
        const fs::path dir(out);
        write_file(dir / "fit_report.csv", [&](std::ostream& o) {
            o << "method,model_size,pe,lambda_min\n";
            for (const auto& r : rows)
                o << r.method << ',' << r.model_size << ',' << io::format_double(r.pe) << ','
                  << io::format_double(r.lambda_min) << '\n';
        });
        write_file(dir / "selected_features.csv", [&](std::ostream& o) {
            o << "method,feature\n";
            for (const auto& r : rows)
                for (const auto& f : r.selected) o << r.method << ',' << f << '\n';
        });
    }
    return kOk;
}

int cmd_report(const std::string& in, const std::string& out)
{
    const fs::path src(in);
    const fs::path dst(out.empty() ? in : out);
    ExperimentResult res;
    res.points = read_scenario_points((src / "replications.csv").string());
    res.records = read_replication_records((src / "replications.csv").string(), (src / "precision.csv").string());
    res.summary = aggregate_replications(res.records);
    write_file(dst / "aggregate.csv", [&](std::ostream& o) { write_aggregate_csv(o, res.summary); });
    write_file(dst / "precision_curves.csv", [&](std::ostream& o) { write_precision_curves_csv(o, res.summary); });
    write_aggregate_csv(std::cout, res.summary);
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"deconf: penalized regression under unobserved confounding"};
    app.require_subcommand(1);
    std::string format = "table";

    // solve-scenario
    auto* solve = app.add_subcommand("solve-scenario", "solve generator parameters for target SNR/BNR");
    ScenarioSpec spec;
    std::string convention = "standardized", layout = "balanced";
    solve->add_option("--q", spec.q, "number of confounders")->capture_default_str();
    solve->add_option("--bnr", spec.bnr, "bias-to-noise ratio")->capture_default_str();
    solve->add_option("--snr", spec.snr, "signal-to-noise ratio")->capture_default_str();
    solve->add_option("--p", spec.p, "number of features")->capture_default_str();
    solve->add_option("--n", spec.n, "number of instances")->capture_default_str();
    solve->add_option("--s", spec.s, "number of true signals")->capture_default_str();
    solve->add_option("--var-psi", spec.var_psi_target, "target Var(psi|tau)")->capture_default_str();
    solve->add_option("--factors", spec.factors, "latent factors loading on x (0 = q)")->capture_default_str();
    solve->add_option("--layout", layout, "balanced or nearly_balanced")->capture_default_str();
    solve->add_option("--convention", convention, "standardized or raw")->capture_default_str();
    solve->add_option("--format", format, "table or csv")->capture_default_str();

    // simulate
    auto* sim = app.add_subcommand("simulate", "generate datasets from a scenario file");
    std::string sim_cfg, sim_out = "simulated";
    std::optional<std::uint64_t> seed;
    sim->add_option("--config", sim_cfg, "scenario file")->required();
    sim->add_option("--out", sim_out, "output directory")->capture_default_str();
    sim->add_option("--seed", seed, "base seed (overrides the file)");
    sim->add_option("--format", format, "output format (csv)");

    // run
    auto* run = app.add_subcommand("run", "run an experiment config");
    std::string run_cfg, run_out;
    int threads = 0;
    run->add_option("--config", run_cfg, "experiment config")->required();
    run->add_option("--out", run_out, "output directory (overrides the config)");
    run->add_option("--threads", threads, "worker threads (overrides DECONF_THREADS)");
    run->add_option("--seed", seed, "base seed (overrides the config)");
    run->add_option("--format", format, "output format (csv)");

    // semisynth
    auto* semi = app.add_subcommand("semisynth", "simulate outcomes on a real feature matrix");
    std::string semi_matrix, semi_label, semi_out = "semisynth";
    std::vector<std::string> g_list{"0,0.5,1,2"}, k_list{"10"}, semi_methods{"lasso,pc_lasso,plmm"};
    SemisynthConfig scfg;
    semi->add_option("--matrix", semi_matrix, "CSV feature matrix with header")->required();
    semi->add_option("--label", semi_label, "categorical confounder column")->required();
    semi->add_option("--g", g_list, "confounder magnitudes")->capture_default_str();
    semi->add_option("--s", scfg.s, "number of true signals")->capture_default_str();
    semi->add_option("--sigma-e", scfg.sigma_e, "noise sd")->capture_default_str();
    semi->add_option("--replications", scfg.replications)->capture_default_str();
    semi->add_option("--seed", scfg.base_seed)->capture_default_str();
    semi->add_option("--methods", semi_methods)->capture_default_str();
    semi->add_option("--k", k_list, "PC counts for PC-LASSO")->capture_default_str();
    semi->add_option("--folds", scfg.folds)->capture_default_str();
    semi->add_option("--threads", scfg.threads);
    semi->add_option("--out", semi_out)->capture_default_str();
    semi->add_option("--format", format, "output format (csv)");

    // fit
    auto* fit = app.add_subcommand("fit", "fit all methods to user data with CV");
    std::string fit_x, fit_y, fit_out;
    std::vector<std::string> fit_methods{"lasso,pc_lasso,plmm"}, fit_k{"10"};
    int folds = 10;
    std::uint64_t fit_seed = 1;
    fit->add_option("--x", fit_x, "CSV (or DCNF1 cache) with features and the outcome column")->required();
    fit->add_option("--y", fit_y, "outcome column name")->required();
    fit->add_option("--methods", fit_methods)->capture_default_str();
    fit->add_option("--k", fit_k, "PC counts for PC-LASSO")->capture_default_str();
    fit->add_option("--folds", folds)->capture_default_str();
    fit->add_option("--seed", fit_seed)->capture_default_str();
    fit->add_option("--threads", threads);
    fit->add_option("--out", fit_out, "directory for fit_report.csv and selected_features.csv");
    fit->add_option("--format", format, "output format (csv)");

    // report
    auto* report = app.add_subcommand("report", "aggregate replication CSVs into plot-ready tables");
    std::string rep_in, rep_out;
    report->add_option("--in", rep_in, "directory with replications.csv")->required();
    report->add_option("--out", rep_out, "output directory (default: --in)");
    report->add_option("--format", format, "output format (csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInput;
    }

    try {
        if (*solve) {
            spec.standardize = config::parse_convention(convention) == Convention::standardized;
            spec.layout = config::parse_layout(layout);
            return cmd_solve(spec, format);
        }
        if (format != "table" && format != "csv") throw InputError("unsupported --format '" + format + "'");
        if (*sim) return cmd_simulate(sim_cfg, sim_out, seed);
        if (*run) return cmd_run(run_cfg, run_out, threads, seed);
        if (*semi) {
            scfg.g = number_list(g_list, "g");
            scfg.methods = method_specs(semi_methods, k_list);
            return cmd_semisynth(semi_matrix, semi_label, scfg, semi_out);
        }
        if (*fit) return cmd_fit(fit_x, fit_y, method_specs(fit_methods, fit_k), folds, fit_seed, threads, fit_out);
        if (*report) return cmd_report(rep_in, rep_out);
    } catch (const NoBracketError& e) {
        std::fprintf(stderr, "unsolvable scenario: %s\n", e.what());
        return kUnsolvable;
    } catch (const InputError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return kInput;
    } catch (const DimensionError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return kInput;
    } catch (const DomainError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return kInput;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kRuntime;
    }
    return kOk;
}
