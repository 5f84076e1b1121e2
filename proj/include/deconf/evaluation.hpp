#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "lasso.hpp"
#include "pca.hpp"
#include "plmm.hpp"
#include "random.hpp"

namespace deconf {

struct MethodSpec {
    Method method = Method::lasso;
    Index k = 0; // PCs for PC-LASSO

    std::string label() const
    {
        if (method == Method::pc_lasso) return "pc_lasso_k" + std::to_string(k);
        return to_string(method);
    }
};

struct CvOptions {
    int n_folds = 10;
    std::uint64_t seed = 1;
    // PCs recomputed on each training fold (test rows projected); false uses
    // the full-data scores for every fold.
    bool pcs_within_folds = true;
    LassoOptions lasso;
    NullModelOptions null_model;
};

struct CvResult {
    VectorXd lambdas;
    VectorXd cve;
    Index lambda_min_index = 0;
    std::vector<int> fold_assignment;
};

// Fold of each instance: a seeded permutation dealt round-robin, so fold
// sizes differ by at most one.
inline std::vector<int> assign_folds(Index n, int n_folds, std::uint64_t seed)
{
    if (n_folds < 2) throw DomainError("need at least two folds");
    if (n / n_folds < 3) throw DimensionError("folds too small: n / n_folds < 3");
    Engine rng(seed);
    const auto perm = random_permutation(rng, n);
    std::vector<int> fold(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) fold[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = static_cast<int>(i % n_folds);
    return fold;
}

namespace detail {

inline MatrixXd select_rows(const MatrixXd& M, const std::vector<Index>& rows)
{
    MatrixXd out(static_cast<Index>(rows.size()), M.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = M.row(rows[i]);
    return out;
}

inline VectorXd select_rows(const VectorXd& v, const std::vector<Index>& rows)
{
    VectorXd out(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Index>(i)] = v[rows[i]];
    return out;
}

inline Index first_argmin(const VectorXd& v)
{
    Index best = 0;
    for (Index i = 1; i < v.size(); ++i)
        if (v[i] < v[best]) best = i;
    return best;
}

} // namespace detail

// Full-data fit of one method on its default (or given) lambda grid.
struct MethodFit {
    LassoPath path;
    std::optional<PcBasis> basis;
    std::optional<PlmmDecomposition> decomp;
};

inline MethodFit fit_method(const MethodSpec& spec, const MatrixXd& X, const VectorXd& y, const CvOptions& opt)
{
    MethodFit out;
    switch (spec.method) {
    case Method::lasso:
        out.path = lasso_path(X, y, MatrixXd(), opt.lasso);
        break;
    case Method::pc_lasso: {
        auto f = fit_pc_lasso(X, y, spec.k, opt.lasso);
        out.path = std::move(f.path);
        out.basis = std::move(f.basis);
        break;
    }
    case Method::plmm: {
        PlmmOptions po;
        po.lasso = opt.lasso;
        po.null_model = opt.null_model;
        auto f = fit_plmm(X, y, po);
        out.path = std::move(f.path);
        out.decomp = std::move(f.decomp);
        break;
    }
    }
    return out;
}

// K-fold cross-validation on a shared lambda grid. Predictions are
// intercept + X beta (+ projected PC scores times alpha) for the LASSO
// variants and the BLUP for PLMM.
inline CvResult cross_validate(const MethodSpec& spec, const MatrixXd& X, const VectorXd& y, const VectorXd& lambdas,
                               const CvOptions& opt)
{
    const Index n = X.rows();
    CvResult res;
    res.lambdas = lambdas;
    res.fold_assignment = assign_folds(n, opt.n_folds, opt.seed);
    const Index L = lambdas.size();
    MatrixXd sq_err = MatrixXd::Zero(opt.n_folds, L);

    std::optional<PcBasis> full_basis;
    if (spec.method == Method::pc_lasso && !opt.pcs_within_folds) full_basis = compute_pc_basis(X, spec.k);

    LassoOptions lo = opt.lasso;
    lo.lambdas = lambdas;

    for (int f = 0; f < opt.n_folds; ++f) {
        std::vector<Index> train, test;
        for (Index i = 0; i < n; ++i) (res.fold_assignment[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
        const MatrixXd Xtr = detail::select_rows(X, train), Xte = detail::select_rows(X, test);
        const VectorXd ytr = detail::select_rows(y, train), yte = detail::select_rows(y, test);

        MatrixXd pred(static_cast<Index>(test.size()), L);
        switch (spec.method) {
        case Method::lasso: {
            const LassoPath path = lasso_path(Xtr, ytr, MatrixXd(), lo);
            pred = Xte * path.coefs;
            pred.rowwise() += path.intercepts.transpose();
            break;
        }
        case Method::pc_lasso: {
            MatrixXd Ctr, Cte;
            if (full_basis) {
                Ctr = detail::select_rows(full_basis->scores, train);
                Cte = detail::select_rows(full_basis->scores, test);
            } else {
                const PcBasis b = compute_pc_basis(Xtr, spec.k);
                Ctr = b.scores;
                Cte = b.project(Xte);
            }
            const LassoPath path = lasso_path(Xtr, ytr, Ctr, lo);
            pred = Xte * path.coefs + Cte * path.unpenalized_coefs;
            pred.rowwise() += path.intercepts.transpose();
            break;
        }
        case Method::plmm: {
            PlmmOptions po;
            po.lasso = lo;
            po.null_model = opt.null_model;
            const PlmmFit fit = fit_plmm(Xtr, ytr, po);
            const BlupPredictor blup(Xte, Xtr, ytr, fit.decomp.vc);
            for (Index l = 0; l < L; ++l) pred.col(l) = blup(fit.path.coefs.col(l), fit.path.intercepts[l]);
            break;
        }
        }
        sq_err.row(f) = (pred.colwise() - yte).colwise().squaredNorm();
    }
    res.cve = sq_err.colwise().sum().transpose() / static_cast<double>(n);
    res.lambda_min_index = detail::first_argmin(res.cve);
    return res;
}

// Full-data path plus CV-selected lambda.
struct SelectedFit {
    MethodSpec spec;
    MethodFit fit;
    CvResult cv;

    Index index() const { return cv.lambda_min_index; }
    double lambda_min() const { return cv.lambdas[index()]; }
    VectorXd beta() const { return fit.path.coefs.col(index()); }
    Index model_size() const { return fit.path.model_size(index()); }
    double prediction_error() const { return cv.cve[index()]; }
};

inline SelectedFit fit_and_select(const MethodSpec& spec, const MatrixXd& X, const VectorXd& y, const CvOptions& opt)
{
    SelectedFit out;
    out.spec = spec;
    out.fit = fit_method(spec, X, y, opt);
    out.cv = cross_validate(spec, X, y, out.fit.path.lambdas, opt);
    return out;
}

// CV error of the intercept-only model on the same folds.
inline double null_model_cve(const VectorXd& y, const std::vector<int>& folds, int n_folds)
{
    double sse = 0.0;
    for (int f = 0; f < n_folds; ++f) {
        double sum = 0.0;
        Index cnt = 0;
        for (Index i = 0; i < y.size(); ++i)
            if (folds[static_cast<std::size_t>(i)] != f) {
                sum += y[i];
                ++cnt;
            }
        const double mu = sum / static_cast<double>(cnt);
        for (Index i = 0; i < y.size(); ++i)
            if (folds[static_cast<std::size_t>(i)] == f) sse += (y[i] - mu) * (y[i] - mu);
    }
    return sse / static_cast<double>(y.size());
}

// ---------------------------------------------------------------------------
// Selection and estimation metrics

// Precision (TP / selected) at each model size along a path, first visit wins.
struct PrecisionCurve {
    std::map<Index, double> visited;

    // Total function on 1..limit: unvisited sizes carry the previous visited
    // value forward; sizes before the first visit take the first visited value.
    std::vector<double> filled(Index limit) const
    {
        std::vector<double> out(static_cast<std::size_t>(limit), 0.0);
        if (visited.empty()) return out;
        double carry = visited.begin()->second;
        for (Index size = 1; size <= limit; ++size) {
            auto it = visited.find(size);
            if (it != visited.end()) carry = it->second;
            out[static_cast<std::size_t>(size - 1)] = carry;
        }
        return out;
    }
};

inline double precision_of(const VectorXd& coefs, const std::vector<bool>& is_signal)
{
    Index sel = 0, tp = 0;
    for (Index j = 0; j < coefs.size(); ++j)
        if (coefs[j] != 0.0) {
            ++sel;
            if (is_signal[static_cast<std::size_t>(j)]) ++tp;
        }
    return sel == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(sel);
}

inline PrecisionCurve precision_curve(const LassoPath& path, const std::vector<Index>& support)
{
    if (support.empty()) throw DomainError("precision undefined without true signals");
    std::vector<bool> is_signal(static_cast<std::size_t>(path.coefs.rows()), false);
    for (Index j : support) is_signal[static_cast<std::size_t>(j)] = true;
    PrecisionCurve curve;
    for (Index l = 0; l < path.size(); ++l) {
        const Index size = path.model_size(l);
        if (size == 0 || curve.visited.count(size)) continue;
        curve.visited.emplace(size, precision_of(path.coefs.col(l), is_signal));
    }
    return curve;
}

// Unit-width step area of a precision curve on sizes 1..limit (maximum limit).
inline double pauc(const std::vector<double>& filled_curve, Index limit = 50)
{
    if (static_cast<Index>(filled_curve.size()) < limit) throw DimensionError("curve shorter than pAUC limit");
    double area = 0.0;
    for (Index i = 0; i < limit; ++i) area += filled_curve[static_cast<std::size_t>(i)];
    return area;
}

inline double pauc(const PrecisionCurve& curve, Index limit = 50) { return pauc(curve.filled(limit), limit); }

struct EstimationErrors {
    double se2 = 0.0; // ||beta_hat - beta||_2^2
    double ae = 0.0;  // ||beta_hat - beta||_1
};

inline EstimationErrors estimation_errors(const VectorXd& beta_hat, const VectorXd& beta)
{
    if (beta_hat.size() != beta.size()) throw DimensionError("coefficient vectors differ in length");
    const VectorXd d = beta_hat - beta;
    return {d.squaredNorm(), d.lpNorm<1>()};
}

// ---------------------------------------------------------------------------
// Aggregation over replications

inline constexpr Index kPaucLimit = 50;

struct ReplicationRecord {
    std::string scenario;
    std::string method;
    int replication = 0;
    std::uint64_t seed = 0;
    double lambda_min = 0.0;
    Index model_size = 0;
    double se2 = std::numeric_limits<double>::quiet_NaN();
    double ae = std::numeric_limits<double>::quiet_NaN();
    double pauc50 = std::numeric_limits<double>::quiet_NaN();
    double pe = 0.0;
    std::vector<double> precision; // filled curve on 1..50, empty without truth
};

struct MethodSummary {
    std::string scenario;
    std::string method;
    int replications = 0;
    double mse = 0.0;
    double mae = 0.0;
    double relative_mse = std::numeric_limits<double>::quiet_NaN();
    double relative_mae = std::numeric_limits<double>::quiet_NaN();
    double model_size = 0.0;
    std::vector<double> model_size_quantiles; // at 0.1, 0.25, 0.5, 0.75, 0.9
    double pauc50 = 0.0;
    double precision_at_cv_size = std::numeric_limits<double>::quiet_NaN();
    double pe = 0.0;
    std::vector<double> precision; // pointwise mean curve
};

struct MetricsSummary {
    std::vector<MethodSummary> rows; // ordered by (scenario, method) of first appearance

    const MethodSummary* find(const std::string& scenario, const std::string& method) const
    {
        for (const auto& r : rows)
            if (r.scenario == scenario && r.method == method) return &r;
        return nullptr;
    }
};

inline const std::vector<double>& summary_quantile_levels()
{
    static const std::vector<double> q{0.1, 0.25, 0.5, 0.75, 0.9};
    return q;
}

// Linear interpolation between order statistics (Hyndman-Fan type 7).
inline double quantile(std::vector<double> v, double prob)
{
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Means over replications; relative errors are ratios of means against the
// "lasso" rows of the same scenario.
inline MetricsSummary aggregate_replications(const std::vector<ReplicationRecord>& records)
{
    if (records.empty()) throw DomainError("no replication records to aggregate");
    std::vector<std::pair<std::string, std::string>> keys;
    std::map<std::pair<std::string, std::string>, std::vector<const ReplicationRecord*>> groups;
    for (const auto& r : records) {
        auto key = std::make_pair(r.scenario, r.method);
        if (!groups.count(key)) keys.push_back(key);
        groups[key].push_back(&r);
    }

    MetricsSummary out;
    for (const auto& key : keys) {
        const auto& g = groups[key];
        // fixed order so the result does not depend on record order
        std::vector<const ReplicationRecord*> sorted = g;
        std::sort(sorted.begin(), sorted.end(),
                  [](auto* a, auto* b) { return a->replication < b->replication; });
        MethodSummary s;
        s.scenario = key.first;
        s.method = key.second;
        s.replications = static_cast<int>(sorted.size());
        const double cnt = static_cast<double>(sorted.size());
        std::vector<double> sizes;
        std::vector<double> curve_sum;
        int curves = 0;
        for (const auto* r : sorted) {
            s.mse += r->se2;
            s.mae += r->ae;
            s.model_size += static_cast<double>(r->model_size);
            s.pauc50 += r->pauc50;
            s.pe += r->pe;
            sizes.push_back(static_cast<double>(r->model_size));
            if (!r->precision.empty()) {
                if (curve_sum.empty()) curve_sum.assign(r->precision.size(), 0.0);
                for (std::size_t i = 0; i < curve_sum.size(); ++i) curve_sum[i] += r->precision[i];
                ++curves;
            }
        }
        s.mse /= cnt;
        s.mae /= cnt;
        s.model_size /= cnt;
        s.pauc50 /= cnt;
        s.pe /= cnt;
        for (double q : summary_quantile_levels()) s.model_size_quantiles.push_back(quantile(sizes, q));
        if (curves > 0) {
            for (auto& v : curve_sum) v /= curves;
            s.precision = curve_sum;
            const auto at = static_cast<Index>(std::llround(s.model_size));
            if (at >= 1 && at <= static_cast<Index>(s.precision.size()))
                s.precision_at_cv_size = s.precision[static_cast<std::size_t>(at - 1)];
        }
        out.rows.push_back(std::move(s));
    }
    for (auto& s : out.rows) {
        const MethodSummary* base = out.find(s.scenario, "lasso");
        if (!base) continue;
        s.relative_mse = s.mse / base->mse;
        s.relative_mae = s.mae / base->mae;
    }
    return out;
}

} // namespace deconf
