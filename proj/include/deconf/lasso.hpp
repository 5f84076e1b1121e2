#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace deconf {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Method { lasso, pc_lasso, plmm };

inline const char* to_string(Method m)
{
    switch (m) {
    case Method::lasso: return "lasso";
    case Method::pc_lasso: return "pc_lasso";
    case Method::plmm: return "plmm";
    }
    return "?";
}

// Solutions of (1/2n)||y - 1 b0 - U alpha - X beta||^2 + lambda sum_j w_j |beta_j|
// along a decreasing lambda grid.
struct LassoPath {
    Method method = Method::lasso;
    VectorXd lambdas;
    MatrixXd coefs;             // p x L
    VectorXd intercepts;        // L
    MatrixXd unpenalized_coefs; // k x L, PC scores for PC-LASSO; 0 x L otherwise
    std::vector<int> n_iters;   // coordinate-descent sweeps per lambda
    // Largest rise of the objective between consecutive sweeps, relative to
    // its value; coordinate descent should keep this at rounding level.
    double max_objective_increase = 0.0;

    Index size() const { return lambdas.size(); }
    Index model_size(Index l) const { return (coefs.col(l).array() != 0.0).count(); }
    std::vector<Index> model_sizes() const
    {
        std::vector<Index> out;
        for (Index l = 0; l < size(); ++l) out.push_back(model_size(l));
        return out;
    }
};

struct LassoOptions {
    std::optional<VectorXd> lambdas;
    std::optional<VectorXd> penalty_factor;
    bool intercept = true;
    int n_lambda = 100;
    double lambda_min_ratio = 1e-3;
    // Stop when every coordinate moves less than tol * sd(y), measured on the
    // fitted-value scale |delta beta_j| * ||x_j|| / sqrt(n).
    double tol = 1e-7;
    int max_sweeps = 100000;
    // Gradient slack accepted by the final optimality check.
    double kkt_tol = 1e-7;
};

inline double soft_threshold(double z, double t)
{
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

inline VectorXd log_spaced_lambdas(double lambda_max, double min_ratio, int count)
{
    VectorXd out(count);
    if (count == 1) {
        out[0] = lambda_max;
        return out;
    }
    const double lo = std::log(lambda_max * min_ratio), hi = std::log(lambda_max);
    for (int i = 0; i < count; ++i) out[i] = std::exp(hi + (lo - hi) * i / (count - 1));
    return out;
}

namespace detail {

// The unpenalized block [1 | U] is profiled out exactly: both X and y are
// projected onto the orthogonal complement of its span, the penalized problem
// is solved there, and the block's coefficients are recovered by least squares.
class UnpenalizedBlock {
public:
    UnpenalizedBlock(const MatrixXd& U, bool intercept, Index n) : intercept_(intercept), k_(U.cols())
    {
        if (U.cols() > 0 && U.rows() != n) throw DimensionError("unpenalized block must have n rows");
        full_.resize(n, k_ + (intercept ? 1 : 0));
        if (intercept) full_.col(0).setOnes();
        if (k_ > 0) full_.rightCols(k_) = U;
        if (full_.cols() == 0) return;
        qr_.compute(full_);
        if (qr_.rank() < full_.cols()) throw NumericalError("unpenalized columns are linearly dependent");
        basis_ = qr_.householderQ() * MatrixXd::Identity(n, full_.cols());
    }

    bool empty() const { return full_.cols() == 0; }

    template <class Derived>
    void project_out(Eigen::MatrixBase<Derived>& M) const
    {
        if (empty()) return;
        if (intercept_ && k_ == 0) {
            M.rowwise() -= M.colwise().mean();
            return;
        }
        M -= basis_ * (basis_.transpose() * M);
    }

    // Least-squares coefficients of [1 | U] for the partial residual v.
    VectorXd coefficients(const VectorXd& v) const
    {
        if (empty()) return VectorXd();
        return qr_.solve(v);
    }

    bool intercept() const { return intercept_; }
    Index k() const { return k_; }
    const MatrixXd& columns() const { return full_; }

private:
    bool intercept_;
    Index k_;
    MatrixXd full_;
    MatrixXd basis_;
    Eigen::ColPivHouseholderQR<MatrixXd> qr_;
};

} // namespace detail

// Gradient optimality at one lambda on the original (unprojected) problem.
struct KktReport {
    double inactive_excess = 0.0; // max over beta_j = 0 of |g_j| - lambda w_j (1 + 1e-6), floored at 0
    double active_error = 0.0;    // max over beta_j != 0 of |g_j - lambda w_j sign(beta_j)|
    double unpenalized_error = 0.0;
    double worst() const { return std::max({inactive_excess, active_error, unpenalized_error}); }
};

inline KktReport check_kkt(const MatrixXd& X, const VectorXd& y, const MatrixXd& unpenalized, bool intercept,
                           const LassoPath& path, Index l, const std::optional<VectorXd>& penalty_factor = {})
{
    const double n = static_cast<double>(X.rows());
    VectorXd r = y - X * path.coefs.col(l);
    if (intercept) r.array() -= path.intercepts[l];
    if (unpenalized.cols() > 0) r -= unpenalized * path.unpenalized_coefs.col(l);
    const VectorXd g = X.transpose() * r / n;
    const double lam = path.lambdas[l];
    KktReport rep;
    for (Index j = 0; j < X.cols(); ++j) {
        const double w = penalty_factor ? (*penalty_factor)[j] : 1.0;
        const double b = path.coefs(j, l);
        if (b == 0.0)
            rep.inactive_excess = std::max(rep.inactive_excess, std::abs(g[j]) - lam * w * (1.0 + 1e-6));
        else
            rep.active_error = std::max(rep.active_error, std::abs(g[j] - lam * w * (b > 0 ? 1.0 : -1.0)));
    }
    if (intercept) rep.unpenalized_error = std::abs(r.mean());
    if (unpenalized.cols() > 0)
        rep.unpenalized_error =
            std::max(rep.unpenalized_error, (unpenalized.transpose() * r / n).cwiseAbs().maxCoeff());
    return rep;
}

inline double lasso_objective(const MatrixXd& X, const VectorXd& y, const VectorXd& beta, double offset,
                              double lambda)
{
    const VectorXd r = (y - X * beta).array() - offset;
    return r.squaredNorm() / (2.0 * static_cast<double>(X.rows())) + lambda * beta.lpNorm<1>();
}

// Coordinate descent with warm starts along the lambda grid.
inline LassoPath lasso_path(const MatrixXd& X, const VectorXd& y, const MatrixXd& unpenalized = MatrixXd(),
                            const LassoOptions& opt = {})
{
    const Index n = X.rows(), p = X.cols();
    if (y.size() != n) throw DimensionError("y length must equal the number of rows of X");
    if (!X.allFinite() || !y.allFinite()) throw DomainError("non-finite value in X or y");
    if (unpenalized.size() > 0 && !unpenalized.allFinite()) throw DomainError("non-finite unpenalized column");
    const VectorXd w = opt.penalty_factor.value_or(VectorXd::Ones(p));
    if (w.size() != p || (w.array() < 0.0).any()) throw DomainError("penalty factors must be p nonnegative values");

    const detail::UnpenalizedBlock block(unpenalized, opt.intercept, n);
    MatrixXd Xr = X;
    VectorXd yr = y;
    block.project_out(Xr);
    block.project_out(yr);

    const double nd = static_cast<double>(n);
    const VectorXd v = Xr.colwise().squaredNorm().transpose() / nd;
    std::vector<bool> usable(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j) usable[static_cast<std::size_t>(j)] = v[j] > 1e-12;

    VectorXd lambdas;
    if (opt.lambdas) {
        lambdas = *opt.lambdas;
        for (Index l = 0; l < lambdas.size(); ++l) {
            if (!(lambdas[l] > 0.0)) throw DomainError("lambda values must be positive");
            if (l > 0 && !(lambdas[l] < lambdas[l - 1])) throw DomainError("lambda values must be strictly decreasing");
        }
    } else {
        // residual after the unpenalized features, so only they are active at lambda_max
        VectorXd r0 = yr;
        std::vector<Index> free_cols;
        for (Index j = 0; j < p; ++j)
            if (usable[static_cast<std::size_t>(j)] && w[j] == 0.0) free_cols.push_back(j);
        if (!free_cols.empty()) {
            const MatrixXd F = Xr(Eigen::all, free_cols);
            r0 -= F * F.colPivHouseholderQr().solve(yr);
        }
        const VectorXd g = (Xr.transpose() * r0).cwiseAbs() / nd;
        double lmax = 0.0;
        for (Index j = 0; j < p; ++j)
            if (usable[static_cast<std::size_t>(j)] && w[j] > 0.0) lmax = std::max(lmax, g[j] / w[j]);
        // constant outcome: any positive grid gives empty models
        if (!(lmax > 0.0)) lmax = 1.0;
        lambdas = log_spaced_lambdas(lmax, opt.lambda_min_ratio, opt.n_lambda);
    }
    const Index L = lambdas.size();

    LassoPath path;
    path.lambdas = lambdas;
    path.coefs = MatrixXd::Zero(p, L);
    path.intercepts = VectorXd::Zero(L);
    path.unpenalized_coefs = MatrixXd::Zero(block.k(), L);
    path.n_iters.assign(static_cast<std::size_t>(L), 0);

    const double sd_y = std::sqrt(yr.squaredNorm() / nd);
    VectorXd beta = VectorXd::Zero(p);
    VectorXd r = yr;
    std::vector<Index> active;
    std::vector<Index> all(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j) all[static_cast<std::size_t>(j)] = j;

    // Columns of X_r^T X_r / n, filled in as coordinates become active.
    std::vector<VectorXd> gram(static_cast<std::size_t>(p));
    auto gram_col = [&](Index j) -> const VectorXd& {
        VectorXd& c = gram[static_cast<std::size_t>(j)];
        if (c.size() == 0) c = Xr.transpose() * Xr.col(j) / nd;
        return c;
    };

    for (Index l = 0; l < L; ++l) {
        const double lam = lambdas[l];
        auto objective = [&] {
            return r.squaredNorm() / (2.0 * nd) + lam * w.cwiseProduct(beta).lpNorm<1>();
        };
        double prev_obj = objective();
        int sweeps = 0, since_exact = 0;

        auto sweep = [&](auto&& indices) {
            double max_change = 0.0;
            for (Index j : indices) {
                if (!usable[static_cast<std::size_t>(j)]) continue;
                const double old = beta[j];
                const double z = Xr.col(j).dot(r) / nd + v[j] * old;
                const double upd = soft_threshold(z, lam * w[j]) / v[j];
                if (upd != old) {
                    r.noalias() -= (upd - old) * Xr.col(j);
                    beta[j] = upd;
                    max_change = std::max(max_change, std::abs(upd - old) * std::sqrt(v[j]));
                }
            }
            ++since_exact;
            if (++sweeps > opt.max_sweeps)
                throw ConvergenceError("coordinate descent did not converge at lambda index " + std::to_string(l));
            const double obj = objective();
            if (obj > prev_obj)
                path.max_objective_increase =
                    std::max(path.max_objective_increase, (obj - prev_obj) / std::max(prev_obj, 1e-300));
            prev_obj = obj;
            return max_change;
        };

        // With a fixed sign pattern the active-set problem is a linear system.
        // Move toward its solution, stopping at whichever sign change (or the
        // endpoint) gives the lowest objective; repeat while that helps.
        auto exact_step = [&] {
            since_exact = 0;
            active.clear();
            for (Index j = 0; j < p; ++j)
                if (beta[j] != 0.0) active.push_back(j);
            bool moved = false;
            for (int round = 0; round < 200; ++round) {
                const Index m = static_cast<Index>(active.size());
                if (m == 0) break;
                MatrixXd XA(n, m);
                VectorXd bA0(m), rhs(m), sw(m);
                for (Index k = 0; k < m; ++k) {
                    const Index j = active[static_cast<std::size_t>(k)];
                    XA.col(k) = Xr.col(j);
                    bA0[k] = beta[j];
                    sw[k] = w[j] * (beta[j] > 0 ? 1.0 : -1.0);
                }
                bool singular = m >= n;
                Eigen::LLT<MatrixXd> llt;
                if (!singular) {
                    MatrixXd G(m, m);
                    for (Index k = 0; k < m; ++k) {
                        const VectorXd& gc = gram_col(active[static_cast<std::size_t>(k)]);
                        for (Index i = k; i < m; ++i) G(i, k) = gc[active[static_cast<std::size_t>(i)]];
                    }
                    llt.compute(G);
                    const VectorXd piv = llt.matrixLLT().diagonal();
                    singular = llt.info() != Eigen::Success || piv.minCoeff() < 1e-7 * piv.maxCoeff();
                }
                if (singular) {
                    // Dependent active columns: moving along the null space of X_A
                    // keeps the fit and lowers the penalty until a coefficient hits zero.
                    const Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(XA);
                    if (cod.rank() >= m) break;
                    const VectorXd d = cod.solve(XA * sw) - sw;
                    Index hit = -1;
                    double t_hit = std::numeric_limits<double>::infinity();
                    for (Index k = 0; k < m; ++k)
                        if (bA0[k] * d[k] < 0.0 && -bA0[k] / d[k] < t_hit) t_hit = -bA0[k] / d[k], hit = k;
                    if (hit < 0) break;
                    VectorXd bA = bA0 + t_hit * d;
                    bA[hit] = 0.0;
                    const VectorXd r_new = yr - XA * bA;
                    VectorXd trial = beta;
                    for (Index k = 0; k < m; ++k) trial[active[static_cast<std::size_t>(k)]] = bA[k];
                    const double obj = r_new.squaredNorm() / (2.0 * nd) + lam * w.cwiseProduct(trial).lpNorm<1>();
                    if (!(obj < prev_obj)) break;
                    beta = trial;
                    r = r_new;
                    prev_obj = obj;
                    moved = true;
                    active.clear();
                    for (Index j = 0; j < p; ++j)
                        if (beta[j] != 0.0) active.push_back(j);
                    continue;
                }
                rhs = XA.transpose() * yr / nd - lam * sw;
                const VectorXd d = llt.solve(rhs) - bA0;
                if (!d.allFinite()) break;
                const VectorXd u = XA * d;
                const double ru = r.dot(u), uu = u.squaredNorm(), rr = r.squaredNorm();
                auto obj_at = [&](double t) {
                    double l1 = 0.0;
                    for (Index j = 0; j < p; ++j) l1 += w[j] * std::abs(beta[j]);
                    for (Index k = 0; k < m; ++k) {
                        const Index j = active[static_cast<std::size_t>(k)];
                        l1 += w[j] * (std::abs(bA0[k] + t * d[k]) - std::abs(bA0[k]));
                    }
                    return (rr - 2.0 * t * ru + t * t * uu) / (2.0 * nd) + lam * l1;
                };
                double best_t = 1.0, best = obj_at(1.0);
                Index best_k = -1;
                for (Index k = 0; k < m; ++k) {
                    const double end = bA0[k] + d[k];
                    if (end * bA0[k] > 0.0) continue;
                    const double t = bA0[k] / (bA0[k] - end);
                    if (!(t > 0.0 && t < 1.0)) continue;
                    const double o = obj_at(t);
                    if (o < best) best = o, best_t = t, best_k = k;
                }
                if (!(best < prev_obj)) break;
                for (Index k = 0; k < m; ++k) beta[active[static_cast<std::size_t>(k)]] = bA0[k] + best_t * d[k];
                if (best_k >= 0) beta[active[static_cast<std::size_t>(best_k)]] = 0.0;
                r = yr - XA * (bA0 + best_t * d);
                if (best_k >= 0) r += XA.col(best_k) * (bA0[best_k] + best_t * d[best_k]);
                prev_obj = std::min(prev_obj, objective());
                moved = true;
                if (best_k < 0) break;
                active.erase(active.begin() + best_k);
            }
            return moved;
        };

        double thresh = opt.tol * sd_y;
        if (sd_y > 0.0) {
            for (int refine = 0;; ++refine) {
                while (sweep(all) >= thresh) {
                    active.clear();
                    for (Index j = 0; j < p; ++j)
                        if (beta[j] != 0.0) active.push_back(j);
                    // slow linear convergence: try the direct solve every so often
                    while (sweep(active) >= thresh)
                        if (since_exact >= 5 && exact_step()) break;
                    if (since_exact >= 5) exact_step();
                }
                // optimality on the projected problem; tighten and continue if off
                const VectorXd g = Xr.transpose() * r / nd;
                bool ok = true;
                for (Index j = 0; j < p && ok; ++j) {
                    if (!usable[static_cast<std::size_t>(j)]) continue;
                    const double bound = lam * w[j];
                    if (beta[j] == 0.0)
                        ok = std::abs(g[j]) <= bound * (1.0 + 1e-7) + 1e-14;
                    else
                        ok = std::abs(g[j] - (beta[j] > 0 ? bound : -bound)) <= opt.kkt_tol;
                }
                if (ok || refine >= 6) break;
                thresh *= 0.1;
            }
        }
        path.coefs.col(l) = beta;
        path.n_iters[static_cast<std::size_t>(l)] = sweeps;
    }

    if (!block.empty()) {
        for (Index l = 0; l < L; ++l) {
            const VectorXd alpha = block.coefficients(y - X * path.coefs.col(l));
            Index off = 0;
            if (block.intercept()) path.intercepts[l] = alpha[off++];
            if (block.k() > 0) path.unpenalized_coefs.col(l) = alpha.segment(off, block.k());
        }
    }
    return path;
}

} // namespace deconf
