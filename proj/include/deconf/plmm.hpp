#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Dense>

#include "errors.hpp"
#include "lasso.hpp"

namespace deconf {

// Instance similarity from standardized features: K = X X' / p.
inline MatrixXd estimate_K(const MatrixXd& X)
{
    if (!X.allFinite()) throw DomainError("non-finite value in X");
    MatrixXd K(X.rows(), X.rows());
    K.setZero();
    K.selfadjointView<Eigen::Lower>().rankUpdate(X, 1.0 / static_cast<double>(X.cols()));
    K.triangularView<Eigen::StrictlyUpper>() = K.transpose();
    return K;
}

struct VarianceComponents {
    double eta = 0.0; // sigma_s^2 / (sigma_s^2 + sigma_e^2)
    double sigma_s2 = 0.0;
    double sigma_e2 = 0.0;
    double log_likelihood = 0.0;
    bool flat_likelihood = false; // only sigma_s^2 + sigma_e^2 identifiable
    bool at_boundary = false;     // eta landed on an end of the search interval
};

// Kinship eigensystem with eigenvalues in descending order; values below
// 1e-10 are clamped to zero.
struct KinshipEigen {
    VectorXd values;
    MatrixXd vectors;
};

inline KinshipEigen eigen_kinship(const MatrixXd& K)
{
    if (K.rows() != K.cols()) throw DimensionError("kinship matrix must be square");
    const double tol = 1e-10 * std::max(1.0, K.cwiseAbs().maxCoeff());
    if ((K - K.transpose()).cwiseAbs().maxCoeff() > tol) throw DomainError("kinship matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(K);
    if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of K failed");
    KinshipEigen out;
    out.values = eig.eigenvalues().reverse();
    out.vectors = eig.eigenvectors().rowwise().reverse();
    for (Index i = 0; i < out.values.size(); ++i)
        if (out.values[i] < 1e-10) out.values[i] = 0.0;
    return out;
}

struct NullModelOptions {
    double eta_min = 0.01;
    double eta_max = 0.99;
    int grid_points = 100;
    double tol = 1e-6;
};

namespace detail {

// Profile log-likelihood of rotated, centered y with covariance
// sigma^2 (eta D + (1 - eta) I), sigma^2 profiled out.
struct NullProfile {
    VectorXd y2; // squared rotated response
    VectorXd d;

    double sigma2(double eta) const
    {
        return (y2.array() / (eta * d.array() + (1.0 - eta))).sum() / static_cast<double>(y2.size());
    }

    double operator()(double eta) const
    {
        const double n = static_cast<double>(y2.size());
        const double s2 = sigma2(eta);
        return -0.5 * n * std::log(s2) - 0.5 * (eta * d.array() + (1.0 - eta)).log().sum();
    }
};

} // namespace detail

// ML fit of the intercept-only null model y ~ N(mu 1, sigma_s^2 K + sigma_e^2 I)
// over eta by a grid search followed by golden-section refinement.
inline VarianceComponents fit_null_variance_components(const VectorXd& y, const KinshipEigen& eig,
                                                       const NullModelOptions& opt = {})
{
    const Index n = y.size();
    if (eig.values.size() != n) throw DimensionError("kinship dimension must equal length of y");
    const VectorXd centered = y.array() - y.mean();
    const VectorXd rotated = eig.vectors.transpose() * centered;
    detail::NullProfile prof{rotated.array().square().matrix(), eig.values};

    VarianceComponents vc;
    if (!(prof.y2.sum() > 0.0)) {
        vc.eta = opt.eta_min;
        vc.flat_likelihood = true;
        vc.at_boundary = true;
        return vc;
    }

    const int G = opt.grid_points;
    std::vector<double> grid(static_cast<std::size_t>(G)), ll(static_cast<std::size_t>(G));
    double best = -std::numeric_limits<double>::infinity(), worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i < G; ++i) {
        grid[i] = opt.eta_min + (opt.eta_max - opt.eta_min) * i / (G - 1);
        ll[i] = prof(grid[i]);
        best = std::max(best, ll[i]);
        worst = std::min(worst, ll[i]);
    }
    int arg = 0;
    while (ll[arg] < best - 1e-9) ++arg;

    double eta = grid[arg];
    double eta_ll = ll[arg];
    if (best - worst <= 1e-9 * std::max(1.0, std::abs(best))) {
        vc.flat_likelihood = true;
    } else {
        double lo = grid[std::max(arg - 1, 0)], hi = grid[std::min(arg + 1, G - 1)];
        const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
        double x1 = hi - ratio * (hi - lo), x2 = lo + ratio * (hi - lo);
        double f1 = prof(x1), f2 = prof(x2);
        while (hi - lo > opt.tol) {
            if (f1 >= f2) {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - ratio * (hi - lo);
                f1 = prof(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + ratio * (hi - lo);
                f2 = prof(x2);
            }
        }
        const double cand = 0.5 * (lo + hi);
        const double cand_ll = prof(cand);
        if (cand_ll > eta_ll + 1e-9) {
            eta = cand;
            eta_ll = cand_ll;
        }
    }
    const double s2 = prof.sigma2(eta);
    vc.eta = eta;
    vc.log_likelihood = eta_ll;
    vc.sigma_s2 = s2 * eta;
    vc.sigma_e2 = s2 * (1.0 - eta);
    vc.at_boundary = eta - opt.eta_min < opt.tol || opt.eta_max - eta < opt.tol;
    return vc;
}

inline VarianceComponents fit_null_variance_components(const VectorXd& y, const MatrixXd& K,
                                                       const NullModelOptions& opt = {})
{
    return fit_null_variance_components(y, eigen_kinship(K), opt);
}

// Fitted covariance structure Sigma = sigma_s^2 K + sigma_e^2 I in eigen form.
struct PlmmDecomposition {
    MatrixXd K;
    VectorXd eigvals;
    MatrixXd eigvecs;
    VarianceComponents vc;

    double eta() const { return vc.eta; }

    // (eta d_i + 1 - eta)^{-1/2}: Sigma^{-1/2} up to a positive scale.
    VectorXd whitening_weights() const
    {
        const VectorXd h = vc.eta * eigvals.array() + (1.0 - vc.eta);
        if (h.minCoeff() <= 1e-12) throw NumericalError("whitening map is singular (eta d + 1 - eta <= 1e-12)");
        return h.cwiseSqrt().cwiseInverse();
    }

    MatrixXd whitening() const
    {
        return eigvecs * whitening_weights().asDiagonal() * eigvecs.transpose();
    }

    MatrixXd sigma_from_eigen() const
    {
        const VectorXd h = vc.sigma_s2 * eigvals.array() + vc.sigma_e2;
        return eigvecs * h.asDiagonal() * eigvecs.transpose();
    }

    MatrixXd sigma_direct() const
    {
        return vc.sigma_s2 * K + vc.sigma_e2 * MatrixXd::Identity(K.rows(), K.cols());
    }
};

inline PlmmDecomposition decompose(const MatrixXd& X, const VectorXd& y, const NullModelOptions& opt = {})
{
    PlmmDecomposition dec;
    dec.K = estimate_K(X);
    KinshipEigen eig = eigen_kinship(dec.K);
    dec.vc = fit_null_variance_components(y, eig, opt);
    dec.eigvals = std::move(eig.values);
    dec.eigvecs = std::move(eig.vectors);
    return dec;
}

struct RotatedData {
    MatrixXd X;
    VectorXd y;
    VectorXd intercept; // W 1, carried as an unpenalized column
};

inline RotatedData rotate(const MatrixXd& X, const VectorXd& y, const PlmmDecomposition& dec)
{
    if (X.rows() != dec.eigvecs.rows() || y.size() != X.rows())
        throw DimensionError("decomposition was fitted on a different number of instances");
    const MatrixXd W = dec.whitening();
    RotatedData rd;
    rd.X.noalias() = W * X;
    rd.y.noalias() = W * y;
    rd.intercept = W.rowwise().sum();
    return rd;
}

struct PlmmOptions {
    LassoOptions lasso;
    NullModelOptions null_model;
    // Skip the variance-component fit and whiten with this eta.
    std::optional<double> fixed_eta;
};

struct PlmmFit {
    LassoPath path;
    PlmmDecomposition decomp;
};

inline PlmmFit fit_plmm(const MatrixXd& X, const VectorXd& y, const PlmmOptions& opt = {})
{
    PlmmFit fit;
    fit.decomp = decompose(X, y, opt.null_model);
    if (opt.fixed_eta) {
        const double s2 = fit.decomp.vc.sigma_s2 + fit.decomp.vc.sigma_e2;
        fit.decomp.vc.eta = *opt.fixed_eta;
        fit.decomp.vc.sigma_s2 = s2 * *opt.fixed_eta;
        fit.decomp.vc.sigma_e2 = s2 * (1.0 - *opt.fixed_eta);
    }
    const RotatedData rd = rotate(X, y, fit.decomp);
    LassoOptions lo = opt.lasso;
    lo.intercept = false;
    fit.path = lasso_path(rd.X, rd.y, MatrixXd(rd.intercept), lo);
    fit.path.intercepts = fit.path.unpenalized_coefs.row(0).transpose();
    fit.path.unpenalized_coefs.resize(0, fit.path.size());
    fit.path.method = Method::plmm;
    return fit;
}

inline LassoPath plmm_path(const MatrixXd& X, const VectorXd& y, const PlmmOptions& opt = {})
{
    return fit_plmm(X, y, opt).path;
}

// Conditional-mean prediction for new instances related to the training ones:
//   mu_new + Sigma_21 Sigma_11^{-1} (y_old - mu_old),  mu = intercept + X beta,
// with Sigma blocks taken from the kinship of the row-stacked [X_old; X_new].
// Only eta matters since the common scale cancels. The factorization is reused
// across coefficient vectors.
class BlupPredictor {
public:
    BlupPredictor(const MatrixXd& X_new, const MatrixXd& X_old, const VectorXd& y_old, const VarianceComponents& vc)
        : X_new_(X_new), X_old_(X_old), y_old_(y_old), eta_(vc.eta)
    {
        if (X_new.cols() != X_old.cols() || y_old.size() != X_old.rows())
            throw DimensionError("inconsistent dimensions for BLUP");
        if (eta_ == 0.0) return;
        const double p = static_cast<double>(X_old.cols());
        MatrixXd S11 = MatrixXd::Identity(X_old.rows(), X_old.rows()) * (1.0 - eta_);
        S11.noalias() += (eta_ / p) * X_old * X_old.transpose();
        llt_.compute(S11);
        if (llt_.info() != Eigen::Success) throw NumericalError("Sigma_11 is singular");
        S21_ = (eta_ / p) * X_new * X_old.transpose();
    }

    VectorXd operator()(const VectorXd& beta, double intercept) const
    {
        if (beta.size() != X_old_.cols()) throw DimensionError("inconsistent dimensions for BLUP");
        VectorXd pred = (X_new_ * beta).array() + intercept;
        const VectorXd resid = (y_old_ - X_old_ * beta).array() - intercept;
        if (eta_ == 0.0 || resid.isZero(0.0)) return pred;
        pred.noalias() += S21_ * llt_.solve(resid);
        return pred;
    }

private:
    const MatrixXd& X_new_;
    const MatrixXd& X_old_;
    const VectorXd& y_old_;
    double eta_;
    Eigen::LLT<MatrixXd> llt_;
    MatrixXd S21_;
};

inline VectorXd blup_predict(const VectorXd& beta, double intercept, const MatrixXd& X_new, const MatrixXd& X_old,
                             const VectorXd& y_old, const VarianceComponents& vc)
{
    return BlupPredictor(X_new, X_old, y_old, vc)(beta, intercept);
}

} // namespace deconf
