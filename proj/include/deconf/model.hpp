#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>

#include <Eigen/Dense>

#include "design.hpp"
#include "errors.hpp"

namespace deconf {

// Which covariance of x population quantities are computed against.
enum class Convention { standardized, raw };

inline const char* to_string(Convention c) { return c == Convention::standardized ? "standardized" : "raw"; }

namespace detail {

inline VectorXd scale_or_ones(const std::optional<VectorXd>& scale, Index p)
{
    if (!scale) return VectorXd::Ones(p);
    if (scale->size() != p) throw DimensionError("scale vector length must equal the number of rows of A");
    return *scale;
}

} // namespace detail

// v' Var(x) v with Var(x) = S (I + A A') S; S = I when scale is absent.
inline double quad_form_var_x(const MatrixXd& A, const std::optional<VectorXd>& scale, const VectorXd& v)
{
    const VectorXd s = detail::scale_or_ones(scale, A.rows());
    const VectorXd sv = s.cwiseProduct(v);
    return sv.squaredNorm() + (A.transpose() * sv).squaredNorm();
}

// Population bias of the x-only least-squares fit,
//   tau = [S (I + A A') S]^{-1} S A gamma,
// evaluated through the q x q system (I + A'A) so any dense A is cheap:
// (I + AA')^{-1} A = A (I + A'A)^{-1}, and the S factors reduce to S^{-1}.
inline VectorXd compute_tau(const MatrixXd& A, const VectorXd& gamma,
                            const std::optional<VectorXd>& scale = std::nullopt)
{
    if (A.cols() != gamma.size()) throw DimensionError("gamma length must equal the number of columns of A");
    if (!A.allFinite() || !gamma.allFinite()) throw DomainError("A and gamma must be finite");
    const Index q = A.cols();
    MatrixXd gram = MatrixXd::Identity(q, q);
    gram.noalias() += A.transpose() * A;
    Eigen::LLT<MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) throw NumericalError("I + A'A is not positive definite");
    VectorXd tau = A * llt.solve(gamma);
    if (scale) tau = tau.cwiseQuotient(detail::scale_or_ones(scale, A.rows()));
    return tau;
}

// Var(psi | tau) = gamma'gamma + tau' Var(x) tau - 2 gamma' (SA)' tau.
inline double compute_var_psi(const MatrixXd& A, const VectorXd& gamma, const VectorXd& tau,
                              const std::optional<VectorXd>& scale = std::nullopt)
{
    if (A.cols() != gamma.size() || A.rows() != tau.size()) throw DimensionError("inconsistent A, gamma, tau");
    const VectorXd s = detail::scale_or_ones(scale, A.rows());
    const VectorXd st = s.cwiseProduct(tau);
    const double cross = gamma.dot(A.transpose() * st);
    const double v = gamma.squaredNorm() + quad_form_var_x(A, scale, tau) - 2.0 * cross;
    if (v < -1e-10) throw NumericalError("negative Var(psi|tau): (A, gamma, tau) is inconsistent");
    return std::max(v, 0.0);
}

// Rewrites a model with E(zz') = cov_z as an equivalent one with identity
// confounder covariance: (A cov_z^{1/2}, cov_z^{1/2} gamma).
inline std::pair<MatrixXd, VectorXd> absorb_z_covariance(const MatrixXd& A, const VectorXd& gamma,
                                                         const MatrixXd& cov_z)
{
    const Index q = A.cols();
    if (cov_z.rows() != q || cov_z.cols() != q || gamma.size() != q)
        throw DimensionError("cov_z must be q x q with q = cols(A) = len(gamma)");
    if ((cov_z - cov_z.transpose()).cwiseAbs().maxCoeff() > 1e-8) throw DomainError("cov_z is not symmetric");
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (cov_z + cov_z.transpose()));
    if (eig.eigenvalues().minCoeff() < -1e-8) throw DomainError("cov_z is not positive semidefinite");
    const VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const MatrixXd half = eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
    return {A * half, half * gamma};
}

struct Ratios {
    double snr = 0.0;
    double bsr = 0.0;
    double bnr = 0.0;
    double var_psi = 0.0;
    double signal = 0.0; // beta' Var(x) beta
    double bias = 0.0;   // tau' Var(x) tau
};

inline Ratios compute_ratios(const MatrixXd& A, const std::optional<VectorXd>& scale, const VectorXd& beta,
                             const VectorXd& gamma)
{
    if (beta.size() != A.rows()) throw DimensionError("beta length must equal p");
    Ratios r;
    const VectorXd tau = compute_tau(A, gamma, scale);
    r.var_psi = compute_var_psi(A, gamma, tau, scale);
    r.signal = quad_form_var_x(A, scale, beta);
    r.bias = quad_form_var_x(A, scale, tau);
    if (r.signal <= 0.0) throw DomainError("bias-to-signal ratio undefined for beta = 0");
    r.snr = r.signal / (r.var_psi + 1.0);
    r.bsr = r.bias / r.signal;
    r.bnr = r.snr * r.bsr;
    return r;
}

inline Ratios compute_ratios(const ConfoundingDesign& design, const VectorXd& beta, const VectorXd& gamma,
                             Convention conv = Convention::standardized)
{
    return compute_ratios(design.A, conv == Convention::standardized ? std::optional<VectorXd>(design.scale)
                                                                     : std::nullopt,
                          beta, gamma);
}

// tau'tau for the balanced block design with gamma = g 1_q, in the form
// printed with the reparameterization argument: p a^2 g^2 (a^2+1) / (m a^2 + 1)^2.
// Direct evaluation of compute_tau gives block_tau_norm_squared below, which
// lacks the (a^2 + 1) factor; this one is kept only as a cross-check.
inline double tau_norm_closed_form(Index p, Index q, double a, double g)
{
    if (p <= 0 || q <= 0 || p % q != 0) throw DimensionError("closed form needs q to divide p");
    if (a < 0.0) throw DomainError("a must be >= 0");
    const double m = static_cast<double>(p / q);
    const double a2 = a * a;
    const double den = m * a2 + 1.0;
    return static_cast<double>(p) * a2 * g * g * (a2 + 1.0) / (den * den);
}

// tau'tau of the block design computed from (I + AA')^{-1} A gamma by hand:
// each block contributes m (a g / (1 + m a^2))^2.
inline double block_tau_norm_squared(Index p, Index q, double a, double g)
{
    if (p <= 0 || q <= 0 || p % q != 0) throw DimensionError("closed form needs q to divide p");
    const double m = static_cast<double>(p / q);
    const double den = m * a * a + 1.0;
    return static_cast<double>(p) * a * a * g * g / (den * den);
}

} // namespace deconf
