#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "design.hpp"
#include "errors.hpp"
#include "model.hpp"

namespace deconf {

// Target ratios for a simulated scenario.
struct ScenarioSpec {
    Index n = 300;
    Index p = 600;
    Index q = 10;
    Index s = 8;
    double snr = 1.5;
    double bnr = 0.0;
    double var_psi_target = 1.0;
    double sigma_e = 1.0;
    bool standardize = true;
    SignLayout layout = SignLayout::balanced;
    // Number of latent factors loading on x. 0 means q. When larger than q,
    // only the first q factors enter gamma (the rest only shape x).
    Index factors = 0;

    Index factor_count() const { return factors > 0 ? factors : q; }
    double bsr() const { return snr > 0.0 ? bnr / snr : 0.0; }
    Convention convention() const { return standardize ? Convention::standardized : Convention::raw; }
};

struct ScenarioParams {
    ScenarioSpec spec;
    double a = 0.0;
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;
    double rho = 0.0;
    double var_psi = 0.0;
    VectorXd gamma;
    VectorXd tau;
    ConfoundingDesign design;
};

struct RootOptions {
    double tol = 1e-8;
    int max_iter = 200;
};

namespace detail {

// Solves f(x) = target for nondecreasing f on [lo, inf) with f(lo) <= target,
// doubling the upper end until it brackets the target, then bisecting.
inline double increasing_root(const std::function<double(double)>& f, double target, double lo, double hi,
                              const RootOptions& opt, const char* what)
{
    int expansions = 0;
    while (f(hi) < target) {
        lo = hi;
        hi *= 2.0;
        if (++expansions > opt.max_iter || !std::isfinite(hi)) {
            std::ostringstream msg;
            msg << "cannot bracket " << what << " = " << target << " within [0, " << hi << "]";
            throw NoBracketError(msg.str());
        }
    }
    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < opt.max_iter; ++it) {
        mid = 0.5 * (lo + hi);
        const double v = f(mid);
        if (std::abs(v - target) <= opt.tol) return mid;
        (v < target ? lo : hi) = mid;
    }
    return mid;
}

// Spectral form of the block model with A = a B and gamma = g c. With
// B'B = Q diag(lambda) Q' and w = Q'c:
//   Var(psi|tau) = g^2 sum w_i^2 / (1 + a^2 lambda_i)
//   tau'Var(x)tau = a^2 g^2 sum w_i^2 lambda_i / (1 + a^2 lambda_i)
// Both are unchanged by the diagonal rescaling S, so one evaluator serves both
// conventions.
struct SpectralModel {
    VectorXd lambda;
    VectorXd w2;

    SpectralModel(const MatrixXd& pattern, const VectorXd& c)
    {
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(pattern.transpose() * pattern);
        lambda = eig.eigenvalues().cwiseMax(0.0);
        w2 = (eig.eigenvectors().transpose() * c).array().square().matrix();
    }

    double var_psi(double a, double g) const
    {
        return g * g * (w2.array() / (1.0 + a * a * lambda.array())).sum();
    }

    double bias(double a, double g) const
    {
        const double a2 = a * a;
        return a2 * g * g * (w2.array() * lambda.array() / (1.0 + a2 * lambda.array())).sum();
    }
};

} // namespace detail

// Loading-direction pattern of gamma: ones on the first q factors, zero on
// any extra non-confounding factors.
inline VectorXd confounder_pattern(const ScenarioSpec& spec)
{
    VectorXd c = VectorXd::Zero(spec.factor_count());
    c.head(spec.q).setOnes();
    return c;
}

// Signal size for s equal effects under a unit-diagonal Var(x).
inline double diagonal_signal_size(double snr, double noise_var, Index s)
{
    if (s <= 0) return 0.0;
    return std::sqrt(snr * noise_var / static_cast<double>(s));
}

inline ScenarioParams solve_scenario(const ScenarioSpec& spec, const RootOptions& opt = {})
{
    if (spec.n <= 0 || spec.p <= 0 || spec.q <= 0) throw DimensionError("n, p, q must be positive");
    if (spec.s < 0 || spec.s > spec.p) throw DimensionError("signal count s must lie in [0, p]");
    if (spec.factor_count() < spec.q) throw DimensionError("factor count must be >= q");
    if (!(spec.bnr >= 0.0)) throw DomainError("BNR must be >= 0");
    if (!(spec.snr > 0.0) && spec.s > 0) throw DomainError("SNR must be > 0");
    if (!(spec.var_psi_target > 0.0)) throw DomainError("var_psi target must be > 0");
    if (!(spec.sigma_e > 0.0)) throw DomainError("sigma_e must be > 0");

    MatrixXd pattern = block_sign_pattern(spec.p, spec.factor_count(), spec.layout);
    const VectorXd c = confounder_pattern(spec);

    ScenarioParams out;
    out.spec = spec;
    if (spec.bnr > 0.0) {
        const detail::SpectralModel model(pattern, c);
        auto r_for = [&](double a) {
            return detail::increasing_root([&](double r) { return model.var_psi(a, r * a); },
                                           spec.var_psi_target, 0.0, 1.0, opt, "Var(psi|tau)");
        };
        auto bnr_at = [&](double a) {
            const double g = r_for(a) * a;
            return model.bias(a, g) / (model.var_psi(a, g) + 1.0);
        };
        out.a = detail::increasing_root(bnr_at, spec.bnr, 0.0, 1.0, opt, "BNR");
        out.r = r_for(out.a);
        out.g = out.r * out.a;
    }
    out.rho = out.a * out.a / (1.0 + out.a * out.a);
    out.gamma = out.g * c;
    out.design = design_from_pattern(std::move(pattern), out.a, spec.standardize);
    const auto scale = out.design.scale_or_none();
    out.tau = compute_tau(out.design.A, out.gamma, scale);
    out.var_psi = compute_var_psi(out.design.A, out.gamma, out.tau, scale);
    const double noise = (spec.bnr > 0.0 ? spec.var_psi_target : 0.0) + 1.0;
    out.b = diagonal_signal_size(spec.snr, noise, spec.s);
    return out;
}

// Signal size that makes the realized SNR exact for a given support, using
// the full quadratic form beta'Var(x)beta rather than its diagonal.
inline double exact_signal_size(const ScenarioParams& params, const std::vector<Index>& support)
{
    if (support.empty()) return 0.0;
    VectorXd u = VectorXd::Zero(params.design.p);
    for (Index j : support) u[j] = 1.0;
    const double quad = quad_form_var_x(params.design.A, params.design.scale_or_none(), u);
    return std::sqrt(params.spec.snr * (params.var_psi + 1.0) / quad);
}

inline VectorXd signal_vector(Index p, const std::vector<Index>& support, double b)
{
    VectorXd beta = VectorXd::Zero(p);
    for (Index j : support) beta[j] = b;
    return beta;
}

} // namespace deconf
