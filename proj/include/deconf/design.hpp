#pragma once

#include <cmath>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "errors.hpp"

namespace deconf {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// How loadings are signed inside a confounder block.
enum class SignLayout {
    // m/2 entries +a then m/2 entries -a; odd m is rejected.
    balanced,
    // Odd m allowed: the unpaired entry is +a in even-numbered blocks and -a
    // in odd-numbered ones so the signs still cancel across blocks.
    nearly_balanced,
};

// Loading matrix A (p x q) of the linear confounding model x = S(d + A z)
// together with the diagonal of S.
struct ConfoundingDesign {
    Index p = 0;
    Index q = 0;
    double a = 0.0;
    Index block_size = 0;
    bool standardize = true;
    MatrixXd A;
    VectorXd scale;

    // Loadings with a = 1; A == a * pattern.
    MatrixXd pattern;

    std::optional<VectorXd> scale_or_none() const
    {
        if (standardize) return scale;
        return std::nullopt;
    }
};

// Unit-variance scaling: s_j = (1 + sum_c A_jc^2)^{-1/2}.
inline VectorXd standardizing_scale(const MatrixXd& A)
{
    VectorXd v = VectorXd::Ones(A.rows()) + A.rowwise().squaredNorm();
    return v.cwiseSqrt().cwiseInverse();
}

inline MatrixXd block_sign_pattern(Index p, Index q, SignLayout layout = SignLayout::balanced)
{
    if (p <= 0 || q <= 0) throw DimensionError("block design needs p > 0 and q > 0");
    if (p % q != 0)
        throw DimensionError("block design needs q to divide p (p=" + std::to_string(p) +
                             ", q=" + std::to_string(q) + ")");
    const Index m = p / q;
    if (m % 2 != 0 && layout == SignLayout::balanced)
        throw DimensionError("block size p/q=" + std::to_string(m) + " is odd; balanced signs need it even");

    MatrixXd B = MatrixXd::Zero(p, q);
    for (Index c = 0; c < q; ++c) {
        Index n_pos = m / 2;
        if (m % 2 != 0 && c % 2 == 0) n_pos += 1;
        for (Index i = 0; i < m; ++i)
            B(c * m + i, c) = i < n_pos ? 1.0 : -1.0;
    }
    return B;
}

inline ConfoundingDesign design_from_pattern(MatrixXd pattern, double a, bool standardize)
{
    if (!(a >= 0.0) || !std::isfinite(a)) throw DomainError("loading magnitude a must be finite and >= 0");
    ConfoundingDesign d;
    d.p = pattern.rows();
    d.q = pattern.cols();
    d.a = a;
    d.block_size = d.q > 0 ? d.p / d.q : 0;
    d.standardize = standardize;
    d.A = a * pattern;
    d.pattern = std::move(pattern);
    d.scale = standardize ? standardizing_scale(d.A) : VectorXd::Ones(d.p);
    return d;
}

inline ConfoundingDesign build_design(Index p, Index q, double a, bool standardize,
                                      SignLayout layout = SignLayout::balanced)
{
    if (!(a >= 0.0) || !std::isfinite(a)) throw DomainError("loading magnitude a must be finite and >= 0");
    return design_from_pattern(block_sign_pattern(p, q, layout), a, standardize);
}

} // namespace deconf
