#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "random.hpp"
#include "scenario.hpp"

namespace deconf {

struct GroundTruth {
    VectorXd beta;
    VectorXd gamma;
    std::vector<Index> support;
    VectorXd tau; // empty when no population bias is defined (semi-synthetic data)
    MatrixXd Z;
};

struct Dataset {
    MatrixXd X;
    VectorXd y;
    std::optional<GroundTruth> truth;
    std::vector<std::string> feature_names;

    Index n() const { return X.rows(); }
    Index p() const { return X.cols(); }
};

struct ColumnScaling {
    VectorXd center;
    VectorXd scale; // divide by this
};

// Centers every column and scales it to mean square one (n denominator).
inline ColumnScaling standardize_columns(MatrixXd& X)
{
    const double n = static_cast<double>(X.rows());
    ColumnScaling cs;
    cs.center = X.colwise().mean().transpose();
    X.rowwise() -= cs.center.transpose();
    cs.scale = (X.colwise().squaredNorm().transpose() / n).cwiseSqrt();
    for (Index j = 0; j < X.cols(); ++j) {
        if (!(cs.scale[j] > 1e-12 * std::max(1.0, std::abs(cs.center[j]))))
            throw InputError("column " + std::to_string(j + 1) + " is constant and cannot be standardized");
        X.col(j) /= cs.scale[j];
    }
    return cs;
}

inline std::vector<std::string> default_feature_names(Index p)
{
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
    return names;
}

struct GenerateOptions {
    // Rescale b so the realized support attains the target SNR exactly.
    bool exact_signal = false;
};

// Draws one dataset from the linear confounding model:
//   x = S(d + A z), y = x'beta + z'gamma + eps,
// with d ~ N(0, I_p), z ~ N(0, I), eps ~ N(0, sigma_e^2), and s positive
// signals of size b at uniformly chosen positions. X is re-standardized
// empirically after y has been formed.
inline Dataset generate_dataset(const ScenarioParams& params, Index n, Index s, double sigma_e,
                                std::uint64_t seed, const GenerateOptions& opt = {})
{
    const ConfoundingDesign& design = params.design;
    const Index p = design.p;
    if (n <= 1) throw DimensionError("need at least two instances");
    if (s < 0 || s > p) throw DimensionError("signal count must lie in [0, p]");
    if (!(sigma_e > 0.0)) throw DomainError("sigma_e must be > 0");

    Engine rng(seed);
    MatrixXd X = standard_normal(rng, n, p);
    MatrixXd Z = standard_normal(rng, n, design.q);
    const VectorXd eps = sigma_e * standard_normal(rng, n);
    std::vector<Index> support = sample_without_replacement(rng, p, s);

    if (design.a != 0.0) X.noalias() += Z * design.A.transpose();
    if (design.standardize) X = X * design.scale.asDiagonal();

    const double b = opt.exact_signal ? exact_signal_size(params, support) : params.b;
    VectorXd beta = signal_vector(p, support, b);

    Dataset ds;
    ds.y = X * beta + Z * params.gamma + eps;
    standardize_columns(X);
    ds.X = std::move(X);
    ds.feature_names = default_feature_names(p);
    ds.truth = GroundTruth{std::move(beta), params.gamma, std::move(support), params.tau, std::move(Z)};
    return ds;
}

// Indicator matrix for a categorical vector; levels in sorted order.
inline MatrixXd label_indicators(const std::vector<std::string>& labels, std::vector<std::string>* levels_out = nullptr)
{
    std::map<std::string, Index> level_index;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i].empty()) throw InputError("missing confounder label at row " + std::to_string(i + 1));
        level_index.emplace(labels[i], 0);
    }
    Index next = 0;
    for (auto& [name, idx] : level_index) idx = next++;
    MatrixXd Z = MatrixXd::Zero(static_cast<Index>(labels.size()), next);
    for (std::size_t i = 0; i < labels.size(); ++i) Z(static_cast<Index>(i), level_index.at(labels[i])) = 1.0;
    if (levels_out) {
        levels_out->clear();
        for (auto& [name, idx] : level_index) levels_out->push_back(name);
    }
    return Z;
}

// (-g, ..., -g, g, ..., g): the first ceil(L/2) levels push down, the rest up.
inline VectorXd alternating_level_effects(Index levels, double g)
{
    VectorXd gamma(levels);
    const Index neg = (levels + 1) / 2;
    for (Index l = 0; l < levels; ++l) gamma[l] = l < neg ? -g : g;
    return gamma;
}

// Simulates only the outcome on a real (already standardized) feature matrix,
// with a categorical confounder acting through level effects.
inline Dataset generate_semisynthetic(const MatrixXd& X, const std::vector<std::string>& z_labels, double g,
                                      Index s, double sigma_e, std::uint64_t seed)
{
    if (static_cast<Index>(z_labels.size()) != X.rows())
        throw DimensionError("label vector length must equal the number of rows of X");
    if (!(g >= 0.0)) throw DomainError("g must be >= 0");
    if (s < 0 || s > X.cols()) throw DimensionError("signal count must lie in [0, p]");
    if (!(sigma_e > 0.0)) throw DomainError("sigma_e must be > 0");
    MatrixXd Z = label_indicators(z_labels);
    if (Z.cols() < 2) throw InputError("confounder needs at least two levels");

    Engine rng(seed);
    const VectorXd eps = sigma_e * standard_normal(rng, X.rows());
    std::vector<Index> support = sample_without_replacement(rng, X.cols(), s);
    VectorXd beta = signal_vector(X.cols(), support, 1.0);
    VectorXd gamma = alternating_level_effects(Z.cols(), g);

    Dataset ds;
    ds.X = X;
    ds.y = X * beta + Z * gamma + eps;
    ds.feature_names = default_feature_names(X.cols());
    ds.truth = GroundTruth{std::move(beta), std::move(gamma), std::move(support), VectorXd(), std::move(Z)};
    return ds;
}

} // namespace deconf
