#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "errors.hpp"
#include "lasso.hpp"

namespace deconf {

// Leading principal components of X, kept so that new rows can be projected
// onto the same loadings. Score columns have unit standard deviation on the
// rows they were computed from.
struct PcBasis {
    VectorXd center;          // column means used for centering
    MatrixXd loadings;        // p x k right singular vectors
    VectorXd singular_values; // k, descending
    MatrixXd scores;          // n x k, unit sd

    Index k() const { return loadings.cols(); }

    // Variance of each raw score, d_k^2 / n.
    VectorXd explained_variance() const
    {
        return singular_values.array().square() / static_cast<double>(scores.rows());
    }

    MatrixXd project(const MatrixXd& X_new) const
    {
        if (k() == 0) return MatrixXd(X_new.rows(), 0);
        const double root_n = std::sqrt(static_cast<double>(scores.rows()));
        MatrixXd centered = X_new.rowwise() - center.transpose();
        return centered * loadings * (root_n * singular_values.cwiseInverse()).asDiagonal();
    }
};

inline PcBasis compute_pc_basis(const MatrixXd& X, Index k)
{
    const Index n = X.rows(), p = X.cols();
    if (k < 0 || k > std::min(n - 1, p))
        throw DimensionError("number of PCs must lie in [0, min(n-1, p)]");
    PcBasis basis;
    basis.center = X.colwise().mean().transpose();
    if (k == 0) {
        basis.loadings = MatrixXd(p, 0);
        basis.scores = MatrixXd(n, 0);
        return basis;
    }
    const MatrixXd Xc = X.rowwise() - basis.center.transpose();
    Eigen::BDCSVD<MatrixXd> svd(Xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const VectorXd& d = svd.singularValues();
    if (!(d[k - 1] > 1e-9 * d[0]))
        throw NumericalError("requested " + std::to_string(k) + " PCs but X has numerical rank below that");
    basis.loadings = svd.matrixV().leftCols(k);
    basis.singular_values = d.head(k);
    basis.scores = std::sqrt(static_cast<double>(n)) * svd.matrixU().leftCols(k);
    return basis;
}

inline MatrixXd compute_pcs(const MatrixXd& X, Index k) { return compute_pc_basis(X, k).scores; }

struct PcLassoFit {
    LassoPath path;
    PcBasis basis;
};

// LASSO with the leading k PC scores as unpenalized covariates.
inline PcLassoFit fit_pc_lasso(const MatrixXd& X, const VectorXd& y, Index k, const LassoOptions& opt = {})
{
    PcLassoFit fit;
    fit.basis = compute_pc_basis(X, k);
    fit.path = lasso_path(X, y, fit.basis.scores, opt);
    fit.path.method = Method::pc_lasso;
    return fit;
}

inline LassoPath pc_lasso_path(const MatrixXd& X, const VectorXd& y, Index k, const LassoOptions& opt = {})
{
    return fit_pc_lasso(X, y, k, opt).path;
}

} // namespace deconf
