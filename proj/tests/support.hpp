#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include <deconf.hpp>

namespace testing_support {

using deconf::Index;
using deconf::MatrixXd;
using deconf::VectorXd;

inline MatrixXd random_matrix(Index rows, Index cols, std::uint64_t seed)
{
    deconf::Engine rng(seed);
    return deconf::standard_normal(rng, rows, cols);
}

inline VectorXd random_vector(Index n, std::uint64_t seed)
{
    deconf::Engine rng(seed);
    return deconf::standard_normal(rng, n);
}

inline MatrixXd standardized(MatrixXd X)
{
    deconf::standardize_columns(X);
    return X;
}

// Plain Gaussian elimination with partial pivoting, no Eigen decompositions.
inline VectorXd gauss_solve(MatrixXd M, VectorXd b)
{
    const Index n = M.rows();
    for (Index c = 0; c < n; ++c) {
        Index piv = c;
        for (Index r = c + 1; r < n; ++r)
            if (std::abs(M(r, c)) > std::abs(M(piv, c))) piv = r;
        M.row(c).swap(M.row(piv));
        std::swap(b[c], b[piv]);
        for (Index r = c + 1; r < n; ++r) {
            const double f = M(r, c) / M(c, c);
            for (Index k = c; k < n; ++k) M(r, k) -= f * M(c, k);
            b[r] -= f * b[c];
        }
    }
    VectorXd x(n);
    for (Index r = n - 1; r >= 0; --r) {
        double s = b[r];
        for (Index k = r + 1; k < n; ++k) s -= M(r, k) * x[k];
        x[r] = s / M(r, r);
    }
    return x;
}

// Proximal-gradient (ISTA) oracle for the intercept LASSO objective, run to
// a fixed point from zero. Independent of the coordinate-descent code path.
inline double ista_objective(const MatrixXd& X, const VectorXd& y, double lambda, int iters = 200000)
{
    const Index n = X.rows(), p = X.cols();
    const double nd = static_cast<double>(n);
    const MatrixXd Xc = X.rowwise() - X.colwise().mean();
    const VectorXd yc = y.array() - y.mean();
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(Xc.transpose() * Xc / nd);
    const double step = 1.0 / eig.eigenvalues().maxCoeff();
    VectorXd b = VectorXd::Zero(p);
    for (int it = 0; it < iters; ++it) {
        const VectorXd grad = -Xc.transpose() * (yc - Xc * b) / nd;
        VectorXd nb = b - step * grad;
        for (Index j = 0; j < p; ++j) nb[j] = deconf::soft_threshold(nb[j], step * lambda);
        const double change = (nb - b).cwiseAbs().maxCoeff();
        b = nb;
        if (change < 1e-15) break;
    }
    return (yc - Xc * b).squaredNorm() / (2.0 * nd) + lambda * b.lpNorm<1>();
}

inline MatrixXd double_loop_kinship(const MatrixXd& X)
{
    const Index n = X.rows(), p = X.cols();
    MatrixXd K(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index k = 0; k < n; ++k) {
            double s = 0.0;
            for (Index j = 0; j < p; ++j) s += X(i, j) * X(k, j);
            K(i, k) = s / static_cast<double>(p);
        }
    return K;
}

inline std::filesystem::path temp_dir(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("deconf_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

} // namespace testing_support
