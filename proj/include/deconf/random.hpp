#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include <Eigen/Dense>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>

namespace deconf {

// Every random draw in the library goes through this engine so that output
// depends only on the seed: boost's mt19937_64 with its ziggurat normal and
// uniform integer distributions, which are implemented identically on every
// platform (unlike the std:: distributions).
using Engine = boost::random::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives an independent stream seed from (seed, stream).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream)
{
    return splitmix64(splitmix64(seed) ^ (stream + 0x632be59bd9b4e019ULL));
}

inline Eigen::MatrixXd standard_normal(Engine& rng, Eigen::Index rows, Eigen::Index cols)
{
    boost::random::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd out(rows, cols);
    // row-major fill so that a row (one instance) consumes consecutive draws
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            out(i, j) = normal(rng);
    return out;
}

inline Eigen::VectorXd standard_normal(Engine& rng, Eigen::Index n)
{
    boost::random::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) out[i] = normal(rng);
    return out;
}

// Fisher-Yates shuffle of 0..n-1.
inline std::vector<Eigen::Index> random_permutation(Engine& rng, Eigen::Index n)
{
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    for (Eigen::Index i = n - 1; i > 0; --i) {
        boost::random::uniform_int_distribution<Eigen::Index> pick(0, i);
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
    }
    return idx;
}

// k distinct indices from 0..n-1, returned sorted.
inline std::vector<Eigen::Index> sample_without_replacement(Engine& rng, Eigen::Index n, Eigen::Index k)
{
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    for (Eigen::Index i = 0; i < k; ++i) {
        boost::random::uniform_int_distribution<Eigen::Index> pick(i, n - 1);
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
    }
    idx.resize(static_cast<std::size_t>(k));
    std::sort(idx.begin(), idx.end());
    return idx;
}

} // namespace deconf
