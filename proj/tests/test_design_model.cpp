#include <gtest/gtest.h>

#include "support.hpp"

using namespace deconf;
using namespace testing_support;

TEST(BuildDesign, FourByTwoBlock)
{
    const auto d = build_design(4, 2, 1.0, false);
    MatrixXd expected(4, 2);
    expected << 1, 0, -1, 0, 0, 1, 0, -1;
    EXPECT_EQ(d.A, expected);
    EXPECT_EQ(d.block_size, 2);
    EXPECT_TRUE(d.scale.isOnes());
}

TEST(BuildDesign, EightByTwoBlock)
{
    const double a = 0.7;
    const auto d = build_design(8, 2, a, true);
    MatrixXd expected(2, 8);
    expected << a, a, -a, -a, 0, 0, 0, 0, 0, 0, 0, 0, a, a, -a, -a;
    EXPECT_EQ(d.A.transpose(), expected);
    for (Index j = 0; j < 8; ++j) EXPECT_DOUBLE_EQ(d.scale[j], 1.0 / std::sqrt(1.0 + a * a));
}

TEST(BuildDesign, ZeroLoadingHasUnitScale)
{
    const auto d = build_design(4, 2, 0.0, true);
    EXPECT_TRUE(d.A.isZero(0.0));
    EXPECT_TRUE(d.scale.isOnes());
}

TEST(BuildDesign, BlockInvariants)
{
    const auto d = build_design(60, 6, 1.3, true);
    for (Index c = 0; c < d.q; ++c) {
        EXPECT_EQ((d.A.col(c).array() == 1.3).count(), 5);
        EXPECT_EQ((d.A.col(c).array() == -1.3).count(), 5);
    }
    for (Index j = 0; j < d.p; ++j) EXPECT_EQ((d.A.row(j).array() != 0.0).count(), 1);
}

TEST(BuildDesign, RejectsBadShapes)
{
    EXPECT_THROW(build_design(10, 3, 1.0, true), DimensionError);
    EXPECT_THROW(build_design(9, 3, 1.0, true), DimensionError); // m = 3 odd
    EXPECT_THROW(build_design(8, 2, -1.0, true), DomainError);
}

TEST(BuildDesign, NearlyBalancedLayoutAcceptsOddBlocks)
{
    const auto d = build_design(30, 10, 1.0, true, SignLayout::nearly_balanced);
    EXPECT_DOUBLE_EQ(d.A.sum(), 0.0); // one extra + and one extra - per pair of blocks
    EXPECT_EQ((d.A.col(0).array() > 0).count(), 2);
    EXPECT_EQ((d.A.col(1).array() > 0).count(), 1);
}

TEST(ComputeTau, BlockExample)
{
    const auto d = build_design(4, 2, 1.0, false);
    const VectorXd tau = compute_tau(d.A, VectorXd::Ones(2));
    VectorXd expected(4);
    expected << 1.0 / 3, -1.0 / 3, 1.0 / 3, -1.0 / 3;
    EXPECT_LT((tau - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(ComputeTau, ZeroLoadingGivesZero)
{
    EXPECT_TRUE(compute_tau(MatrixXd::Zero(5, 2), VectorXd::Ones(2)).isZero(0.0));
}

TEST(ComputeTau, MatchesGaussianEliminationOnDenseDesigns)
{
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const MatrixXd A = random_matrix(6, 2, seed);
        const VectorXd g = random_vector(2, seed + 100);
        const MatrixXd M = MatrixXd::Identity(6, 6) + A * A.transpose();
        const VectorXd oracle = gauss_solve(M, A * g);
        const VectorXd tau = compute_tau(A, g);
        EXPECT_LT((tau - oracle).cwiseAbs().maxCoeff(), 1e-10) << "seed " << seed;
        EXPECT_LT((M * tau - A * g).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(ComputeTau, StandardizedFormSolvesScaledSystem)
{
    const MatrixXd A = random_matrix(7, 3, 5);
    const VectorXd g = random_vector(3, 6);
    const VectorXd s = standardizing_scale(A);
    const MatrixXd S = s.asDiagonal();
    const MatrixXd V = S * (MatrixXd::Identity(7, 7) + A * A.transpose()) * S;
    const VectorXd oracle = gauss_solve(V, S * A * g);
    EXPECT_LT((compute_tau(A, g, s) - oracle).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ComputeTau, BalancedSignsGiveSymmetricBias)
{
    const auto d = build_design(40, 4, 0.8, true);
    std::vector<double> v;
    const VectorXd tau = compute_tau(d.A, VectorXd::Constant(4, 1.7), d.scale);
    for (Index j = 0; j < tau.size(); ++j) v.push_back(tau[j]);
    std::sort(v.begin(), v.end());
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(v[i], -v[v.size() - 1 - i], 1e-14);
}

TEST(VarPsi, ZeroLoadingEqualsGammaNorm)
{
    const MatrixXd A = MatrixXd::Zero(6, 3);
    const VectorXd g = VectorXd::Ones(3);
    EXPECT_DOUBLE_EQ(compute_var_psi(A, g, compute_tau(A, g)), 3.0);
}

TEST(VarPsi, BlockHandValue)
{
    const auto d = build_design(4, 2, 1.0, false);
    const VectorXd g = VectorXd::Ones(2);
    EXPECT_NEAR(compute_var_psi(d.A, g, compute_tau(d.A, g)), 2.0 / 3.0, 1e-14);
}

TEST(VarPsi, MatchesMonteCarloWithinThreeStandardErrors)
{
    const auto d = build_design(4, 2, 1.0, false);
    const VectorXd g = VectorXd::Ones(2);
    const VectorXd tau = compute_tau(d.A, g);
    const double v = compute_var_psi(d.A, g, tau);

    Engine rng(11);
    const Index draws = 1000000;
    double sum = 0.0, sum2 = 0.0, sum4 = 0.0;
    for (Index i = 0; i < draws; ++i) {
        const VectorXd z = standard_normal(rng, 2);
        const VectorXd x = standard_normal(rng, 4) + d.A * z;
        const double psi = z.dot(g) - x.dot(tau);
        sum += psi;
        sum2 += psi * psi;
        sum4 += psi * psi * psi * psi;
    }
    const double n = static_cast<double>(draws);
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    const double se = std::sqrt((sum4 / n - (sum2 / n) * (sum2 / n)) / n);
    EXPECT_NEAR(var, v, 3.0 * se);
    EXPECT_NEAR(var / v, 1.0, 0.01);
}

TEST(VarPsi, NonnegativeForAnyOffset)
{
    const auto d = build_design(4, 2, 1.0, false);
    const VectorXd g = VectorXd::Ones(2);
    const VectorXd off = 10.0 * compute_tau(d.A, g);
    EXPECT_GE(compute_var_psi(d.A, g, off), 0.0);
    EXPECT_THROW(compute_var_psi(d.A, VectorXd::Ones(3), off), DimensionError);
}

TEST(AbsorbCovariance, IdentityAndScalar)
{
    const MatrixXd A = random_matrix(5, 3, 2);
    const VectorXd g = random_vector(3, 3);
    auto [A1, g1] = absorb_z_covariance(A, g, MatrixXd::Identity(3, 3));
    EXPECT_LT((A1 - A).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((g1 - g).cwiseAbs().maxCoeff(), 1e-14);
    auto [A4, g4] = absorb_z_covariance(A, g, 4.0 * MatrixXd::Identity(3, 3));
    EXPECT_LT((A4 - 2.0 * A).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_LT((g4 - 2.0 * g).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(AbsorbCovariance, RejectsNonPsd)
{
    MatrixXd C(2, 2);
    C << 1, 2, 2, 1;
    EXPECT_THROW(absorb_z_covariance(MatrixXd::Ones(3, 2), VectorXd::Ones(2), C), DomainError);
    C << 1, 0.5, 0.4, 1;
    EXPECT_THROW(absorb_z_covariance(MatrixXd::Ones(3, 2), VectorXd::Ones(2), C), DomainError);
}

// z is a batch indicator over 3 equiprobable batches; the absorbed model's tau
// must match E(xx')^{-1} E(xz') gamma estimated from categorical draws.
TEST(AbsorbCovariance, BatchIndicatorMatchesMonteCarlo)
{
    const MatrixXd A = random_matrix(4, 3, 21);
    VectorXd g(3);
    g << 1.0, -0.5, 2.0;
    const MatrixXd cov_z = MatrixXd::Identity(3, 3) / 3.0; // E(zz') of one-hot draws
    auto [At, gt] = absorb_z_covariance(A, g, cov_z);
    const VectorXd tau = compute_tau(At, gt);

    Engine rng(22);
    boost::random::uniform_int_distribution<int> batch(0, 2);
    MatrixXd xx = MatrixXd::Zero(4, 4);
    VectorXd xzg = VectorXd::Zero(4);
    const int draws = 1000000;
    for (int i = 0; i < draws; ++i) {
        const int b = batch(rng);
        const VectorXd x = standard_normal(rng, 4) + A.col(b);
        xx.noalias() += x * x.transpose();
        xzg += x * g[b];
    }
    const VectorXd mc = xx.ldlt().solve(xzg);
    EXPECT_LT((mc - tau).norm() / tau.norm(), 0.01);
}

TEST(Ratios, NoConfoundingMeansNoBias)
{
    const auto d = build_design(20, 2, 0.0, true);
    const VectorXd beta = VectorXd::Ones(20);
    const Ratios r = compute_ratios(d, beta, VectorXd::Ones(2));
    EXPECT_EQ(r.bsr, 0.0);
    EXPECT_EQ(r.bnr, 0.0);
}

TEST(Ratios, BnrIsSnrTimesBsr)
{
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const MatrixXd A = random_matrix(12, 3, seed);
        const VectorXd beta = random_vector(12, seed + 50);
        const VectorXd g = random_vector(3, seed + 80);
        for (auto scale : {std::optional<VectorXd>(), std::optional<VectorXd>(standardizing_scale(A))}) {
            const Ratios r = compute_ratios(A, scale, beta, g);
            EXPECT_NEAR(r.bnr, r.snr * r.bsr, 1e-10 * std::max(1.0, r.bnr));
        }
    }
}

TEST(Ratios, ZeroSignalIsAnError)
{
    const auto d = build_design(8, 2, 1.0, true);
    EXPECT_THROW(compute_ratios(d, VectorXd::Zero(8), VectorXd::Ones(2)), DomainError);
}

TEST(TauClosedForm, ZeroLoading) { EXPECT_EQ(tau_norm_closed_form(300, 10, 0.0, 1.0), 0.0); }

TEST(TauClosedForm, LargeLoadingLimit)
{
    const double v = tau_norm_closed_form(300, 10, 1e3, 1.0);
    const double m = 30.0;
    EXPECT_NEAR(v / (300.0 / (m * m)), 1.0, 1e-3);
}

TEST(TauClosedForm, IncreasingAlongFixedRatio)
{
    const double r = 2.0;
    double prev = -1.0;
    for (double a = 0.01; a < 3.0; a += 0.01) {
        const double v = tau_norm_closed_form(600, 10, a, r * a);
        EXPECT_GT(v, prev);
        prev = v;
    }
}

// The printed closed form and direct evaluation differ by exactly (a^2 + 1).
TEST(TauClosedForm, DiffersFromDirectEvaluationByOnePlusASquared)
{
    for (double a : {0.3, 1.0, 2.5}) {
        const auto d = build_design(40, 4, a, false);
        const double g = 1.3;
        const double direct = compute_tau(d.A, VectorXd::Constant(4, g)).squaredNorm();
        EXPECT_NEAR(direct, block_tau_norm_squared(40, 4, a, g), 1e-12);
        EXPECT_NEAR(tau_norm_closed_form(40, 4, a, g) / direct, a * a + 1.0, 1e-10);
    }
}
