#include <gtest/gtest.h>

#include "support.hpp"

using namespace deconf;
using namespace testing_support;

namespace {

// Features sharing a low-rank structure, so the kinship has a few large eigenvalues.
MatrixXd structured_features(Index n, Index p, std::uint64_t seed)
{
    const MatrixXd Z = random_matrix(n, 3, seed);
    const MatrixXd A = random_matrix(3, p, seed + 1);
    return standardized(Z * A + random_matrix(n, p, seed + 2));
}

} // namespace

TEST(Kinship, SingleFeatureIsOuterProduct)
{
    const MatrixXd X = random_matrix(6, 1, 1);
    EXPECT_LT((estimate_K(X) - X * X.transpose()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Kinship, TraceAndLoopOracle)
{
    const MatrixXd X = standardized(random_matrix(15, 40, 2));
    const MatrixXd K = estimate_K(X);
    EXPECT_NEAR(K.trace(), 15.0, 1e-10);
    EXPECT_LT((K - double_loop_kinship(X)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(K, K.transpose());
}

TEST(Kinship, EigenReconstruction)
{
    const MatrixXd K = estimate_K(structured_features(25, 60, 3));
    const auto eig = eigen_kinship(K);
    for (Index i = 1; i < eig.values.size(); ++i) EXPECT_LE(eig.values[i], eig.values[i - 1]);
    const MatrixXd back = eig.vectors * eig.values.asDiagonal() * eig.vectors.transpose();
    EXPECT_LT((back - K).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_THROW(eigen_kinship(MatrixXd::Ones(3, 4)), DimensionError);
    MatrixXd asym = MatrixXd::Identity(3, 3);
    asym(0, 1) = 0.5;
    EXPECT_THROW(eigen_kinship(asym), DomainError);
}

TEST(NullModel, IdentityKinshipIsFlat)
{
    const VectorXd y = random_vector(40, 4);
    const auto vc = fit_null_variance_components(y, MatrixXd::Identity(40, 40));
    EXPECT_TRUE(vc.flat_likelihood);
    const VectorXd yc = y.array() - y.mean();
    EXPECT_NEAR(vc.sigma_s2 + vc.sigma_e2, yc.squaredNorm() / 40.0, 1e-10);
}

TEST(NullModel, ScaleEquivariance)
{
    const MatrixXd K = estimate_K(structured_features(60, 100, 5));
    const VectorXd y = random_vector(60, 6);
    const auto a = fit_null_variance_components(y, K);
    const auto b = fit_null_variance_components(3.0 * y.array() + 7.0, K);
    EXPECT_NEAR(a.eta, b.eta, 1e-9);
    EXPECT_NEAR(9.0 * a.sigma_s2, b.sigma_s2, 1e-8 * std::max(1.0, b.sigma_s2));
    EXPECT_NEAR(9.0 * a.sigma_e2, b.sigma_e2, 1e-8 * std::max(1.0, b.sigma_e2));
}

TEST(NullModel, MaximizesProfileOverGrid)
{
    const MatrixXd X = structured_features(60, 100, 7);
    const auto eig = eigen_kinship(estimate_K(X));
    Engine rng(8);
    const VectorXd u = eig.vectors * (eig.values.cwiseSqrt().cwiseProduct(standard_normal(rng, 60)));
    const VectorXd y = u + 0.5 * standard_normal(rng, 60);
    const auto vc = fit_null_variance_components(y, eig);
    const VectorXd yc = y.array() - y.mean();
    detail::NullProfile prof{(eig.vectors.transpose() * yc).array().square().matrix(), eig.values};
    for (double e = 0.01; e <= 0.99; e += 0.005) EXPECT_LE(prof(e), vc.log_likelihood + 1e-9);
    EXPECT_THROW(fit_null_variance_components(y.head(10), eig), DimensionError);
}

TEST(Whitening, ZeroEtaIsIdentityAndWhitensSigma)
{
    const MatrixXd X = structured_features(30, 50, 9);
    auto dec = decompose(X, random_vector(30, 10));
    dec.vc.eta = 0.0;
    EXPECT_LT((dec.whitening() - MatrixXd::Identity(30, 30)).cwiseAbs().maxCoeff(), 1e-12);

    dec.vc.eta = 0.7;
    dec.vc.sigma_s2 = 0.7 * 2.0;
    dec.vc.sigma_e2 = 0.3 * 2.0;
    const MatrixXd W = dec.whitening();
    const MatrixXd S = W * dec.sigma_direct() * W.transpose();
    EXPECT_LT((S - 2.0 * MatrixXd::Identity(30, 30)).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((dec.sigma_from_eigen() - dec.sigma_direct()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Plmm, ZeroEtaEqualsLasso)
{
    const MatrixXd X = structured_features(50, 80, 11);
    const VectorXd y = X.col(3) - X.col(9) + random_vector(50, 12);
    PlmmOptions opt;
    opt.fixed_eta = 0.0;
    const auto plmm = plmm_path(X, y, opt);
    LassoOptions lo;
    lo.lambdas = plmm.lambdas;
    const auto lasso = lasso_path(X, y, MatrixXd(), lo);
    EXPECT_LT((plmm.coefs - lasso.coefs).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((plmm.intercepts - lasso.intercepts).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_EQ(plmm.method, Method::plmm);
}

TEST(Plmm, KktOnRotatedProblem)
{
    const MatrixXd X = structured_features(50, 80, 13);
    const VectorXd y = X.col(0) + 0.5 * X.col(1) + random_vector(50, 14);
    const auto fit = fit_plmm(X, y);
    const RotatedData rd = rotate(X, y, fit.decomp);
    LassoPath as_unpen = fit.path;
    as_unpen.unpenalized_coefs = fit.path.intercepts.transpose();
    as_unpen.intercepts.setZero();
    for (Index l = 0; l < fit.path.size(); ++l)
        EXPECT_LT(check_kkt(rd.X, rd.y, MatrixXd(rd.intercept), false, as_unpen, l).worst(), 1e-6) << l;
    EXPECT_THROW(rotate(X.topRows(10), y.head(10), fit.decomp), DimensionError);
}

TEST(Plmm, PathInvariantToOutcomeScale)
{
    // Rescaling y rescales Sigma and leaves eta alone, so the whitening and
    // the selected supports along a rescaled grid do not change.
    const MatrixXd X = structured_features(40, 60, 15);
    const VectorXd y = X.col(2) - X.col(5) + random_vector(40, 16);
    const auto a = plmm_path(X, y);
    PlmmOptions opt;
    opt.lasso.lambdas = 4.0 * a.lambdas;
    const auto b = plmm_path(X, 4.0 * y, opt);
    EXPECT_LT((4.0 * a.coefs - b.coefs).cwiseAbs().maxCoeff(), 1e-6);
    for (Index l = 0; l < a.size(); ++l) EXPECT_EQ(a.model_size(l), b.model_size(l));
}

TEST(Blup, UncorrelatedBlocksGiveFixedEffectPrediction)
{
    // orthogonal feature rows make Sigma_21 vanish
    MatrixXd Xold = MatrixXd::Zero(3, 6), Xnew = MatrixXd::Zero(2, 6);
    Xold(0, 0) = Xold(1, 1) = Xold(2, 2) = 1.0;
    Xnew(0, 3) = Xnew(1, 4) = 1.0;
    VarianceComponents vc;
    vc.eta = 0.6;
    VectorXd beta = VectorXd::Zero(6);
    beta[3] = 2.0;
    const VectorXd pred = blup_predict(beta, 1.0, Xnew, Xold, VectorXd::Constant(3, 5.0), vc);
    EXPECT_NEAR(pred[0], 3.0, 1e-12);
    EXPECT_NEAR(pred[1], 1.0, 1e-12);
}

TEST(Blup, ZeroResidualAddsNothing)
{
    const MatrixXd Xold = structured_features(20, 30, 17), Xnew = structured_features(5, 30, 18);
    const VectorXd beta = random_vector(30, 19);
    const VectorXd y_old = (Xold * beta).array() + 0.5;
    VarianceComponents vc;
    vc.eta = 0.8;
    const VectorXd pred = blup_predict(beta, 0.5, Xnew, Xold, y_old, vc);
    EXPECT_LT(((Xnew * beta).array() + 0.5 - pred.array()).abs().maxCoeff(), 1e-12);
}

TEST(Blup, MatchesExplicitConditionalMean)
{
    const MatrixXd Xold = structured_features(20, 30, 20), Xnew = structured_features(4, 30, 21);
    const VectorXd beta = random_vector(30, 22) * 0.1, y_old = random_vector(20, 23);
    VarianceComponents vc;
    vc.eta = 0.4;
    MatrixXd all(24, 30);
    all << Xold, Xnew;
    const MatrixXd S = 0.4 * double_loop_kinship(all) + 0.6 * MatrixXd::Identity(24, 24);
    const VectorXd resid = (y_old - Xold * beta).array() - 0.2;
    const VectorXd oracle =
        (Xnew * beta).array() + 0.2 + (S.bottomLeftCorner(4, 20) * gauss_solve(S.topLeftCorner(20, 20), resid)).array();
    EXPECT_LT((blup_predict(beta, 0.2, Xnew, Xold, y_old, vc) - oracle).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_THROW(blup_predict(beta.head(5), 0.0, Xnew, Xold, y_old, vc), DimensionError);
}
