#include <gtest/gtest.h>

#include "support.hpp"

using namespace deconf;
using namespace testing_support;

namespace {

// Path whose l-th column selects the first l+1 entries of `order`.
LassoPath nested_path(Index p, const std::vector<Index>& order)
{
    LassoPath path;
    const auto L = static_cast<Index>(order.size());
    path.lambdas = VectorXd::LinSpaced(L, static_cast<double>(L), 1.0);
    path.coefs = MatrixXd::Zero(p, L);
    path.intercepts = VectorXd::Zero(L);
    for (Index l = 0; l < L; ++l)
        for (Index i = 0; i <= l; ++i) path.coefs(order[static_cast<std::size_t>(i)], l) = 1.0;
    return path;
}

ReplicationRecord record(const std::string& method, int rep, double se2, double ae, Index size)
{
    ReplicationRecord r;
    r.scenario = "s";
    r.method = method;
    r.replication = rep;
    r.se2 = se2;
    r.ae = ae;
    r.model_size = size;
    r.pauc50 = 10.0;
    return r;
}

} // namespace

TEST(Folds, BalancedAndDeterministic)
{
    const auto a = assign_folds(103, 10, 5);
    std::vector<int> counts(10, 0);
    for (int f : a) ++counts[static_cast<std::size_t>(f)];
    EXPECT_EQ(*std::max_element(counts.begin(), counts.end()) - *std::min_element(counts.begin(), counts.end()), 1);
    EXPECT_EQ(a, assign_folds(103, 10, 5));
    EXPECT_NE(a, assign_folds(103, 10, 6));
    EXPECT_THROW(assign_folds(29, 10, 1), DimensionError);
    EXPECT_THROW(assign_folds(100, 1, 1), DomainError);
}

TEST(CrossValidation, FirstLambdaIsNearNullModel)
{
    // training folds have their own lambda_max, so the first column is only
    // approximately the intercept-only fit
    const MatrixXd X = standardized(random_matrix(60, 30, 1));
    const VectorXd y = X.col(0) + random_vector(60, 2);
    CvOptions opt;
    const auto sel = fit_and_select({Method::lasso, 0}, X, y, opt);
    const double null_cve = null_model_cve(y, sel.cv.fold_assignment, 10);
    EXPECT_NEAR(sel.cv.cve[0] / null_cve, 1.0, 0.05);
    EXPECT_EQ(sel.cv.lambda_min_index, detail::first_argmin(sel.cv.cve));
    EXPECT_LE(sel.prediction_error(), sel.cv.cve[0]);

    const VectorXd yc = y.array() - y.mean();
    EXPECT_NEAR(null_cve / (yc.squaredNorm() / 59.0), 1.0, 0.1);

    // a grid starting far above every fold's lambda_max reproduces it exactly
    const VectorXd big = VectorXd::LinSpaced(3, 30.0, 10.0);
    EXPECT_NEAR(cross_validate({Method::lasso, 0}, X, y, big, opt).cve[0], null_cve, 1e-10);
}

TEST(CrossValidation, FixedFoldsReproducible)
{
    const MatrixXd X = standardized(random_matrix(50, 20, 3));
    const VectorXd y = X.col(1) + random_vector(50, 4);
    CvOptions opt;
    opt.n_folds = 5;
    for (MethodSpec spec : {MethodSpec{Method::lasso, 0}, MethodSpec{Method::pc_lasso, 2}, MethodSpec{Method::plmm, 0}}) {
        const auto a = fit_and_select(spec, X, y, opt);
        const auto b = fit_and_select(spec, X, y, opt);
        EXPECT_EQ(a.cv.cve, b.cv.cve) << spec.label();
        EXPECT_TRUE(a.cv.cve.allFinite()) << spec.label();
    }
}

TEST(CrossValidation, PlmmCvUsesBlup)
{
    const MatrixXd X = standardized(random_matrix(40, 20, 5));
    const VectorXd y = X.col(2) + random_vector(40, 6);
    CvOptions opt;
    opt.n_folds = 4;
    const auto sel = fit_and_select({Method::plmm, 0}, X, y, opt);

    const Index l = sel.index();
    double sse = 0.0;
    for (int f = 0; f < 4; ++f) {
        std::vector<Index> train, test;
        for (Index i = 0; i < 40; ++i) (sel.cv.fold_assignment[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
        const MatrixXd Xtr = detail::select_rows(X, train), Xte = detail::select_rows(X, test);
        const VectorXd ytr = detail::select_rows(y, train), yte = detail::select_rows(y, test);
        PlmmOptions po;
        po.lasso.lambdas = sel.cv.lambdas;
        const auto fit = fit_plmm(Xtr, ytr, po);
        sse += (blup_predict(fit.path.coefs.col(l), fit.path.intercepts[l], Xte, Xtr, ytr, fit.decomp.vc) - yte)
                   .squaredNorm();
    }
    EXPECT_NEAR(sse / 40.0, sel.cv.cve[l], 1e-10);
}

TEST(Precision, HandExamples)
{
    const std::vector<Index> support{0, 1, 2, 3};
    VectorXd c = VectorXd::Zero(10);
    c[0] = c[1] = 1.0;
    EXPECT_EQ(precision_of(c, {true, true, true, true, false, false, false, false, false, false}), 1.0);
    const auto path = nested_path(10, {0, 1, 2, 3, 7});
    const auto curve = precision_curve(path, support);
    EXPECT_DOUBLE_EQ(curve.visited.at(5), 0.8);
    EXPECT_DOUBLE_EQ(curve.visited.at(4), 1.0);
    EXPECT_THROW(precision_curve(path, {}), DomainError);
}

TEST(Precision, FillRules)
{
    PrecisionCurve c;
    c.visited = {{3, 0.5}, {6, 0.25}};
    const auto f = c.filled(8);
    const std::vector<double> want{0.5, 0.5, 0.5, 0.5, 0.5, 0.25, 0.25, 0.25};
    EXPECT_EQ(f, want);
    EXPECT_EQ(PrecisionCurve{}.filled(3), std::vector<double>(3, 0.0));
}

TEST(Pauc, BoundsAndIdealOrdering)
{
    EXPECT_DOUBLE_EQ(pauc(std::vector<double>(50, 1.0)), 50.0);
    EXPECT_DOUBLE_EQ(pauc(std::vector<double>(50, 0.0)), 0.0);
    EXPECT_THROW(pauc(std::vector<double>(10, 1.0)), DimensionError);

    // signals first, then noise: precision 1 up to s, then s / size
    const Index s = 6;
    std::vector<Index> order(60);
    for (Index i = 0; i < 60; ++i) order[static_cast<std::size_t>(i)] = i;
    std::vector<Index> support(order.begin(), order.begin() + s);
    double oracle = 0.0;
    for (Index size = 1; size <= 50; ++size) oracle += size <= s ? 1.0 : static_cast<double>(s) / static_cast<double>(size);
    EXPECT_NEAR(pauc(precision_curve(nested_path(100, order), support)), oracle, 1e-10);

    // any other ordering scores no higher
    std::reverse(order.begin(), order.begin() + 20);
    EXPECT_LE(pauc(precision_curve(nested_path(100, order), support)), oracle);
}

TEST(Pauc, RandomOrderingPrecisionIsSignalFraction)
{
    const Index p = 200, s = 10;
    std::vector<Index> support;
    for (Index j = 0; j < s; ++j) support.push_back(j);
    Engine rng(9);
    double at20 = 0.0;
    const int reps = 4000;
    for (int r = 0; r < reps; ++r) {
        const auto perm = random_permutation(rng, p);
        std::vector<Index> order(perm.begin(), perm.begin() + 20);
        at20 += precision_curve(nested_path(p, order), support).visited.at(20);
    }
    at20 /= reps;
    // sd of one draw is about 0.05 here
    EXPECT_NEAR(at20, static_cast<double>(s) / static_cast<double>(p), 4.0 * 0.05 / std::sqrt(reps));
}

TEST(EstimationErrors, LoopOracle)
{
    const VectorXd a = random_vector(25, 10), b = random_vector(25, 11);
    double se = 0.0, ae = 0.0;
    for (Index j = 0; j < 25; ++j) {
        se += (a[j] - b[j]) * (a[j] - b[j]);
        ae += std::abs(a[j] - b[j]);
    }
    const auto e = estimation_errors(a, b);
    EXPECT_NEAR(e.se2, se, 1e-12);
    EXPECT_NEAR(e.ae, ae, 1e-12);
    EXPECT_THROW(estimation_errors(a, b.head(3)), DimensionError);
}

TEST(Aggregate, RatioOfMeans)
{
    std::vector<ReplicationRecord> recs{record("lasso", 0, 1.0, 2.0, 10), record("lasso", 1, 3.0, 2.0, 20),
                                        record("plmm", 0, 2.0, 4.0, 5), record("plmm", 1, 5.2, 3.2, 7)};
    const auto s = aggregate_replications(recs);
    ASSERT_EQ(s.rows.size(), 2u);
    const auto* lasso = s.find("s", "lasso");
    const auto* plmm = s.find("s", "plmm");
    EXPECT_DOUBLE_EQ(lasso->relative_mse, 1.0);
    EXPECT_DOUBLE_EQ(lasso->relative_mae, 1.0);
    EXPECT_NEAR(plmm->relative_mse, 1.8, 1e-12);
    EXPECT_NEAR(plmm->relative_mae, 1.8, 1e-12);
    EXPECT_DOUBLE_EQ(lasso->model_size, 15.0);
    EXPECT_THROW(aggregate_replications({}), DomainError);
}

TEST(Aggregate, SingleReplicationAndOrderIndependence)
{
    auto a = record("lasso", 0, 1.5, 2.5, 3);
    a.precision = std::vector<double>(50, 0.4);
    const auto s = aggregate_replications({a});
    EXPECT_DOUBLE_EQ(s.rows[0].mse, 1.5);
    EXPECT_DOUBLE_EQ(s.rows[0].precision_at_cv_size, 0.4);
    for (double q : s.rows[0].model_size_quantiles) EXPECT_DOUBLE_EQ(q, 3.0);

    std::vector<ReplicationRecord> recs{record("lasso", 2, 0.1, 0.3, 1), record("lasso", 0, 0.7, 0.2, 4),
                                        record("lasso", 1, 0.3, 0.9, 2)};
    const auto x = aggregate_replications(recs);
    std::reverse(recs.begin(), recs.end());
    const auto y = aggregate_replications(recs);
    EXPECT_EQ(x.rows[0].mse, y.rows[0].mse);

    auto big = record("lasso", 0, 1.0, 1.0, 80);
    big.precision = std::vector<double>(50, 1.0);
    EXPECT_TRUE(std::isnan(aggregate_replications({big}).rows[0].precision_at_cv_size));
}

TEST(Quantile, Type7)
{
    const std::vector<double> v{4.0, 1.0, 3.0, 2.0};
    EXPECT_DOUBLE_EQ(quantile(v, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(quantile(v, 1.0), 4.0);
    EXPECT_DOUBLE_EQ(quantile(v, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(quantile(v, 0.25), 1.75);
    EXPECT_TRUE(std::isnan(quantile({}, 0.5)));
}
