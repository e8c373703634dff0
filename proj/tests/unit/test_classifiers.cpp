#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "cshift/classifiers.hpp"
#include "cshift/simulation/lambda_scan.hpp"
#include "helpers.hpp"

using cshift::ClassifierKind;
using cshift::FitConfig;
using cshift::Rng;
using testing_support::gaussian_matrix;

namespace {

Eigen::VectorXd coin_flips(Eigen::Index n, Rng& rng) {
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = rng.uniform() < 0.5 ? 1.0 : 0.0;
    return y;
}

/// Coefficients on the raw feature scale (intercept dropped).
Eigen::VectorXd raw_slopes(const cshift::ProbClassifier& c) {
    const auto& t = c.transform();
    Eigen::VectorXd b = c.coefficients().tail(c.coefficients().size() - 1);
    if (t.standardize) b = b.cwiseQuotient(t.sds);
    return b;
}

}  // namespace

TEST(QuadraticExpansion, ColumnOrder) {
    Eigen::MatrixXd row(1, 2);
    row << 2.0, 3.0;
    Eigen::MatrixXd expected(1, 5);
    expected << 2.0, 3.0, 4.0, 9.0, 6.0;
    EXPECT_EQ(cshift::expand_quadratic(row), expected);

    Eigen::MatrixXd one(1, 1);
    one << -1.5;
    EXPECT_EQ(cshift::expand_quadratic(one).cols(), 2);
    EXPECT_EQ(cshift::expand_quadratic(one)(0, 1), 2.25);

    EXPECT_EQ(cshift::quadratic_width(5), 20u);
    EXPECT_EQ(cshift::expand_quadratic(Eigen::MatrixXd::Ones(3, 5)).cols(), 20);
}

TEST(Predict, ZeroCoefficientsGiveOneHalfAndLargeInterceptIsClamped) {
    const auto t = cshift::FeatureTransform::fit(Eigen::MatrixXd::Random(10, 3), false, false);
    const auto zero = cshift::ProbClassifier::logistic(ClassifierKind::LinearLogistic, t, Eigen::VectorXd::Zero(4), {});
    EXPECT_EQ(zero.predict_proba(Eigen::VectorXd::Constant(3, 7.0)), 0.5);

    Eigen::VectorXd big = Eigen::VectorXd::Zero(4);
    big(0) = 50.0;
    const auto sure = cshift::ProbClassifier::logistic(ClassifierKind::LinearLogistic, t, big, {});
    EXPECT_EQ(sure.predict_proba(Eigen::VectorXd::Zero(3)), 1.0 - 1e-6);
    EXPECT_THROW(sure.predict_proba(Eigen::VectorXd::Zero(2)), cshift::DataError);
}

TEST(Predict, QuadraticEqualsLinearOnExpandedFeatures) {
    Rng rng(3);
    const Eigen::MatrixXd x = gaussian_matrix(20, 2, rng);
    Eigen::VectorXd coef(6);
    coef << 0.3, -1.0, 0.5, 0.25, -0.75, 1.5;
    const auto ql = cshift::ProbClassifier::logistic(ClassifierKind::QuadraticLogistic,
                                                     cshift::FeatureTransform::fit(x, true, false), coef, {});
    const Eigen::MatrixXd z = cshift::expand_quadratic(x);
    const auto ll = cshift::ProbClassifier::logistic(ClassifierKind::LinearLogistic,
                                                     cshift::FeatureTransform::fit(z, false, false), coef, {});
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        EXPECT_DOUBLE_EQ(ql.predict_proba(x.row(i).transpose()), ll.predict_proba(z.row(i).transpose()));
    }
}

TEST(Logistic, SeparableDataIsFlagged) {
    Eigen::MatrixXd x(20, 1);
    Eigen::VectorXd y(20);
    for (int i = 0; i < 20; ++i) {
        x(i, 0) = i < 10 ? -1.0 - i : 1.0 + i;
        y(i) = i < 10 ? 0.0 : 1.0;
    }
    const auto c = cshift::fit_logistic(x, y, FitConfig{});
    EXPECT_TRUE(c.diagnostics().separation);
    EXPECT_TRUE(c.coefficients().allFinite());
    EXPECT_LT(c.predict_proba(Eigen::VectorXd::Constant(1, -5.0)), 0.5);
    EXPECT_GT(c.predict_proba(Eigen::VectorXd::Constant(1, 15.0)), 0.5);
}

TEST(Logistic, UninformativeLabelsGiveFlatFit) {
    Rng rng(11);
    const Eigen::Index n = 10000;
    const Eigen::MatrixXd x = gaussian_matrix(n, 1, rng);
    const Eigen::VectorXd y = coin_flips(n, rng);
    const auto c = cshift::fit_logistic(x, y, FitConfig{});
    const double se = 2.0 / std::sqrt(static_cast<double>(n));
    EXPECT_NEAR(c.coefficients()(0), 0.0, 3 * se);
    EXPECT_NEAR(c.coefficients()(1), 0.0, 3 * se);
    EXPECT_TRUE(c.diagnostics().converged);
}

TEST(Logistic, GaussianClassesRecoverTheMeanShiftDirection) {
    Rng rng(5);
    const Eigen::Index n = 10000;
    Eigen::VectorXd mu(5);
    mu << 1, 1, -1, -1, 0;
    Eigen::MatrixXd test = gaussian_matrix(n, 5, rng);
    test.rowwise() += mu.transpose();
    const auto [x, y] = cshift::stack_labeled(gaussian_matrix(n, 5, rng), test);
    const auto c = cshift::fit_logistic(x, y, FitConfig{});
    // Class 1 is the unshifted sample, so the slope points along -mu.
    const Eigen::VectorXd b = -raw_slopes(c);
    const double angle = std::acos(b.dot(mu) / (b.norm() * mu.norm())) * 180.0 / std::numbers::pi;
    EXPECT_LT(angle, 10.0);
}

TEST(Logistic, GradientVanishesAtTheOptimumAndMatchesFiniteDifferences) {
    Rng rng(21);
    const Eigen::MatrixXd z = gaussian_matrix(400, 3, rng);
    Eigen::VectorXd y(400);
    for (Eigen::Index i = 0; i < 400; ++i) y(i) = rng.uniform() < cshift::sigmoid(z(i, 0) - 0.5 * z(i, 2)) ? 1 : 0;
    FitConfig cfg;
    const auto c = cshift::fit_logistic(z, y, cfg);
    ASSERT_TRUE(c.diagnostics().converged);
    const Eigen::MatrixXd x = cshift::logistic::design(c.transform().apply(z));
    EXPECT_LT(cshift::logistic::gradient(x, y, c.coefficients()).cwiseAbs().maxCoeff(), 10 * cfg.tolerance);

    for (int trial = 0; trial < 5; ++trial) {
        Eigen::VectorXd beta(4);
        for (Eigen::Index j = 0; j < 4; ++j) beta(j) = rng.normal();
        const Eigen::VectorXd g = cshift::logistic::gradient(x, y, beta);
        for (Eigen::Index j = 0; j < 4; ++j) {
            const double h = 1e-5;
            Eigen::VectorXd up = beta, down = beta;
            up(j) += h;
            down(j) -= h;
            const double fd = (cshift::logistic::objective(x, y, up) - cshift::logistic::objective(x, y, down)) / (2 * h);
            EXPECT_NEAR(g(j), fd, 1e-5 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST(Logistic, ObjectiveNeverIncreases) {
    Rng rng(8);
    const Eigen::MatrixXd z = gaussian_matrix(300, 4, rng);
    const Eigen::VectorXd y = coin_flips(300, rng);
    const auto c = cshift::fit_logistic(z, y, FitConfig{});
    const auto& trace = c.diagnostics().objective_trace;
    ASSERT_GE(trace.size(), 2u);
    for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_LE(trace[i], trace[i - 1] + 1e-12);
}

TEST(Logistic, InputValidation) {
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(10, 2);
    EXPECT_THROW(cshift::fit_logistic(x, Eigen::VectorXd::Ones(10), FitConfig{}), cshift::DataError);
    Eigen::VectorXd bad = Eigen::VectorXd::Zero(10);
    bad(0) = 2.0;
    EXPECT_THROW(cshift::fit_logistic(x, bad, FitConfig{}), cshift::DataError);
    EXPECT_THROW(cshift::fit_logistic(x, Eigen::VectorXd::Zero(9), FitConfig{}), cshift::DataError);
    FitConfig cfg;
    cfg.tolerance = 0.0;
    EXPECT_THROW(cfg.validate(), cshift::ConfigError);
    cfg = FitConfig{};
    cfg.hidden_layers = {10, 0};
    EXPECT_THROW(cfg.validate(), cshift::ConfigError);
}

TEST(Sparse, ZeroPenaltyMatchesIrls) {
    Rng rng(4);
    const Eigen::MatrixXd z = gaussian_matrix(500, 4, rng);
    Eigen::VectorXd y(500);
    for (Eigen::Index i = 0; i < 500; ++i) y(i) = rng.uniform() < cshift::sigmoid(z(i, 1) + 0.3) ? 1 : 0;
    FitConfig cfg;
    cfg.tolerance = 1e-12;
    const auto dense = cshift::fit_logistic(z, y, cfg);
    const auto sparse = cshift::fit_sparse_logistic(z, y, 0.0, cfg);
    EXPECT_LT((dense.coefficients() - sparse.coefficients()).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Sparse, HugePenaltyZeroesEverySlopeAndObjectiveDecreases) {
    Rng rng(6);
    const Eigen::MatrixXd z = gaussian_matrix(200, 6, rng);
    Eigen::VectorXd y(200);
    for (Eigen::Index i = 0; i < 200; ++i) y(i) = rng.uniform() < cshift::sigmoid(2 * z(i, 0)) ? 1 : 0;
    const auto c = cshift::fit_sparse_logistic(z, y, 1e6, FitConfig{});
    for (Eigen::Index j = 1; j < c.coefficients().size(); ++j) EXPECT_EQ(c.coefficients()(j), 0.0);

    const auto moderate = cshift::fit_sparse_logistic(z, y, 5.0, FitConfig{});
    const auto& trace = moderate.diagnostics().objective_trace;
    for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_LE(trace[i], trace[i - 1] + 1e-12);
    EXPECT_NE(moderate.coefficients()(1), 0.0);
}

TEST(Sparse, ValidationScanRecoversTheSignalSupport) {
    Rng rng(2024);
    const Eigen::Index p = 500, n = 600;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    beta.head(5) << 1.5, -1.5, 1.5, -1.5, 1.5;
    auto draw = [&](Eigen::Index rows, Eigen::MatrixXd& x, Eigen::VectorXd& y) {
        x = gaussian_matrix(rows, p, rng);
        y.resize(rows);
        for (Eigen::Index i = 0; i < rows; ++i) y(i) = rng.uniform() < cshift::sigmoid(x.row(i).dot(beta)) ? 1 : 0;
    };
    Eigen::MatrixXd x, vx;
    Eigen::VectorXd y, vy;
    draw(n, x, y);
    draw(n, vx, vy);
    const std::vector<double> lambdas{120, 80, 50, 30, 20, 12};
    const auto scan = cshift::lambda_scan(x, y, vx, vy, lambdas, FitConfig{});
    const auto& best = scan.points[scan.best];
    for (std::size_t j = 0; j < 5; ++j) {
        EXPECT_NE(std::find(best.support.begin(), best.support.end(), j), best.support.end()) << "signal " << j;
    }
    EXPECT_LT(best.support.size(), 50u);
    // Supports grow as the penalty shrinks.
    for (std::size_t i = 1; i < scan.points.size(); ++i) {
        EXPECT_GE(scan.points[i].support.size() + 2, scan.points[i - 1].support.size());
    }
}

TEST(Mlp, BackpropMatchesFiniteDifferences) {
    Rng rng(9);
    const Eigen::MatrixXd x = gaussian_matrix(5, 3, rng);
    Eigen::VectorXd y(5);
    y << 1, 0, 1, 1, 0;
    auto layers = cshift::mlp::initialize(3, {4, 3}, 17);
    const auto [loss, grads] = cshift::mlp::loss_and_gradient(layers, x, y);
    EXPECT_GT(loss, 0.0);
    const double h = 1e-6;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        for (Eigen::Index r = 0; r < layers[l].weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layers[l].weights.cols(); ++c) {
                auto up = layers, down = layers;
                up[l].weights(r, c) += h;
                down[l].weights(r, c) -= h;
                const double fd = (cshift::mlp::loss_and_gradient(up, x, y).first -
                                   cshift::mlp::loss_and_gradient(down, x, y).first) / (2 * h);
                EXPECT_NEAR(grads[l].weights(r, c), fd, 1e-4 * std::max(std::abs(fd), 1e-3));
            }
            auto up = layers, down = layers;
            up[l].bias(r) += h;
            down[l].bias(r) -= h;
            const double fd = (cshift::mlp::loss_and_gradient(up, x, y).first -
                               cshift::mlp::loss_and_gradient(down, x, y).first) / (2 * h);
            EXPECT_NEAR(grads[l].bias(r), fd, 1e-4 * std::max(std::abs(fd), 1e-3));
        }
    }
}

TEST(Mlp, CoinFlipLabelsGiveProbabilitiesNearOneHalf) {
    Rng rng(13);
    const Eigen::MatrixXd x = gaussian_matrix(5000, 2, rng);
    const Eigen::VectorXd y = coin_flips(5000, rng);
    FitConfig cfg;
    cfg.epochs = 20;
    const auto c = cshift::fit_mlp(x, y, cfg);
    EXPECT_NEAR(c.predict_proba_rows(x).mean(), 0.5, 0.03);
}

TEST(Mlp, LearnsXor) {
    Rng rng(1);
    const Eigen::Index n = 400;
    Eigen::MatrixXd x(n, 2);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x(i, 0) = rng.uniform(-1, 1);
        x(i, 1) = rng.uniform(-1, 1);
        y(i) = (x(i, 0) > 0) != (x(i, 1) > 0) ? 1.0 : 0.0;
    }
    FitConfig cfg;
    cfg.epochs = 1000;
    const auto nn = cshift::fit_mlp(x, y, cfg);
    const Eigen::VectorXd p = nn.predict_proba_rows(x);
    double correct = 0;
    for (Eigen::Index i = 0; i < n; ++i) correct += (p(i) > 0.5) == (y(i) == 1.0);
    EXPECT_GT(correct / n, 0.9);

    const auto ll = cshift::fit_logistic(x, y, FitConfig{});
    const Eigen::VectorXd q = ll.predict_proba_rows(x);
    double ll_correct = 0;
    for (Eigen::Index i = 0; i < n; ++i) ll_correct += (q(i) > 0.5) == (y(i) == 1.0);
    EXPECT_LT(ll_correct / n, 0.7);
}

TEST(Mlp, SameSeedSameParameters) {
    Rng rng(2);
    const Eigen::MatrixXd x = gaussian_matrix(200, 3, rng);
    const Eigen::VectorXd y = coin_flips(200, rng);
    FitConfig cfg;
    cfg.epochs = 10;
    cfg.seed = 77;
    const auto a = cshift::fit_mlp(x, y, cfg);
    const auto b = cshift::fit_mlp(x, y, cfg);
    ASSERT_EQ(a.layers().size(), b.layers().size());
    for (std::size_t l = 0; l < a.layers().size(); ++l) {
        EXPECT_EQ(a.layers()[l].weights, b.layers()[l].weights);
        EXPECT_EQ(a.layers()[l].bias, b.layers()[l].bias);
    }
    cfg.seed = 78;
    EXPECT_NE(cshift::fit_mlp(x, y, cfg).layers()[0].weights, a.layers()[0].weights);
}

TEST(Mlp, DivergingLearningRateFailsAfterThreeHalvings) {
    Rng rng(2);
    const Eigen::MatrixXd x = gaussian_matrix(200, 2, rng);
    const Eigen::VectorXd y = coin_flips(200, rng);
    FitConfig cfg;
    cfg.learning_rate = 1.7e308;
    cfg.epochs = 3;
    EXPECT_THROW(cshift::fit_mlp(x, y, cfg), cshift::DivergenceError);
}

TEST(Classifiers, PredictionsStayInsideTheClamp) {
    Rng rng(31);
    const Eigen::MatrixXd x = gaussian_matrix(300, 3, rng);
    Eigen::VectorXd y(300);
    for (Eigen::Index i = 0; i < 300; ++i) y(i) = x(i, 0) > 0 ? 1 : 0;  // separable
    FitConfig cfg;
    cfg.epochs = 30;
    for (const auto kind : {ClassifierKind::LinearLogistic, ClassifierKind::QuadraticLogistic,
                            ClassifierKind::NeuralNet, ClassifierKind::SparseLogistic}) {
        const auto c = cshift::fit_classifier(kind, x, y, cfg);
        const Eigen::MatrixXd probe = gaussian_matrix(500, 3, rng) * 1e3;
        const Eigen::VectorXd p = c.predict_proba_rows(probe);
        EXPECT_GE(p.minCoeff(), 1e-6) << cshift::to_string(kind);
        EXPECT_LE(p.maxCoeff(), 1.0 - 1e-6) << cshift::to_string(kind);
    }
}

TEST(Classifiers, JsonCarriesTransformAndDiagnostics) {
    Rng rng(3);
    const Eigen::MatrixXd x = gaussian_matrix(100, 2, rng);
    const Eigen::VectorXd y = coin_flips(100, rng);
    const auto ql = cshift::to_json(cshift::fit_quadratic_logistic(x, y, FitConfig{}));
    EXPECT_EQ(ql["kind"], "ql");
    EXPECT_EQ(ql["transform"]["expansion"], "quadratic");
    EXPECT_EQ(ql["coefficients"].size(), 6u);
    EXPECT_TRUE(ql["diagnostics"].contains("converged"));
    FitConfig cfg;
    cfg.epochs = 2;
    const auto nn = cshift::to_json(cshift::fit_mlp(x, y, cfg));
    EXPECT_EQ(nn["layers"].size(), 2u);
}
