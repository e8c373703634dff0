#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "cshift/ratio.hpp"
#include "cshift/simulation/generate.hpp"
#include "helpers.hpp"

using cshift::ClassifierKind;
using cshift::FitConfig;
using cshift::Hypothesis;
using cshift::Model;
using cshift::ModelSpec;
using cshift::Rng;

namespace {

cshift::MarginalRatio constant_probability_ratio(double eta, std::size_t dim) {
    auto c = std::make_shared<const cshift::ProbClassifier>(
        cshift::ProbClassifier::precomputed(dim, [eta](const Eigen::VectorXd&) { return eta; }));
    cshift::MarginalRatio g;
    g.fn = [c](const Eigen::MatrixXd& x) { return cshift::inverse_odds(*c, x); };
    g.source = cshift::RatioSource::Classifier;
    g.classifier = c;
    return g;
}

ModelSpec unfiltered(Model model, Hypothesis h, std::size_t p = 5) {
    ModelSpec s = ModelSpec::make(model, h, 1, p);
    s.filter = false;
    return s;
}

}  // namespace

TEST(ClipRatio, Endpoints) {
    EXPECT_EQ(cshift::clip_ratio(0.001), 0.01);
    EXPECT_EQ(cshift::clip_ratio(50.0), 50.0);
    EXPECT_EQ(cshift::clip_ratio(1e6), 100.0);
    EXPECT_EQ(cshift::clip_ratio(5.0, 1.0, 2.0), 2.0);
    EXPECT_THROW(cshift::clip_ratio(1.0, 2.0, 1.0), cshift::ConfigError);
    EXPECT_THROW(cshift::clip_ratio(1.0, 0.0, 1.0), cshift::ConfigError);
}

TEST(MarginalRatio, OddsFormula) {
    const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(3, 2);
    EXPECT_EQ(constant_probability_ratio(0.5, 2)(x), Eigen::VectorXd::Ones(3));
    EXPECT_DOUBLE_EQ(constant_probability_ratio(0.8, 2)(x)(0), 0.25);
}

TEST(ConditionalRatio, UninformativeJointAndUnitMarginalGiveOne) {
    Rng rng(1);
    cshift::LabeledSample a, b;
    a.features = testing_support::gaussian_matrix(4000, 2, rng);
    a.response = testing_support::gaussian_matrix(4000, 1, rng).col(0);
    b.features = testing_support::gaussian_matrix(4000, 2, rng);
    b.response = testing_support::gaussian_matrix(4000, 1, rng).col(0);
    const auto model = cshift::estimate_conditional_ratio(a, b, ClassifierKind::LinearLogistic, FitConfig{},
                                                          cshift::constant_one_ratio());
    const Eigen::VectorXd v = model.v(a.features.topRows(50), a.response.head(50));
    EXPECT_LT((v.array() - 1.0).abs().maxCoeff(), 0.25);
}

TEST(MarginalRatio, ModelAOriginValue) {
    const ModelSpec spec = unfiltered(Model::A, Hypothesis::Null);
    const auto data = cshift::generate(spec, 10000, 10000, 3);
    const auto g = cshift::estimate_marginal_ratio(data.train, data.test, ClassifierKind::LinearLogistic, FitConfig{});
    const double truth = std::exp(-2.0);
    EXPECT_NEAR(g.at(Eigen::VectorXd::Zero(5)), truth, 0.3 * truth);

    // Ranks agree with the oracle on fresh points.
    const auto holdout = cshift::generate(spec, 2000, 1, 4);
    const Eigen::VectorXd est = g(holdout.train.features);
    const Eigen::VectorXd exact = data.oracle.g(holdout.train.features);
    EXPECT_GT(testing_support::rank_correlation(est, exact), 0.95);
}

TEST(ConditionalRatio, ModelANullIsNearlyConstant) {
    const ModelSpec spec = unfiltered(Model::A, Hypothesis::Null);
    const auto data = cshift::generate(spec, 10000, 10000, 5);
    const auto g = cshift::estimate_marginal_ratio(data.train, data.test, ClassifierKind::LinearLogistic, FitConfig{});
    const auto model = cshift::estimate_conditional_ratio(data.train, data.test, ClassifierKind::LinearLogistic,
                                                          FitConfig{}, g);
    const auto grid = cshift::generate(spec, 1000, 1, 6).train;
    const Eigen::VectorXd v = model.v(grid.features, grid.response);
    std::vector<double> values(v.data(), v.data() + v.size());
    std::nth_element(values.begin(), values.begin() + values.size() / 2, values.end());
    const double c = values[values.size() / 2];
    std::vector<double> dev;
    for (Eigen::Index i = 0; i < v.size(); ++i) dev.push_back(std::abs(v(i) - c) / c);
    std::nth_element(dev.begin(), dev.begin() + dev.size() / 2, dev.end());
    EXPECT_LT(dev[dev.size() / 2], 0.2);
}

TEST(ConditionalRatio, ModelAAltCrossingPoint) {
    const ModelSpec spec = unfiltered(Model::A, Hypothesis::Alt);
    const auto data = cshift::generate(spec, 10000, 10000, 7);
    const auto g = cshift::estimate_marginal_ratio(data.train, data.test, ClassifierKind::LinearLogistic, FitConfig{});
    const auto model = cshift::estimate_conditional_ratio(data.train, data.test, ClassifierKind::LinearLogistic,
                                                          FitConfig{}, g);
    const Eigen::VectorXd origin = Eigen::VectorXd::Zero(5);
    EXPECT_DOUBLE_EQ(data.oracle.v_at(origin, 0.25), 1.0);
    EXPECT_NEAR(model.v_at(origin, 0.25), 1.0, 0.3);
}

TEST(ConditionalRatio, CompositionIsExact) {
    const ModelSpec spec = ModelSpec::make(Model::C, Hypothesis::Alt, 2);
    const auto data = cshift::generate(spec, 600, 600, 8);
    const auto g = cshift::estimate_marginal_ratio(data.train, data.test, ClassifierKind::QuadraticLogistic, FitConfig{});
    const auto model = cshift::estimate_conditional_ratio(data.train, data.test, ClassifierKind::QuadraticLogistic,
                                                          FitConfig{}, g);
    Rng rng(9);
    const Eigen::MatrixXd x = testing_support::gaussian_matrix(200, 5, rng) * 3.0;
    const Eigen::VectorXd y = testing_support::gaussian_matrix(200, 1, rng).col(0) * 5.0;
    const Eigen::VectorXd joint = cshift::odds(*model.joint_classifier, cshift::joint_rows(x, y));
    const Eigen::VectorXd expected = (joint.array() * g(x).array()).matrix();
    EXPECT_EQ(model.v(x, y), expected);
}

TEST(Ratios, PositiveOnWildInputsAndClipped) {
    const ModelSpec spec = ModelSpec::make(Model::A, Hypothesis::Alt, 3);
    const auto data = cshift::generate(spec, 500, 500, 10);
    const auto g = cshift::estimate_marginal_ratio(data.train, data.test, ClassifierKind::LinearLogistic, FitConfig{});
    const auto model = cshift::estimate_conditional_ratio(data.train, data.test, ClassifierKind::LinearLogistic,
                                                          FitConfig{}, g);
    Rng rng(11);
    const Eigen::MatrixXd x = testing_support::gaussian_matrix(100000, 5, rng) * 50.0;
    const Eigen::VectorXd y = testing_support::gaussian_matrix(100000, 1, rng).col(0) * 500.0;
    const Eigen::VectorXd gv = g(x), vv = model.v(x, y);
    for (Eigen::Index i = 0; i < gv.size(); ++i) {
        ASSERT_TRUE(std::isfinite(gv(i)) && gv(i) > 0.0);
        ASSERT_TRUE(std::isfinite(vv(i)) && vv(i) > 0.0);
        const double c = cshift::clip_ratio(gv(i));
        ASSERT_TRUE(c >= 0.01 && c <= 100.0);
    }
}

TEST(Oracle, ClosedFormValues) {
    const auto a = cshift::oracle_ratio(unfiltered(Model::A, Hypothesis::Null));
    EXPECT_NEAR(a.g_at(Eigen::VectorXd::Zero(5)), 0.135335283236612692, 1e-15);
    Rng rng(12);
    for (int i = 0; i < 100; ++i) {
        Eigen::VectorXd x(5);
        for (int j = 0; j < 5; ++j) x(j) = 3 * rng.normal();
        EXPECT_EQ(a.v_at(x, 10 * rng.normal()), 1.0);
    }
    for (const std::size_t p : {1u, 3u, 5u, 8u}) {
        const auto d = cshift::oracle_ratio(unfiltered(Model::D, Hypothesis::Alt, p));
        EXPECT_NEAR(d.g_at(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p))), std::pow(2.0, -0.5 * p), 1e-15);
    }
    EXPECT_NEAR(cshift::oracle_ratio(unfiltered(Model::D, Hypothesis::Alt)).g_at(Eigen::VectorXd::Zero(5)),
                0.176776695296636881, 1e-15);
}

TEST(Oracle, ModelCUsesThePrecisionWeightedShift) {
    const ModelSpec spec = unfiltered(Model::C, Hypothesis::Null);
    const Eigen::VectorXd w = spec.sigma.ldlt().solve(spec.mu);
    Eigen::VectorXd x(5);
    x << 0.3, -1.2, 0.5, 2.0, -0.7;
    EXPECT_NEAR(std::log(cshift::oracle_ratio(spec).g_at(x)), w.dot(x) - 0.5 * w.dot(spec.mu), 1e-12);
}

TEST(Oracle, MarginalRatioHasUnitMeanUnderTraining) {
    for (const auto model : {Model::A, Model::B, Model::C, Model::D}) {
        const ModelSpec spec = unfiltered(model, Hypothesis::Alt);
        const auto data = cshift::generate(spec, 100000, 1, 13);
        const Eigen::VectorXd g = data.oracle.g(data.train.features);
        const double mean = g.mean();
        const double se = std::sqrt((g.array() - mean).square().sum() / (g.size() - 1.0) / g.size());
        EXPECT_NEAR(mean, 1.0, 3 * se) << cshift::to_string(model);

        const Eigen::VectorXd inv_v = data.oracle.v(data.train.features, data.train.response).cwiseInverse();
        const double vm = inv_v.mean();
        const double vse = std::sqrt((inv_v.array() - vm).square().sum() / (inv_v.size() - 1.0) / inv_v.size());
        EXPECT_NEAR(vm, 1.0, 3 * vse) << cshift::to_string(model);
    }
}

TEST(Oracle, UnknownModelName) {
    EXPECT_THROW(cshift::parse_model("E"), cshift::ConfigError);
    try {
        cshift::parse_model("E");
    } catch (const cshift::ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("A, B, C, D"), std::string::npos);
    }
}

TEST(Miscalibrate, SquaresTheOdds) {
    const auto g = cshift::miscalibrate(constant_probability_ratio(0.8, 1), 2.0);
    EXPECT_DOUBLE_EQ(g(Eigen::MatrixXd::Zero(1, 1))(0), 0.0625);
}
