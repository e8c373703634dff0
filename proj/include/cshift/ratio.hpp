#pragma once

// Density ratios from probabilistic classifiers.
//
//   g(x)   = f_{2,X}(x) / f_{1,X}(x)      marginal ratio, weights
//   V(x,y) = f_1(y|x) / f_2(y|x)          conditional ratio, scores
//
// Both are only needed up to a positive constant: weights are normalized
// within each minibatch and scores enter only through order comparisons.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>

#include "cshift/classifiers.hpp"
#include "cshift/dataset.hpp"
#include "cshift/error.hpp"
#include "cshift/models.hpp"

namespace cshift {

inline constexpr double ratio_clip_lo = 0.01;
inline constexpr double ratio_clip_hi = 100.0;

inline double clip_ratio(double value, double lo = ratio_clip_lo, double hi = ratio_clip_hi) {
    if (!(lo > 0.0) || !(lo < hi)) throw ConfigError("clip_ratio: need 0 < lo < hi");
    return std::min(hi, std::max(lo, value));
}

enum class RatioSource { Classifier, Oracle, ConstantOne };

inline const char* to_string(RatioSource s) {
    switch (s) {
        case RatioSource::Classifier: return "classifier";
        case RatioSource::Oracle: return "oracle";
        case RatioSource::ConstantOne: return "constant-one";
    }
    return "?";
}

/// Row-wise marginal ratio: n x p features -> n values.
using MarginalRatioFn = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;
/// Row-wise conditional ratio: (n x p features, n responses) -> n values.
using ConditionalRatioFn = std::function<Eigen::VectorXd(const Eigen::MatrixXd&, const Eigen::VectorXd&)>;

struct MarginalRatio {
    MarginalRatioFn fn;
    RatioSource source = RatioSource::ConstantOne;
    std::string label;  // e.g. "ll", "oracle:A", "constant-one"
    std::shared_ptr<const ProbClassifier> classifier;

    Eigen::VectorXd operator()(const Eigen::MatrixXd& x) const { return fn(x); }
    double at(const Eigen::VectorXd& x) const { return fn(x.transpose())(0); }
};

struct RatioModel {
    MarginalRatio g_hat;
    ConditionalRatioFn v_hat;
    RatioSource v_source = RatioSource::Classifier;
    std::string v_label;
    std::shared_ptr<const ProbClassifier> joint_classifier;

    Eigen::VectorXd g(const Eigen::MatrixXd& x) const { return g_hat(x); }
    Eigen::VectorXd v(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) const { return v_hat(x, y); }
    double g_at(const Eigen::VectorXd& x) const { return g_hat.at(x); }
    double v_at(const Eigen::VectorXd& x, double y) const {
        return v_hat(x.transpose(), Eigen::VectorXd::Constant(1, y))(0);
    }
};

inline MarginalRatio constant_one_ratio() {
    return {[](const Eigen::MatrixXd& x) -> Eigen::VectorXd { return Eigen::VectorXd::Ones(x.rows()); },
            RatioSource::ConstantOne, "constant-one", nullptr};
}

/// Odds (1 - eta) / eta of a train(1)-vs-test(0) classifier.
inline Eigen::VectorXd inverse_odds(const ProbClassifier& c, const Eigen::MatrixXd& x) {
    const Eigen::VectorXd eta = c.predict_proba_rows(x);
    return ((1.0 - eta.array()) / eta.array()).matrix();
}

/// Odds eta / (1 - eta).
inline Eigen::VectorXd odds(const ProbClassifier& c, const Eigen::MatrixXd& x) {
    const Eigen::VectorXd eta = c.predict_proba_rows(x);
    return (eta.array() / (1.0 - eta.array())).matrix();
}

/// Joint feature rows (x, y).
inline Eigen::MatrixXd joint_rows(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (x.rows() != y.size()) throw DataError("joint_rows: feature/response length mismatch");
    Eigen::MatrixXd z(x.rows(), x.cols() + 1);
    z << x, y;
    return z;
}

/// V_hat(x,y) = joint_odds(x,y) * g(x) with the same g used for the weights.
inline RatioModel compose_ratio(std::shared_ptr<const ProbClassifier> joint, MarginalRatio g) {
    if (!joint) throw ConfigError("compose_ratio: joint classifier missing");
    RatioModel model;
    const MarginalRatioFn g_fn = g.fn;
    model.v_hat = [joint, g_fn](const Eigen::MatrixXd& x, const Eigen::VectorXd& y) -> Eigen::VectorXd {
        return (odds(*joint, joint_rows(x, y)).array() * g_fn(x).array()).matrix();
    };
    model.v_source = RatioSource::Classifier;
    model.v_label = to_string(joint->kind());
    model.joint_classifier = std::move(joint);
    model.g_hat = std::move(g);
    return model;
}

/// g_hat from a classifier on X with training rows labeled 1 and test rows 0.
inline MarginalRatio estimate_marginal_ratio(const LabeledSample& fit_train, const LabeledSample& fit_test,
                                             ClassifierKind kind, const FitConfig& config) {
    if (fit_train.size() == 0 || fit_test.size() == 0) {
        throw ConfigError("marginal ratio: both fitting subsamples must be non-empty");
    }
    auto [x, labels] = stack_labeled(fit_train.features, fit_test.features);
    std::shared_ptr<const ProbClassifier> c;
    try {
        c = std::make_shared<const ProbClassifier>(fit_classifier(kind, x, labels, config));
    } catch (const Error& e) {
        rethrow_with_context(e, "marginal ratio fit");
    }
    MarginalRatio out;
    out.fn = [c](const Eigen::MatrixXd& rows) { return inverse_odds(*c, rows); };
    out.source = RatioSource::Classifier;
    out.label = to_string(kind);
    out.classifier = std::move(c);
    return out;
}

/// v_hat(x,y) = joint_odds(x,y) * g_hat(x), where joint_odds comes from a
/// classifier on (x, y) with training rows labeled 1.
inline RatioModel estimate_conditional_ratio(const LabeledSample& fit_train, const LabeledSample& fit_test,
                                             ClassifierKind kind, const FitConfig& config, MarginalRatio g_hat) {
    if (fit_train.size() == 0 || fit_test.size() == 0) {
        throw ConfigError("conditional ratio: both fitting subsamples must be non-empty");
    }
    if (!g_hat.fn) throw ConfigError("conditional ratio: marginal ratio missing");
    auto [z, labels] = stack_labeled(fit_train.joint(), fit_test.joint());
    std::shared_ptr<const ProbClassifier> c;
    try {
        c = std::make_shared<const ProbClassifier>(fit_classifier(kind, z, labels, config));
    } catch (const Error& e) {
        rethrow_with_context(e, "conditional ratio fit");
    }
    return compose_ratio(std::move(c), std::move(g_hat));
}

/// Exact marginal ratio of a simulation model.
inline MarginalRatio oracle_marginal_ratio(const ModelSpec& spec) {
    MarginalRatio out;
    out.fn = [spec](const Eigen::MatrixXd& x) -> Eigen::VectorXd {
        Eigen::VectorXd r(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) r(i) = std::exp(spec.log_marginal_ratio(x.row(i).transpose()));
        return r;
    };
    out.source = RatioSource::Oracle;
    out.label = std::string("oracle:") + to_string(spec.model);
    return out;
}

/// Exact g and V of a simulation model.
inline RatioModel oracle_ratio(const ModelSpec& spec) {
    RatioModel model;
    model.g_hat = oracle_marginal_ratio(spec);
    model.v_hat = [spec](const Eigen::MatrixXd& x, const Eigen::VectorXd& y) -> Eigen::VectorXd {
        if (x.rows() != y.size()) throw DataError("oracle ratio: feature/response length mismatch");
        Eigen::VectorXd r(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) r(i) = std::exp(spec.log_conditional_ratio(x.row(i).transpose(), y(i)));
        return r;
    };
    model.v_source = RatioSource::Oracle;
    model.v_label = std::string("oracle:") + to_string(spec.model) + "/" + to_string(spec.hypothesis);
    return model;
}

/// Replaces the weights of `model` while keeping its scores.
inline RatioModel with_marginal(RatioModel model, MarginalRatio g) {
    model.g_hat = std::move(g);
    return model;
}

/// Raises g to `exponent`. With exponent 2 this squares the classifier odds,
/// pushing probabilities toward 0 or 1: a deliberately miscalibrated weight.
inline MarginalRatio miscalibrate(MarginalRatio g, double exponent) {
    const MarginalRatioFn inner = g.fn;
    g.fn = [inner, exponent](const Eigen::MatrixXd& x) -> Eigen::VectorXd {
        return inner(x).array().pow(exponent).matrix();
    };
    g.label += "^" + std::to_string(exponent);
    return g;
}

}  // namespace cshift
