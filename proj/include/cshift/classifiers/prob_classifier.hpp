#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "cshift/classifiers/transform.hpp"
#include "cshift/error.hpp"

namespace cshift {

enum class ClassifierKind { LinearLogistic, QuadraticLogistic, NeuralNet, SparseLogistic, Precomputed };

inline const char* to_string(ClassifierKind k) {
    switch (k) {
        case ClassifierKind::LinearLogistic: return "ll";
        case ClassifierKind::QuadraticLogistic: return "ql";
        case ClassifierKind::NeuralNet: return "nn";
        case ClassifierKind::SparseLogistic: return "sparse-ll";
        case ClassifierKind::Precomputed: return "precomputed";
    }
    return "?";
}

inline ClassifierKind parse_classifier_kind(const std::string& name) {
    if (name == "ll") return ClassifierKind::LinearLogistic;
    if (name == "ql") return ClassifierKind::QuadraticLogistic;
    if (name == "nn") return ClassifierKind::NeuralNet;
    if (name == "sparse-ll") return ClassifierKind::SparseLogistic;
    throw ConfigError("unknown estimator '" + name + "' (valid: ll, ql, nn, sparse-ll)");
}

/// Optimizer settings shared by all classifier kinds.
struct FitConfig {
    int max_iterations = 0;  // 0 selects the solver default (IRLS 100, proximal 20000)
    double tolerance = 1e-8;
    double l1_lambda = 0.0;
    std::vector<int> hidden_layers{10};
    double learning_rate = 0.1;
    int epochs = 200;
    int batch_size = 32;
    bool standardize = true;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(tolerance > 0.0)) throw ConfigError("tolerance must be > 0");
        if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
        if (!(l1_lambda >= 0.0)) throw ConfigError("l1_lambda must be >= 0");
        if (epochs < 1 || batch_size < 1) throw ConfigError("epochs and batch_size must be >= 1");
        for (const int w : hidden_layers) {
            if (w < 1) throw ConfigError("hidden layer widths must be >= 1");
        }
    }
};

struct TrainDiagnostics {
    int iterations = 0;
    double final_objective = 0.0;
    bool converged = false;
    bool separation = false;
    bool ridge_jitter = false;
    int learning_rate_halvings = 0;
    std::vector<double> objective_trace;
    std::vector<std::string> warnings;
};

struct DenseLayer {
    Eigen::MatrixXd weights;  // out x in
    Eigen::VectorXd bias;     // out
};

/// Probability clamp applied to every prediction.
inline constexpr double probability_floor = 1e-6;

inline double clamp_probability(double p) {
    return std::clamp(p, probability_floor, 1.0 - probability_floor);
}

inline double sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

/// log(1 + exp(t)) without overflow.
inline double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

/// A fitted binary classifier returning P(class 1 | x).
///
/// Immutable once built. Predictions apply the stored transform, evaluate the
/// model and clamp to [1e-6, 1 - 1e-6].
class ProbClassifier {
public:
    using ProbabilityFn = std::function<double(const Eigen::VectorXd&)>;

    static ProbClassifier logistic(ClassifierKind kind, FeatureTransform transform,
                                   Eigen::VectorXd coefficients, TrainDiagnostics diagnostics) {
        ProbClassifier c;
        c.kind_ = kind;
        c.transform_ = std::move(transform);
        c.coefficients_ = std::move(coefficients);
        c.diagnostics_ = std::move(diagnostics);
        if (static_cast<std::size_t>(c.coefficients_.size()) != c.transform_.output_dim() + 1) {
            throw ConfigError("coefficient vector does not match transform width");
        }
        return c;
    }

    static ProbClassifier network(FeatureTransform transform, std::vector<DenseLayer> layers,
                                  TrainDiagnostics diagnostics) {
        ProbClassifier c;
        c.kind_ = ClassifierKind::NeuralNet;
        c.transform_ = std::move(transform);
        c.layers_ = std::move(layers);
        c.diagnostics_ = std::move(diagnostics);
        return c;
    }

    /// Wraps externally computed probabilities, e.g. from a model trained
    /// outside this library.
    static ProbClassifier precomputed(std::size_t input_dim, ProbabilityFn fn) {
        ProbClassifier c;
        c.kind_ = ClassifierKind::Precomputed;
        c.transform_.input_dim = input_dim;
        c.external_ = std::make_shared<const ProbabilityFn>(std::move(fn));
        return c;
    }

    ClassifierKind kind() const { return kind_; }
    const FeatureTransform& transform() const { return transform_; }
    const Eigen::VectorXd& coefficients() const { return coefficients_; }
    const std::vector<DenseLayer>& layers() const { return layers_; }
    const TrainDiagnostics& diagnostics() const { return diagnostics_; }
    std::size_t input_dim() const { return transform_.input_dim; }

    double predict_proba(const Eigen::VectorXd& x) const {
        if (static_cast<std::size_t>(x.size()) != transform_.input_dim) {
            throw DataError("predict_proba: expected " + std::to_string(transform_.input_dim) +
                            " features, got " + std::to_string(x.size()));
        }
        if (kind_ == ClassifierKind::Precomputed) return clamp_probability((*external_)(x));
        return predict_proba_rows(x.transpose())(0);
    }

    /// Row-wise predictions for an n x p matrix of raw features.
    Eigen::VectorXd predict_proba_rows(const Eigen::MatrixXd& x) const {
        if (kind_ == ClassifierKind::Precomputed) {
            Eigen::VectorXd out(x.rows());
            for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = predict_proba(x.row(i).transpose());
            return out;
        }
        const Eigen::MatrixXd z = transform_.apply(x);
        Eigen::VectorXd out(z.rows());
        if (kind_ == ClassifierKind::NeuralNet) {
            Eigen::MatrixXd a = z.transpose();
            for (const auto& layer : layers_) {
                Eigen::MatrixXd pre = layer.weights * a;
                pre.colwise() += layer.bias;
                a = pre.unaryExpr([](double t) { return sigmoid(t); });
            }
            for (Eigen::Index i = 0; i < z.rows(); ++i) out(i) = clamp_probability(a(0, i));
            return out;
        }
        const Eigen::VectorXd linear =
            (z * coefficients_.tail(coefficients_.size() - 1)).array() + coefficients_(0);
        for (Eigen::Index i = 0; i < z.rows(); ++i) out(i) = clamp_probability(sigmoid(linear(i)));
        return out;
    }

private:
    ProbClassifier() = default;

    ClassifierKind kind_ = ClassifierKind::LinearLogistic;
    FeatureTransform transform_;
    Eigen::VectorXd coefficients_;
    std::vector<DenseLayer> layers_;
    TrainDiagnostics diagnostics_;
    std::shared_ptr<const ProbabilityFn> external_;
};

namespace detail {

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline std::vector<std::vector<double>> to_std(const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) rows[static_cast<std::size_t>(i)] = to_std(Eigen::VectorXd(m.row(i).transpose()));
    return rows;
}

}  // namespace detail

inline nlohmann::json to_json(const TrainDiagnostics& d) {
    return {{"iterations", d.iterations},
            {"final_objective", d.final_objective},
            {"converged", d.converged},
            {"separation", d.separation},
            {"ridge_jitter", d.ridge_jitter},
            {"learning_rate_halvings", d.learning_rate_halvings},
            {"warnings", d.warnings}};
}

inline nlohmann::json to_json(const ProbClassifier& c) {
    const auto& t = c.transform();
    nlohmann::json j;
    j["kind"] = to_string(c.kind());
    j["transform"] = {{"input_dim", t.input_dim},
                      {"means", detail::to_std(t.means)},
                      {"sds", detail::to_std(t.sds)},
                      {"expansion", t.quadratic ? "quadratic" : "identity"}};
    if (c.kind() == ClassifierKind::NeuralNet) {
        j["layers"] = nlohmann::json::array();
        for (const auto& layer : c.layers()) {
            j["layers"].push_back({{"weights", detail::to_std(layer.weights)},
                                   {"bias", detail::to_std(layer.bias)}});
        }
    } else if (c.kind() != ClassifierKind::Precomputed) {
        j["coefficients"] = detail::to_std(c.coefficients());
    }
    j["diagnostics"] = to_json(c.diagnostics());
    return j;
}

}  // namespace cshift
