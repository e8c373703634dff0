#pragma once

// Feed-forward network with sigmoid units throughout, trained by mini-batch
// SGD on mean cross-entropy.

#include <Eigen/Dense>

#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "cshift/classifiers/logistic.hpp"
#include "cshift/classifiers/prob_classifier.hpp"
#include "cshift/rng.hpp"

namespace cshift {

namespace mlp {

/// Layer widths in -> hidden... -> 1, weights uniform in +-1/sqrt(fan_in).
inline std::vector<DenseLayer> initialize(std::size_t input_dim, const std::vector<int>& hidden,
                                          std::uint64_t seed) {
    Rng rng(seed, stream::coefficients);
    std::vector<DenseLayer> layers;
    auto fan_in = static_cast<Eigen::Index>(input_dim);
    std::vector<int> widths = hidden;
    widths.push_back(1);
    for (const int width : widths) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        DenseLayer layer{Eigen::MatrixXd(width, fan_in), Eigen::VectorXd(width)};
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = rng.uniform(-bound, bound);
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = rng.uniform(-bound, bound);
        layers.push_back(std::move(layer));
        fan_in = width;
    }
    return layers;
}

/// Mean cross-entropy over the rows of `x` and its gradient with respect to
/// every weight and bias (same shapes as `layers`).
inline std::pair<double, std::vector<DenseLayer>> loss_and_gradient(const std::vector<DenseLayer>& layers,
                                                                    const Eigen::MatrixXd& x,
                                                                    const Eigen::VectorXd& labels) {
    const auto batch = static_cast<double>(x.rows());
    std::vector<Eigen::MatrixXd> activations;
    activations.reserve(layers.size() + 1);
    activations.push_back(x.transpose());
    Eigen::RowVectorXd logits;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Eigen::MatrixXd pre = layers[l].weights * activations.back();
        pre.colwise() += layers[l].bias;
        if (l + 1 == layers.size()) logits = pre.row(0);
        activations.push_back(pre.unaryExpr([](double t) { return sigmoid(t); }));
    }

    double loss = 0.0;
    for (Eigen::Index i = 0; i < logits.size(); ++i) loss += softplus(logits(i)) - labels(i) * logits(i);
    loss /= batch;

    std::vector<DenseLayer> grads(layers.size());
    Eigen::MatrixXd delta = (activations.back().row(0) - labels.transpose()) / batch;
    for (std::size_t l = layers.size(); l-- > 0;) {
        grads[l].weights = delta * activations[l].transpose();
        grads[l].bias = delta.rowwise().sum();
        if (l > 0) {
            const Eigen::MatrixXd& a = activations[l];
            delta = (layers[l].weights.transpose() * delta).cwiseProduct(
                a.cwiseProduct((1.0 - a.array()).matrix()));
        }
    }
    return {loss, std::move(grads)};
}

}  // namespace mlp

/// Trains a sigmoid MLP. A non-finite loss restores the epoch's starting
/// weights, halves the learning rate and retries; the fourth failure throws
/// DivergenceError.
inline ProbClassifier fit_mlp(const Eigen::MatrixXd& features, const Eigen::VectorXd& labels,
                              const FitConfig& config = {}) {
    config.validate();
    if (config.hidden_layers.empty()) throw ConfigError("fit_mlp needs at least one hidden layer");
    logistic::check_labels(features, labels);

    auto transform = FeatureTransform::fit(features, false, config.standardize);
    const Eigen::MatrixXd z = transform.apply(features);
    const auto n = static_cast<std::size_t>(z.rows());

    auto layers = mlp::initialize(static_cast<std::size_t>(z.cols()), config.hidden_layers, config.seed);
    TrainDiagnostics diag;
    double learning_rate = config.learning_rate;

    std::vector<std::size_t> order(n);
    const auto batch_size = static_cast<std::size_t>(config.batch_size);
    Eigen::MatrixXd xb;
    Eigen::VectorXd yb;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto snapshot = layers;
        for (;;) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            Rng rng(config.seed, stream::shuffle, static_cast<std::uint64_t>(epoch));
            for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.integer(0, i - 1)]);

            double epoch_loss = 0.0;
            for (std::size_t start = 0; start < n; start += batch_size) {
                const std::size_t stop = std::min(n, start + batch_size);
                const auto rows = static_cast<Eigen::Index>(stop - start);
                xb.resize(rows, z.cols());
                yb.resize(rows);
                for (std::size_t i = start; i < stop; ++i) {
                    xb.row(static_cast<Eigen::Index>(i - start)) = z.row(static_cast<Eigen::Index>(order[i]));
                    yb(static_cast<Eigen::Index>(i - start)) = labels(static_cast<Eigen::Index>(order[i]));
                }
                auto [loss, grads] = mlp::loss_and_gradient(layers, xb, yb);
                epoch_loss += loss * static_cast<double>(rows);
                if (!std::isfinite(loss)) break;
                for (std::size_t l = 0; l < layers.size(); ++l) {
                    layers[l].weights -= learning_rate * grads[l].weights;
                    layers[l].bias -= learning_rate * grads[l].bias;
                }
            }
            bool finite = std::isfinite(epoch_loss);
            for (const auto& layer : layers) finite = finite && layer.weights.allFinite() && layer.bias.allFinite();
            if (finite) {
                diag.objective_trace.push_back(epoch_loss / static_cast<double>(n));
                break;
            }
            if (diag.learning_rate_halvings == 3) {
                throw DivergenceError("fit_mlp: non-finite loss after 3 learning-rate halvings");
            }
            ++diag.learning_rate_halvings;
            learning_rate *= 0.5;
            layers = snapshot;
        }
    }
    diag.iterations = config.epochs;
    diag.converged = true;
    diag.final_objective = mlp::loss_and_gradient(layers, z, labels).first;
    return ProbClassifier::network(std::move(transform), std::move(layers), std::move(diag));
}

}  // namespace cshift
