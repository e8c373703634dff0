#pragma once

// L1-penalized logistic regression by monotone accelerated proximal
// gradient (MFISTA) with backtracking on the Lipschitz constant.
//
// Objective (per-sample scale): mean NLL + (lambda / n) * ||beta_{1:q}||_1,
// which has the same minimizer as the summed form NLL + lambda ||beta||_1.
// The intercept is not penalized.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "cshift/classifiers/logistic.hpp"
#include "cshift/classifiers/prob_classifier.hpp"

namespace cshift {

namespace sparse {

inline double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

inline double penalty(const Eigen::VectorXd& beta, double weight) {
    return weight * beta.tail(beta.size() - 1).cwiseAbs().sum();
}

inline Eigen::VectorXd prox(const Eigen::VectorXd& v, double threshold) {
    Eigen::VectorXd out = v;
    for (Eigen::Index j = 1; j < v.size(); ++j) out(j) = soft_threshold(v(j), threshold);
    return out;
}

/// Solves the penalized problem on a design with intercept column.
inline Eigen::VectorXd solve(const Eigen::MatrixXd& x, const Eigen::VectorXd& labels, double lambda,
                             const FitConfig& config, TrainDiagnostics& diag,
                             Eigen::VectorXd start = {}) {
    const int max_iter = config.max_iterations > 0 ? config.max_iterations : 20000;
    const double weight = lambda / static_cast<double>(x.rows());

    Eigen::VectorXd current = start.size() == x.cols() ? start : Eigen::VectorXd::Zero(x.cols());
    double current_obj = logistic::objective(x, labels, current) + penalty(current, weight);
    diag.objective_trace.push_back(current_obj);

    Eigen::VectorXd extrapolated = current;
    double momentum = 1.0;
    double lipschitz = 0.25;

    for (int it = 1; it <= max_iter; ++it) {
        const double smooth_at = logistic::objective(x, labels, extrapolated);
        const Eigen::VectorXd grad = logistic::gradient(x, labels, extrapolated);

        Eigen::VectorXd trial;
        double trial_smooth = 0.0;
        for (;;) {
            trial = prox(extrapolated - grad / lipschitz, weight / lipschitz);
            trial_smooth = logistic::objective(x, labels, trial);
            const Eigen::VectorXd diff = trial - extrapolated;
            const double bound = smooth_at + grad.dot(diff) + 0.5 * lipschitz * diff.squaredNorm();
            if (trial_smooth <= bound + 1e-15 * std::abs(bound)) break;
            lipschitz *= 2.0;
        }
        const double trial_obj = trial_smooth + penalty(trial, weight);

        const Eigen::VectorXd previous = current;
        const double previous_obj = current_obj;
        const bool accepted = trial_obj <= current_obj;
        if (accepted) {
            current = trial;
            current_obj = trial_obj;
        }
        diag.objective_trace.push_back(current_obj);
        diag.iterations = it;

        const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
        extrapolated = current + (momentum / next_momentum) * (trial - current) +
                       ((momentum - 1.0) / next_momentum) * (current - previous);
        momentum = next_momentum;
        lipschitz *= 0.95;

        if (accepted && previous_obj - current_obj < config.tolerance) {
            diag.converged = true;
            break;
        }
    }
    diag.final_objective = current_obj;
    return current;
}

}  // namespace sparse

inline ProbClassifier fit_sparse_logistic(const Eigen::MatrixXd& features, const Eigen::VectorXd& labels,
                                          double l1_lambda, const FitConfig& config = {}) {
    config.validate();
    if (!(l1_lambda >= 0.0)) throw ConfigError("l1_lambda must be >= 0");
    logistic::check_labels(features, labels);
    auto transform = FeatureTransform::fit(features, false, config.standardize);
    const Eigen::MatrixXd x = logistic::design(transform.apply(features));
    TrainDiagnostics diag;
    Eigen::VectorXd beta = sparse::solve(x, labels, l1_lambda, config, diag);
    return ProbClassifier::logistic(ClassifierKind::SparseLogistic, std::move(transform), std::move(beta),
                                    std::move(diag));
}

/// Fits along a decreasing lambda grid with warm starts. Returned in the
/// order of `lambdas`.
inline std::vector<ProbClassifier> sparse_logistic_path(const Eigen::MatrixXd& features,
                                                        const Eigen::VectorXd& labels,
                                                        const std::vector<double>& lambdas,
                                                        const FitConfig& config = {}) {
    config.validate();
    logistic::check_labels(features, labels);
    const auto transform = FeatureTransform::fit(features, false, config.standardize);
    const Eigen::MatrixXd x = logistic::design(transform.apply(features));

    std::vector<std::size_t> order(lambdas.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lambdas[a] > lambdas[b]; });

    std::vector<std::optional<ProbClassifier>> fitted(lambdas.size());
    Eigen::VectorXd warm;
    for (const std::size_t i : order) {
        if (!(lambdas[i] >= 0.0)) throw ConfigError("l1_lambda must be >= 0");
        TrainDiagnostics diag;
        warm = sparse::solve(x, labels, lambdas[i], config, diag, warm);
        fitted[i] = ProbClassifier::logistic(ClassifierKind::SparseLogistic, transform, warm, std::move(diag));
    }
    std::vector<ProbClassifier> out;
    out.reserve(fitted.size());
    for (auto& f : fitted) out.push_back(std::move(*f));
    return out;
}

}  // namespace cshift
