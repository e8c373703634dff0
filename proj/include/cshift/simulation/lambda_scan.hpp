#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "cshift/classifiers.hpp"
#include "cshift/error.hpp"

namespace cshift {

struct LambdaScanPoint {
    double lambda = 0.0;
    double validation_loss = 0.0;
    std::vector<std::size_t> support;  // nonzero feature coefficients, 0-based
};

struct LambdaScan {
    std::vector<LambdaScanPoint> points;  // in the order of the requested lambdas
    std::size_t best = 0;                 // index of the smallest validation loss
};

/// Mean Bernoulli negative log-likelihood of clamped predictions.
inline double log_loss(const ProbClassifier& c, const Eigen::MatrixXd& x, const Eigen::VectorXd& labels) {
    if (x.rows() == 0 || x.rows() != labels.size()) throw DataError("log_loss: empty or mismatched sample");
    const Eigen::VectorXd p = c.predict_proba_rows(x);
    double total = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) total -= labels(i) * std::log(p(i)) + (1.0 - labels(i)) * std::log1p(-p(i));
    return total / static_cast<double>(p.size());
}

/// Fits the sparse logistic path on (x, labels) and scores each lambda on a
/// separate validation sample.
inline LambdaScan lambda_scan(const Eigen::MatrixXd& x, const Eigen::VectorXd& labels, const Eigen::MatrixXd& val_x,
                              const Eigen::VectorXd& val_labels, const std::vector<double>& lambdas,
                              const FitConfig& config) {
    if (lambdas.empty()) throw ConfigError("lambda scan needs at least one lambda");
    const auto path = sparse_logistic_path(x, labels, lambdas, config);
    LambdaScan scan;
    for (std::size_t i = 0; i < path.size(); ++i) {
        LambdaScanPoint point;
        point.lambda = lambdas[i];
        point.validation_loss = log_loss(path[i], val_x, val_labels);
        const Eigen::VectorXd& beta = path[i].coefficients();
        for (Eigen::Index j = 1; j < beta.size(); ++j) {
            if (beta(j) != 0.0) point.support.push_back(static_cast<std::size_t>(j - 1));
        }
        if (point.validation_loss < (scan.points.empty() ? INFINITY : scan.points[scan.best].validation_loss)) {
            scan.best = i;
        }
        scan.points.push_back(std::move(point));
    }
    return scan;
}

}  // namespace cshift
