#pragma once

// Maximum-likelihood logistic regression by iteratively reweighted least
// squares (damped Newton with step halving).

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "cshift/classifiers/prob_classifier.hpp"
#include "cshift/classifiers/transform.hpp"
#include "cshift/error.hpp"

namespace cshift {

namespace logistic {

/// Prepends a column of ones.
inline Eigen::MatrixXd design(const Eigen::MatrixXd& z) {
    Eigen::MatrixXd x(z.rows(), z.cols() + 1);
    x.col(0).setOnes();
    x.rightCols(z.cols()) = z;
    return x;
}

/// Mean negative log-likelihood at `beta` for a design with intercept column.
inline double objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& labels,
                        const Eigen::VectorXd& beta) {
    const Eigen::VectorXd t = x * beta;
    double total = 0.0;
    for (Eigen::Index i = 0; i < t.size(); ++i) total += softplus(t(i)) - labels(i) * t(i);
    return total / static_cast<double>(t.size());
}

/// Gradient of `objective`.
inline Eigen::VectorXd gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& labels,
                                const Eigen::VectorXd& beta) {
    const Eigen::VectorXd t = x * beta;
    Eigen::VectorXd residual(t.size());
    for (Eigen::Index i = 0; i < t.size(); ++i) residual(i) = sigmoid(t(i)) - labels(i);
    return x.transpose() * residual / static_cast<double>(t.size());
}

inline void check_labels(const Eigen::MatrixXd& features, const Eigen::VectorXd& labels) {
    if (features.rows() != labels.size()) throw DataError("features and labels differ in length");
    if (features.rows() == 0) throw DataError("cannot fit a classifier on an empty sample");
    if (!features.allFinite() || !labels.allFinite()) throw DataError("non-finite classifier input");
    bool has0 = false;
    bool has1 = false;
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
        if (labels(i) == 0.0) {
            has0 = true;
        } else if (labels(i) == 1.0) {
            has1 = true;
        } else {
            throw DataError("labels must be 0 or 1");
        }
    }
    if (!has0 || !has1) throw DataError("both classes must be present to fit a classifier");
}

/// True when the linear predictor classifies every point correctly.
inline bool separates(const Eigen::MatrixXd& x, const Eigen::VectorXd& labels,
                      const Eigen::VectorXd& beta) {
    const Eigen::VectorXd t = x * beta;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
        if ((labels(i) == 1.0 && t(i) <= 0.0) || (labels(i) == 0.0 && t(i) >= 0.0)) return false;
    }
    return true;
}

/// IRLS on an explicit design matrix (intercept column included).
inline Eigen::VectorXd irls(const Eigen::MatrixXd& x, const Eigen::VectorXd& labels,
                            const FitConfig& config, TrainDiagnostics& diag) {
    const int max_iter = config.max_iterations > 0 ? config.max_iterations : 100;
    const double n = static_cast<double>(x.rows());
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
    double obj = objective(x, labels, beta);
    diag.objective_trace.push_back(obj);

    int separated_streak = 0;
    for (int it = 1; it <= max_iter; ++it) {
        const Eigen::VectorXd t = x * beta;
        Eigen::VectorXd w(t.size());
        Eigen::VectorXd residual(t.size());
        for (Eigen::Index i = 0; i < t.size(); ++i) {
            const double mu = sigmoid(t(i));
            w(i) = mu * (1.0 - mu);
            residual(i) = mu - labels(i);
        }
        const Eigen::VectorXd grad = x.transpose() * residual / n;
        Eigen::MatrixXd hessian = x.transpose() * w.asDiagonal() * x / n;

        Eigen::VectorXd step;
        Eigen::LLT<Eigen::MatrixXd> llt(hessian);
        if (llt.info() == Eigen::Success) {
            step = llt.solve(grad);
        }
        if (llt.info() != Eigen::Success || !step.allFinite()) {
            hessian.diagonal().array() += 1e-8;
            diag.ridge_jitter = true;
            step = hessian.ldlt().solve(grad);
        }

        double scale = 1.0;
        Eigen::VectorXd candidate = beta - step;
        double cand_obj = objective(x, labels, candidate);
        while (!(cand_obj <= obj + 1e-12) && scale > 1e-10) {
            scale *= 0.5;
            candidate = beta - scale * step;
            cand_obj = objective(x, labels, candidate);
        }
        if (!(cand_obj <= obj + 1e-12)) {
            diag.iterations = it;
            break;  // no descent possible; beta is the best iterate
        }

        const double change = obj - cand_obj;
        const bool growing = candidate.norm() > beta.norm();
        beta = candidate;
        obj = cand_obj;
        diag.objective_trace.push_back(obj);
        diag.iterations = it;

        separated_streak = (growing && separates(x, labels, beta)) ? separated_streak + 1 : 0;
        if (separated_streak >= 3) {
            diag.separation = true;
            diag.warnings.emplace_back("perfect separation: coefficients diverge, returning last stable iterate");
            break;
        }
        if (std::abs(change) < config.tolerance) {
            diag.converged = true;
            break;
        }
    }
    diag.final_objective = obj;
    if (diag.ridge_jitter) diag.warnings.emplace_back("singular weighted normal equations: ridge jitter 1e-8 applied");
    return beta;
}

}  // namespace logistic

/// Linear logistic regression on raw features.
inline ProbClassifier fit_logistic(const Eigen::MatrixXd& features, const Eigen::VectorXd& labels,
                                   const FitConfig& config = {}, bool quadratic = false) {
    config.validate();
    logistic::check_labels(features, labels);
    auto transform = FeatureTransform::fit(features, quadratic, config.standardize);
    const Eigen::MatrixXd x = logistic::design(transform.apply(features));

    TrainDiagnostics diag;
    if (x.rows() <= x.cols() - 1) {
        diag.warnings.emplace_back("n <= p: logistic fit is poorly determined");
    }
    Eigen::VectorXd beta = logistic::irls(x, labels, config, diag);
    return ProbClassifier::logistic(
        quadratic ? ClassifierKind::QuadraticLogistic : ClassifierKind::LinearLogistic,
        std::move(transform), std::move(beta), std::move(diag));
}

/// Logistic regression on the quadratic expansion of the features.
inline ProbClassifier fit_quadratic_logistic(const Eigen::MatrixXd& features,
                                             const Eigen::VectorXd& labels,
                                             const FitConfig& config = {}) {
    return fit_logistic(features, labels, config, true);
}

}  // namespace cshift
