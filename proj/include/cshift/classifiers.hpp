#pragma once

#include "cshift/classifiers/logistic.hpp"
#include "cshift/classifiers/mlp.hpp"
#include "cshift/classifiers/prob_classifier.hpp"
#include "cshift/classifiers/sparse_logistic.hpp"
#include "cshift/classifiers/transform.hpp"

namespace cshift {

/// Fits the classifier named by `kind` on raw features.
inline ProbClassifier fit_classifier(ClassifierKind kind, const Eigen::MatrixXd& features,
                                     const Eigen::VectorXd& labels, const FitConfig& config) {
    switch (kind) {
        case ClassifierKind::LinearLogistic: return fit_logistic(features, labels, config);
        case ClassifierKind::QuadraticLogistic: return fit_quadratic_logistic(features, labels, config);
        case ClassifierKind::NeuralNet: return fit_mlp(features, labels, config);
        case ClassifierKind::SparseLogistic: return fit_sparse_logistic(features, labels, config.l1_lambda, config);
        case ClassifierKind::Precomputed: break;
    }
    throw ConfigError("precomputed classifiers cannot be fitted");
}

/// Stacks two samples and labels the first block 1, the second 0.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> stack_labeled(const Eigen::MatrixXd& ones,
                                                                 const Eigen::MatrixXd& zeros) {
    Eigen::MatrixXd x(ones.rows() + zeros.rows(), ones.cols());
    x << ones, zeros;
    Eigen::VectorXd y(x.rows());
    y.head(ones.rows()).setOnes();
    y.tail(zeros.rows()).setZero();
    return {std::move(x), std::move(y)};
}

}  // namespace cshift
