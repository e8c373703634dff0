#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "cshift/classifiers/prob_classifier.hpp"
#include "cshift/error.hpp"

namespace cshift {

using WeightRows = std::vector<std::vector<double>>;

/// Mean over minibatches of the L1 distance between weight rows.
inline double err_p(const WeightRows& estimated, const WeightRows& oracle) {
    if (estimated.size() != oracle.size() || estimated.empty()) throw DataError("err_p: shape mismatch");
    double total = 0.0;
    for (std::size_t k = 0; k < estimated.size(); ++k) {
        if (estimated[k].size() != oracle[k].size()) throw DataError("err_p: shape mismatch in row " + std::to_string(k));
        for (std::size_t l = 0; l < estimated[k].size(); ++l) total += std::abs(estimated[k][l] - oracle[k][l]);
    }
    return total / static_cast<double>(estimated.size());
}

/// Mean squared difference over every score slot.
inline double err_v(const WeightRows& estimated, const WeightRows& oracle) {
    if (estimated.size() != oracle.size() || estimated.empty()) throw DataError("err_v: shape mismatch");
    double total = 0.0;
    std::size_t slots = 0;
    for (std::size_t k = 0; k < estimated.size(); ++k) {
        if (estimated[k].size() != oracle[k].size()) throw DataError("err_v: shape mismatch in row " + std::to_string(k));
        for (std::size_t l = 0; l < estimated[k].size(); ++l) {
            const double d = estimated[k][l] - oracle[k][l];
            total += d * d;
        }
        slots += estimated[k].size();
    }
    return total / static_cast<double>(slots);
}

/// Misclassification rate at the 0.5 threshold. The holdout must not overlap
/// the classifier's fitting sample.
inline double mce(const ProbClassifier& classifier, const Eigen::MatrixXd& features, const Eigen::VectorXd& labels) {
    if (features.rows() == 0 || features.rows() != labels.size()) throw DataError("mce: empty or mismatched holdout");
    const Eigen::VectorXd p = classifier.predict_proba_rows(features);
    std::size_t wrong = 0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double predicted = p(i) > 0.5 ? 1.0 : 0.0;
        if (predicted != labels(i)) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(p.size());
}

}  // namespace cshift
