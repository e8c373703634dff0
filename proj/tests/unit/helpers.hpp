#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cshift/rng.hpp"

namespace testing_support {

inline Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, cshift::Rng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
    }
    return m;
}

/// Kolmogorov-Smirnov distance between the sample and Uniform(0,1).
inline double ks_uniform(std::vector<double> u) {
    std::sort(u.begin(), u.end());
    const double n = static_cast<double>(u.size());
    double d = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        d = std::max(d, std::max(static_cast<double>(i + 1) / n - u[i], u[i] - static_cast<double>(i) / n));
    }
    return d;
}

inline double rank_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    auto ranks = [](const Eigen::VectorXd& v) {
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(v.size()));
        for (Eigen::Index i = 0; i < v.size(); ++i) idx[static_cast<std::size_t>(i)] = i;
        std::sort(idx.begin(), idx.end(), [&](Eigen::Index x, Eigen::Index y) { return v(x) < v(y); });
        Eigen::VectorXd r(v.size());
        for (std::size_t k = 0; k < idx.size(); ++k) r(idx[k]) = static_cast<double>(k);
        return r;
    };
    const Eigen::VectorXd ra = ranks(a), rb = ranks(b);
    const Eigen::VectorXd ca = ra.array() - ra.mean(), cb = rb.array() - rb.mean();
    return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
}

}  // namespace testing_support
