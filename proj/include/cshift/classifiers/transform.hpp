#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>

#include "cshift/error.hpp"

namespace cshift {

/// Appends squares and pairwise products to the linear terms.
///
/// Column order: the p linear terms, then the p squares, then the cross
/// products x_i x_j for i < j in lexicographic order. q = p + p(p+1)/2.
inline Eigen::MatrixXd expand_quadratic(const Eigen::MatrixXd& x) {
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    const Eigen::Index q = p + p * (p + 1) / 2;
    Eigen::MatrixXd out(n, q);
    out.leftCols(p) = x;
    out.middleCols(p, p) = x.array().square().matrix();
    Eigen::Index col = 2 * p;
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = i + 1; j < p; ++j) {
            out.col(col++) = x.col(i).cwiseProduct(x.col(j));
        }
    }
    return out;
}

inline std::size_t quadratic_width(std::size_t p) { return p + p * (p + 1) / 2; }

/// Input mapping stored with a fitted classifier: optional quadratic
/// expansion followed by optional per-column standardization.
struct FeatureTransform {
    std::size_t input_dim = 0;
    bool quadratic = false;
    bool standardize = false;
    Eigen::VectorXd means;  // over expanded columns; empty when !standardize
    Eigen::VectorXd sds;

    std::size_t output_dim() const { return quadratic ? quadratic_width(input_dim) : input_dim; }

    /// Learns the standardization constants from `x` (raw, unexpanded rows).
    static FeatureTransform fit(const Eigen::MatrixXd& x, bool quadratic, bool standardize) {
        FeatureTransform t;
        t.input_dim = static_cast<std::size_t>(x.cols());
        t.quadratic = quadratic;
        t.standardize = standardize;
        if (standardize) {
            const Eigen::MatrixXd z = quadratic ? expand_quadratic(x) : x;
            const double n = static_cast<double>(z.rows());
            t.means = z.colwise().mean().transpose();
            t.sds.resize(z.cols());
            for (Eigen::Index j = 0; j < z.cols(); ++j) {
                const double var = (z.col(j).array() - t.means(j)).square().sum() / n;
                // Constant columns are centred only.
                t.sds(j) = var > 0.0 ? std::sqrt(var) : 1.0;
            }
        }
        return t;
    }

    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
        if (static_cast<std::size_t>(x.cols()) != input_dim) {
            throw DataError("feature dimension mismatch: classifier expects " +
                            std::to_string(input_dim) + " columns, got " +
                            std::to_string(x.cols()));
        }
        Eigen::MatrixXd z = quadratic ? expand_quadratic(x) : x;
        if (standardize) {
            z.rowwise() -= means.transpose();
            z.array().rowwise() /= sds.transpose().array();
        }
        return z;
    }
};

}  // namespace cshift
