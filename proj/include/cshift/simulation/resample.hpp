#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "cshift/dataset.hpp"
#include "cshift/error.hpp"
#include "cshift/rng.hpp"

namespace cshift {

/// Draws ceil(fraction * n) rows with replacement, row i with probability
/// proportional to exp(x_i' alpha). Keeps Y|X intact while tilting X, which
/// turns one real dataset into a shifted pair that still satisfies the null.
inline LabeledSample exponential_tilt_resample(const LabeledSample& sample, const Eigen::VectorXd& alpha,
                                               double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("resample fraction must lie in (0,1]");
    if (sample.size() == 0) throw DataError("cannot resample an empty sample");
    if (static_cast<std::size_t>(alpha.size()) != sample.dim()) {
        throw ConfigError("tilt vector has " + std::to_string(alpha.size()) + " entries but the sample has " +
                          std::to_string(sample.dim()) + " features");
    }
    const Eigen::VectorXd log_w = sample.features * alpha;
    const double top = log_w.maxCoeff();
    if (!std::isfinite(top)) throw NumericError("tilt weights are not finite");
    std::vector<double> w(sample.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_w(static_cast<Eigen::Index>(i)) - top);

    const auto n_out = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(sample.size())));
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    Rng rng(seed, stream::resample);
    std::vector<std::size_t> rows(n_out);
    for (auto& r : rows) r = pick(rng);
    return sample.subset(rows);
}

}  // namespace cshift
