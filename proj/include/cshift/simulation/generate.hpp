#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>

#include "cshift/dataset.hpp"
#include "cshift/error.hpp"
#include "cshift/models.hpp"
#include "cshift/ratio.hpp"
#include "cshift/rng.hpp"

namespace cshift {

struct GeneratedData {
    LabeledSample train;
    LabeledSample test;
    RatioModel oracle;
    std::size_t train_attempts = 0;
    std::size_t test_attempts = 0;
};

namespace detail {

inline LabeledSample draw_population(const ModelSpec& spec, int population, std::size_t n, Rng& rng,
                                     std::size_t& attempts) {
    LabeledSample s;
    s.population = population == 1 ? Population::Train : Population::Test;
    s.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.p));
    s.response.resize(static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < spec.p; ++j) s.feature_names.push_back("x" + std::to_string(j + 1));

    constexpr std::size_t min_attempts = 1000;
    std::size_t kept = 0;
    attempts = 0;
    while (kept < n) {
        const Eigen::VectorXd x = spec.draw_x(population, rng);
        const double y = spec.draw_y(population, x, rng);
        ++attempts;
        if (spec.accepts(x, y)) {
            s.features.row(static_cast<Eigen::Index>(kept)) = x.transpose();
            s.response(static_cast<Eigen::Index>(kept)) = y;
            ++kept;
        }
        if (attempts >= min_attempts && kept * 100 < attempts) {
            throw ConfigError("ratio filter keeps fewer than 1% of draws for model " + std::string(to_string(spec.model)) +
                              "; review the model parameters or the filter bounds");
        }
    }
    return s;
}

}  // namespace detail

/// Draws n1 training and n2 test points. When the spec's filter is on, draws
/// whose true marginal or joint ratio leaves [lo, hi] are rejected and redrawn
/// until the requested sizes are met.
inline GeneratedData generate(const ModelSpec& spec, std::size_t n1, std::size_t n2, std::uint64_t seed) {
    if (n1 < 1 || n2 < 1) throw ConfigError("generate needs n1, n2 >= 1");
    GeneratedData out;
    Rng train_rng(seed, stream::generate_train);
    Rng test_rng(seed, stream::generate_test);
    out.train = detail::draw_population(spec, 1, n1, train_rng, out.train_attempts);
    out.test = detail::draw_population(spec, 2, n2, test_rng, out.test_attempts);
    out.oracle = oracle_ratio(spec);
    return out;
}

}  // namespace cshift
