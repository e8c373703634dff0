#pragma once

// Simulation models A-D: parameters, samplers and closed-form log densities.
//
//   A  y = alpha_l + beta'x + N(0,1),           x1 ~ N(0,I),  x2 ~ N(mu,I)
//   B  y = alpha_l + h(x) + t(5),               x1 ~ N(0,I),  x2 ~ N(mu,I)
//      h(x) = b1 x1 + b2 x2 + b3 x3^2 + b4 x4^2 + b5 x5^3
//   C  y = beta'x + N(0, s_l^2(x)),             x1 ~ N(0,S),  x2 ~ N(mu,S)
//      s_1^2 = 4/(1+x1^2); s_2^2 = s_1^2 (null) or 1/(1+x1^2) (alt)
//   D  y = beta'x + N(0, v_l),                  x1 ~ N(0,I),  x2 ~ N(0,2I)
//      v_1 = 1; v_2 = 1 (null) or 2 (alt)
//
// mu = (1, 1, -1, -1, 0, 0, ...). beta carries +-1 on its first min(p, 5)
// coordinates and zeros elsewhere.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "cshift/error.hpp"
#include "cshift/normal.hpp"
#include "cshift/rng.hpp"

namespace cshift {

enum class Model { A, B, C, D };
enum class Hypothesis { Null, Alt };

inline const char* to_string(Model m) {
    static constexpr std::array<const char*, 4> names{"A", "B", "C", "D"};
    return names[static_cast<std::size_t>(m)];
}
inline const char* to_string(Hypothesis h) { return h == Hypothesis::Null ? "null" : "alt"; }

inline Model parse_model(const std::string& s) {
    if (s == "A" || s == "a") return Model::A;
    if (s == "B" || s == "b") return Model::B;
    if (s == "C" || s == "c") return Model::C;
    if (s == "D" || s == "d") return Model::D;
    throw ConfigError("unknown model '" + s + "' (valid models: A, B, C, D)");
}

inline Hypothesis parse_hypothesis(const std::string& s) {
    if (s == "null" || s == "h0") return Hypothesis::Null;
    if (s == "alt" || s == "h1") return Hypothesis::Alt;
    throw ConfigError("unknown hypothesis '" + s + "' (valid: null, alt)");
}

namespace detail {

inline double student_t5_logpdf(double r) {
    // log Gamma(3) - log Gamma(2.5) - 0.5 log(5 pi)
    constexpr double log_norm = 0.69314718055994530942 - 0.28468287047291915963 - 1.37815966806145655453;
    return log_norm - 3.0 * std::log1p(r * r / 5.0);
}

inline double normal_logpdf(double r, double variance) {
    constexpr double log_2pi = 1.83787706640934548356;
    return -0.5 * (log_2pi + std::log(variance) + r * r / variance);
}

}  // namespace detail

struct ModelSpec {
    Model model = Model::A;
    Hypothesis hypothesis = Hypothesis::Null;
    std::size_t p = 5;
    Eigen::VectorXd beta;
    Eigen::VectorXd mu;
    Eigen::MatrixXd sigma;     // covariance of the training covariates
    double test_scale = 1.0;   // test covariance = test_scale * sigma
    double alpha1 = 0.0;
    double alpha2 = 0.0;
    std::uint64_t coefficient_seed = 0;

    // Rejection filter on the true marginal and joint ratios.
    bool filter = true;
    double filter_lo = 0.01;
    double filter_hi = 100.0;

    /// Builds the model. Coefficient signs are drawn from `coefficient_seed`.
    static ModelSpec make(Model model, Hypothesis hypothesis, std::uint64_t coefficient_seed,
                          std::size_t p = 5) {
        if (p < 1) throw ConfigError("model dimension must be >= 1");
        if (model == Model::B && p < 5) throw ConfigError("model B needs p >= 5");
        ModelSpec s;
        s.model = model;
        s.hypothesis = hypothesis;
        s.p = p;
        s.coefficient_seed = coefficient_seed;
        const auto pi = static_cast<Eigen::Index>(p);

        Rng rng(coefficient_seed, stream::coefficients);
        s.beta = Eigen::VectorXd::Zero(pi);
        for (Eigen::Index j = 0; j < std::min<Eigen::Index>(pi, 5); ++j) s.beta(j) = rng.uniform() < 0.5 ? -1.0 : 1.0;

        s.mu = Eigen::VectorXd::Zero(pi);
        if (model != Model::D) {
            static constexpr std::array<double, 5> shift{1.0, 1.0, -1.0, -1.0, 0.0};
            for (Eigen::Index j = 0; j < std::min<Eigen::Index>(pi, 5); ++j) s.mu(j) = shift[static_cast<std::size_t>(j)];
        }

        s.sigma = Eigen::MatrixXd::Identity(pi, pi);
        if (model == Model::C) {
            for (Eigen::Index i = 0; i < pi; ++i) {
                for (Eigen::Index j = 0; j < pi; ++j) {
                    if (i != j) s.sigma(i, j) = 1.0 / static_cast<double>(std::max(i, j) + 1);
                }
            }
        }
        if (model == Model::D) s.test_scale = 2.0;

        if (hypothesis == Hypothesis::Alt) {
            if (model == Model::A) s.alpha2 = 0.5;
            if (model == Model::B) s.alpha2 = 1.0;
        }
        s.prepare();
        return s;
    }

    /// Recomputes cached factorizations after editing parameters by hand.
    void prepare() {
        chol_ = sigma.llt().matrixL();
        precision_mu_ = sigma.llt().solve(mu);
        log_det_sigma_ = 2.0 * chol_.diagonal().array().log().sum();
    }

    // --- covariates --------------------------------------------------------

    Eigen::VectorXd draw_x(int population, Rng& rng) const {
        Eigen::VectorXd z(static_cast<Eigen::Index>(p));
        for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = rng.normal();
        Eigen::VectorXd x = chol_ * z;
        if (population == 2) {
            x *= std::sqrt(test_scale);
            x += mu;
        }
        return x;
    }

    /// log g(x) = log f_{2,X}(x) - log f_{1,X}(x), normalized densities.
    double log_marginal_ratio(const Eigen::VectorXd& x) const {
        if (model == Model::D) {
            // N(0, 2I) against N(0, I)
            return -0.5 * static_cast<double>(p) * std::log(2.0) + 0.25 * x.squaredNorm();
        }
        return precision_mu_.dot(x) - 0.5 * precision_mu_.dot(mu);
    }

    // --- response ----------------------------------------------------------

    double mean_function(const Eigen::VectorXd& x) const {
        if (model == Model::B) {
            return beta(0) * x(0) + beta(1) * x(1) + beta(2) * x(2) * x(2) + beta(3) * x(3) * x(3) +
                   beta(4) * x(4) * x(4) * x(4);
        }
        return beta.dot(x);
    }

    double intercept(int population) const { return population == 1 ? alpha1 : alpha2; }

    /// Noise variance (normal models) for population 1 or 2 at x.
    double noise_variance(int population, const Eigen::VectorXd& x) const {
        switch (model) {
            case Model::A: return 1.0;
            case Model::B: return 5.0 / 3.0;
            case Model::C: {
                const double base = 1.0 + x(0) * x(0);
                return (population == 2 && hypothesis == Hypothesis::Alt) ? 1.0 / base : 4.0 / base;
            }
            case Model::D: return (population == 2 && hypothesis == Hypothesis::Alt) ? 2.0 : 1.0;
        }
        return 1.0;
    }

    double draw_y(int population, const Eigen::VectorXd& x, Rng& rng) const {
        const double center = intercept(population) + mean_function(x);
        if (model == Model::B) return center + rng.student_t(5.0);
        return center + std::sqrt(noise_variance(population, x)) * rng.normal();
    }

    double log_conditional_density(int population, const Eigen::VectorXd& x, double y) const {
        const double r = y - intercept(population) - mean_function(x);
        if (model == Model::B) return detail::student_t5_logpdf(r);
        return detail::normal_logpdf(r, noise_variance(population, x));
    }

    /// log V(x,y) = log f_1(y|x) - log f_2(y|x).
    double log_conditional_ratio(const Eigen::VectorXd& x, double y) const {
        if (hypothesis == Hypothesis::Null) return 0.0;
        return log_conditional_density(1, x, y) - log_conditional_density(2, x, y);
    }

    /// True when the filter keeps (x, y): both f_{1,X}/f_{2,X} and
    /// f_1(x,y)/f_2(x,y) lie in [filter_lo, filter_hi].
    bool accepts(const Eigen::VectorXd& x, double y) const {
        if (!filter) return true;
        const double log_lo = std::log(filter_lo);
        const double log_hi = std::log(filter_hi);
        const double log_g = log_marginal_ratio(x);
        const double log_marginal = -log_g;
        const double log_joint = log_conditional_ratio(x, y) - log_g;
        return log_marginal >= log_lo && log_marginal <= log_hi && log_joint >= log_lo && log_joint <= log_hi;
    }

private:
    Eigen::MatrixXd chol_;
    Eigen::VectorXd precision_mu_;
    double log_det_sigma_ = 0.0;
};

inline nlohmann::json to_json(const ModelSpec& s) {
    auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    nlohmann::json sigma = nlohmann::json::array();
    for (Eigen::Index i = 0; i < s.sigma.rows(); ++i) sigma.push_back(vec(s.sigma.row(i).transpose()));
    const char* noise = s.model == Model::B ? "student-t(5)"
                        : s.model == Model::C ? "normal, variance 4/(1+x1^2) (alt test: 1/(1+x1^2))"
                        : s.model == Model::D ? "normal, variance 1 (alt test: 2)"
                                              : "normal, variance 1";
    return {{"model", to_string(s.model)},
            {"hypothesis", to_string(s.hypothesis)},
            {"p", s.p},
            {"beta", vec(s.beta)},
            {"mu", vec(s.mu)},
            {"sigma", sigma},
            {"test_covariance_scale", s.test_scale},
            {"alpha1", s.alpha1},
            {"alpha2", s.alpha2},
            {"noise", noise},
            {"coefficient_seed", s.coefficient_seed},
            {"filter", s.filter ? nlohmann::json{s.filter_lo, s.filter_hi} : nlohmann::json(nullptr)}};
}

}  // namespace cshift
