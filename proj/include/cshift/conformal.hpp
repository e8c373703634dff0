#pragma once

// Weighted conformal p-values and the covariate-shift test built on them.
//
// Each ranking minibatch holds m training points and one test point. Under
// covariate shift the weighted rank of the test point's score is exactly
// uniform, so T = sqrt(12K) (1/2 - mean U) is asymptotically N(0, 1) and
// large values indicate a shifted conditional law.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "cshift/classifiers.hpp"
#include "cshift/dataset.hpp"
#include "cshift/error.hpp"
#include "cshift/normal.hpp"
#include "cshift/ratio.hpp"
#include "cshift/rng.hpp"

namespace cshift {

struct Minibatch {
    std::vector<double> train_scores;
    std::vector<double> train_g;
    double test_score = 1.0;
    double test_g = 1.0;
    double zeta = 0.0;
};

inline void validate(const Minibatch& b) {
    if (b.train_scores.empty()) throw ConfigError("minibatch needs m >= 1 training points");
    if (b.train_scores.size() != b.train_g.size()) throw ConfigError("minibatch scores and weights differ in length");
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!std::all_of(b.train_scores.begin(), b.train_scores.end(), positive) || !positive(b.test_score)) {
        throw NumericError("minibatch scores must be finite and positive");
    }
    if (!std::all_of(b.train_g.begin(), b.train_g.end(), positive) || !positive(b.test_g)) {
        throw NumericError("minibatch weights must be finite and positive");
    }
    if (!(b.zeta >= 0.0 && b.zeta < 1.0)) throw ConfigError("zeta must lie in [0,1)");
}

/// Normalized weights g_l / (sum g + g_test); the test point's weight is last.
inline std::vector<double> batch_weights(std::span<const double> train_g, double test_g) {
    double total = 0.0;
    for (double g : train_g) total += g;
    total += test_g;
    if (!(total > 0.0) || !std::isfinite(total)) throw NumericError("batch weights do not normalize");
    std::vector<double> w;
    w.reserve(train_g.size() + 1);
    for (double g : train_g) w.push_back(g / total);
    w.push_back(test_g / total);
    return w;
}

/// Weighted conformal p-value
///   U = sum_l p_l 1(V_l < V_t) + zeta (p_t + sum_l p_l 1(V_l = V_t)).
///
/// Masses are accumulated on the raw g scale and divided once, so with g == 1
/// the result is (#less + zeta) / (m+1) in exact arithmetic on integers.
inline double weighted_pvalue(const Minibatch& b) {
    validate(b);
    double less = 0.0;
    double tied = b.test_g;
    double total = 0.0;
    for (std::size_t l = 0; l < b.train_scores.size(); ++l) {
        const double g = b.train_g[l];
        total += g;
        if (b.train_scores[l] < b.test_score) {
            less += g;
        } else if (b.train_scores[l] == b.test_score) {
            tied += g;
        }
    }
    total += b.test_g;
    const double u = (less + b.zeta * tied) / total;
    return std::min(1.0, std::max(0.0, u));
}

/// Unweighted conformal p-value (R - 1 + zeta) / (m+1) with the rank R drawn
/// uniformly from [R-, R+] to break ties.
inline double unweighted_pvalue(std::span<const double> train_scores, double test_score, double zeta,
                                std::uint64_t tie_seed) {
    if (train_scores.empty()) throw ConfigError("unweighted p-value needs m >= 1");
    if (!(zeta >= 0.0 && zeta < 1.0)) throw ConfigError("zeta must lie in [0,1)");
    std::size_t less = 0;
    std::size_t at_most = 1;  // the test score itself
    for (double s : train_scores) {
        if (s < test_score) ++less;
        if (s <= test_score) ++at_most;
    }
    const std::size_t r_lo = less + 1;
    const std::size_t r_hi = at_most;
    std::size_t rank = r_lo;
    if (r_hi > r_lo) {
        Rng rng(tie_seed, stream::rank_tie);
        rank = static_cast<std::size_t>(rng.integer(r_lo, r_hi));
    }
    return (static_cast<double>(rank - 1) + zeta) / static_cast<double>(train_scores.size() + 1);
}

/// T = sqrt(12K) (1/2 - mean U).
inline double t_statistic(std::span<const double> u) {
    if (u.empty()) throw ConfigError("T statistic needs K >= 1 p-values");
    double sum = 0.0;
    for (double v : u) sum += v;
    const double k = static_cast<double>(u.size());
    return std::sqrt(12.0 * k) * (0.5 - sum / k);
}

inline void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must be in (0,1)");
}

/// One-sided decision T >= Phi^{-1}(1 - alpha).
inline bool reject_at(double t, double alpha) {
    check_alpha(alpha);
    return t >= normal_quantile(1.0 - alpha);
}

/// min(1, 2 * median); the median of an even count averages the two middle values.
inline double median_p(std::span<const double> p_values) {
    if (p_values.empty()) throw ConfigError("median p-value needs at least one p-value");
    std::vector<double> v(p_values.begin(), p_values.end());
    for (double p : v) {
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p-values must lie in [0,1]");
    }
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    const double median = n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    return std::min(1.0, 2.0 * median);
}

inline constexpr std::size_t default_aggregation_b = 9;

// ---------------------------------------------------------------------------
// Test orchestration

/// Weights and scores of one minibatch; the test point is last.
struct BatchRecord {
    std::vector<double> weights;
    std::vector<double> scores;
};

struct RunDiagnostics {
    bool equal_marginals = false;
    std::size_t clipped_weights = 0;
    std::optional<double> err_p;
    std::optional<double> err_v;
    std::optional<double> mce;
    std::vector<std::string> warnings;
    nlohmann::json classifiers = nlohmann::json::object();
};

struct ConformalRun {
    double alpha = 0.05;
    std::size_t m = 0;
    std::size_t k = 0;
    std::uint64_t seed = 0;
    std::vector<double> u_values;
    double t_statistic = 0.0;
    double p_value = 1.0;
    bool reject = false;
    SplitPlan plan;
    RunDiagnostics diagnostics;
    nlohmann::json seeds = nlohmann::json::object();
    double fit_ms = 0.0;
    double rank_ms = 0.0;
    std::vector<BatchRecord> batches;  // filled when requested
};

inline nlohmann::json to_json(const RunDiagnostics& d) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    return {{"equal_marginals", d.equal_marginals},
            {"clipped_weights", d.clipped_weights},
            {"err_p", opt(d.err_p)},
            {"err_v", opt(d.err_v)},
            {"mce", opt(d.mce)},
            {"warnings", d.warnings},
            {"classifiers", d.classifiers}};
}

inline nlohmann::json to_json(const ConformalRun& r, bool include_plan = true) {
    nlohmann::json j{{"alpha", r.alpha},
                     {"m", r.m},
                     {"K", r.k},
                     {"seed", r.seed},
                     {"t", r.t_statistic},
                     {"p_value", r.p_value},
                     {"reject", r.reject},
                     {"u_values", r.u_values},
                     {"diagnostics", to_json(r.diagnostics)},
                     {"seeds", r.seeds},
                     {"timing", {{"fit_ms", r.fit_ms}, {"rank_ms", r.rank_ms}}}};
    if (include_plan) j["plan"] = to_json(r.plan);
    return j;
}

struct EngineOptions {
    bool clip_estimated_g = true;
    bool keep_batches = false;
};

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

inline void check_pair(const LabeledSample& train, const LabeledSample& test) {
    validate(train);
    validate(test);
    if (train.dim() != test.dim()) {
        throw DataError("train has " + std::to_string(train.dim()) + " features but test has " +
                        std::to_string(test.dim()));
    }
}

}  // namespace detail

/// Ranks the plan's minibatches with fixed ratio functions and computes T.
/// zeta_k is drawn from its own stream of `seed` indexed by k.
inline ConformalRun run_with_ratios(const LabeledSample& train, const LabeledSample& test, const SplitPlan& plan,
                                    const RatioModel& ratios, double alpha, std::uint64_t seed,
                                    const EngineOptions& options = {}) {
    check_alpha(alpha);
    detail::check_pair(train, test);
    if (plan.batches.size() != plan.k || plan.rank_test.size() != plan.k) {
        throw ConfigError("split plan is inconsistent with its K");
    }
    const auto start = std::chrono::steady_clock::now();

    const LabeledSample rank_train = train.subset(plan.rank_train);
    const LabeledSample rank_test = test.subset(plan.rank_test);
    Eigen::VectorXd g_train = ratios.g(rank_train.features);
    Eigen::VectorXd g_test = ratios.g(rank_test.features);
    const Eigen::VectorXd v_train = ratios.v(rank_train.features, rank_train.response);
    const Eigen::VectorXd v_test = ratios.v(rank_test.features, rank_test.response);

    ConformalRun run;
    run.alpha = alpha;
    run.m = plan.m;
    run.k = plan.k;
    run.seed = seed;
    run.plan = plan;
    run.diagnostics.equal_marginals = ratios.g_hat.source == RatioSource::ConstantOne;

    if (options.clip_estimated_g && ratios.g_hat.source == RatioSource::Classifier) {
        auto clip = [&run](Eigen::VectorXd& g) {
            for (Eigen::Index i = 0; i < g.size(); ++i) {
                const double c = clip_ratio(g(i));
                if (c != g(i)) ++run.diagnostics.clipped_weights;
                g(i) = c;
            }
        };
        clip(g_train);
        clip(g_test);
    }

    // rank_train is the concatenation of the batches in order.
    std::unordered_map<std::size_t, Eigen::Index> position;
    for (std::size_t i = 0; i < plan.rank_train.size(); ++i) position[plan.rank_train[i]] = static_cast<Eigen::Index>(i);

    run.u_values.resize(plan.k);
    if (options.keep_batches) run.batches.resize(plan.k);
    Minibatch batch;
    for (std::size_t b = 0; b < plan.k; ++b) {
        const auto& members = plan.batches[b];
        batch.train_scores.resize(members.size());
        batch.train_g.resize(members.size());
        for (std::size_t l = 0; l < members.size(); ++l) {
            const Eigen::Index at = position.at(members[l]);
            batch.train_scores[l] = v_train(at);
            batch.train_g[l] = g_train(at);
        }
        batch.test_score = v_test(static_cast<Eigen::Index>(b));
        batch.test_g = g_test(static_cast<Eigen::Index>(b));
        batch.zeta = Rng(seed, stream::zeta, b).uniform();
        run.u_values[b] = weighted_pvalue(batch);
        if (options.keep_batches) {
            std::vector<double> scores = batch.train_scores;
            scores.push_back(batch.test_score);
            run.batches[b] = {batch_weights(batch.train_g, batch.test_g), std::move(scores)};
        }
    }

    run.t_statistic = t_statistic(run.u_values);
    run.p_value = normal_sf(run.t_statistic);
    run.reject = reject_at(run.t_statistic, alpha);
    run.rank_ms = detail::elapsed_ms(start);
    run.seeds = {{"split", plan.seed}, {"zeta", seed}};
    if (run.diagnostics.clipped_weights > 0) {
        run.diagnostics.warnings.push_back(std::to_string(run.diagnostics.clipped_weights) +
                                           " estimated weights clipped to [0.01, 100]");
    }
    return run;
}

/// User-facing configuration of one test.
struct TestConfig {
    std::size_t m = 10;
    std::size_t k = 0;  // 0 selects default_k
    double alpha = 0.05;
    ClassifierKind classifier = ClassifierKind::LinearLogistic;
    FitConfig fit;
    bool equal_marginals = false;
    bool clip_estimated_g = true;
    std::uint64_t seed = 0;

    void validate() const {
        check_alpha(alpha);
        if (m < 1) throw ConfigError("m must be >= 1");
        if (classifier == ClassifierKind::Precomputed) throw ConfigError("run_test needs a trainable classifier");
        fit.validate();
    }
};

inline nlohmann::json to_json(const TestConfig& c) {
    return {{"m", c.m},
            {"K", c.k},
            {"alpha", c.alpha},
            {"estimator", to_string(c.classifier)},
            {"l1_lambda", c.fit.l1_lambda},
            {"hidden_layers", c.fit.hidden_layers},
            {"equal_marginals", c.equal_marginals},
            {"clip_estimated_g", c.clip_estimated_g},
            {"seed", c.seed}};
}

/// Fits g_hat on (I11, I21) and V_hat on the same subsamples. With
/// `equal_marginals` the marginal fit is skipped and g_hat == 1.
inline RatioModel fit_ratio_model(const LabeledSample& train, const LabeledSample& test, const SplitPlan& plan,
                                  ClassifierKind kind, const FitConfig& fit, bool equal_marginals,
                                  std::uint64_t seed) {
    const LabeledSample fit_train = train.subset(plan.fit_train);
    const LabeledSample fit_test = test.subset(plan.fit_test);
    MarginalRatio g = constant_one_ratio();
    if (!equal_marginals) {
        FitConfig marginal = fit;
        marginal.seed = derive_seed(seed, stream::marginal_fit, 0);
        g = estimate_marginal_ratio(fit_train, fit_test, kind, marginal);
    }
    FitConfig joint = fit;
    joint.seed = derive_seed(seed, stream::joint_fit, 0);
    return estimate_conditional_ratio(fit_train, fit_test, kind, joint, std::move(g));
}

inline nlohmann::json classifier_summary(const RatioModel& r) {
    nlohmann::json j = nlohmann::json::object();
    if (r.g_hat.classifier) j["marginal"] = to_json(*r.g_hat.classifier);
    if (r.joint_classifier) j["joint"] = to_json(*r.joint_classifier);
    return j;
}

/// The full test: split, fit both ratios, rank K minibatches, decide.
inline ConformalRun run_test(const LabeledSample& train, const LabeledSample& test, const TestConfig& config) {
    config.validate();
    detail::check_pair(train, test);
    const std::size_t k = config.k == 0 ? default_k(test.size(), train.size(), config.m) : config.k;
    const SplitPlan plan = plan_split(train.size(), test.size(), config.m, k, config.seed);

    const auto start = std::chrono::steady_clock::now();
    const RatioModel ratios =
        fit_ratio_model(train, test, plan, config.classifier, config.fit, config.equal_marginals, config.seed);
    const double fit_ms = detail::elapsed_ms(start);

    ConformalRun run = run_with_ratios(train, test, plan, ratios, config.alpha, config.seed,
                                       EngineOptions{config.clip_estimated_g, false});
    run.fit_ms = fit_ms;
    run.diagnostics.classifiers = classifier_summary(ratios);
    run.seeds["marginal_fit"] = derive_seed(config.seed, stream::marginal_fit, 0);
    run.seeds["joint_fit"] = derive_seed(config.seed, stream::joint_fit, 0);
    if (config.equal_marginals) {
        run.diagnostics.warnings.push_back("equal marginals assumed: weights forced to 1/(m+1)");
    }
    return run;
}

}  // namespace cshift
