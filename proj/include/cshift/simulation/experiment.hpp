#pragma once

// Replicated simulation experiments over a grid of (n2, m, estimator,
// weight mode). Sizes follow the recipe
//   K = ceil(n2 / ln n2),  n11 = n21 = n2 - K,  n1 = n2 + (m-1) K.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cshift/classifiers.hpp"
#include "cshift/conformal.hpp"
#include "cshift/models.hpp"
#include "cshift/parallel.hpp"
#include "cshift/ratio.hpp"
#include "cshift/simulation/generate.hpp"
#include "cshift/simulation/metrics.hpp"

namespace cshift {

/// Which marginal ratio the test uses. The joint odds are always estimated;
/// the chosen g forms both the weights and V_hat = joint odds * g.
enum class WeightMode {
    Estimated,     // g_hat from the marginal classifier
    Oracle,        // true g
    SquaredOdds,   // g_hat squared, i.e. probabilities pushed toward 0/1
};

inline const char* to_string(WeightMode w) {
    switch (w) {
        case WeightMode::Estimated: return "estimated";
        case WeightMode::Oracle: return "oracle";
        case WeightMode::SquaredOdds: return "squared-odds";
    }
    return "?";
}

inline WeightMode parse_weight_mode(const std::string& s) {
    if (s == "estimated") return WeightMode::Estimated;
    if (s == "oracle") return WeightMode::Oracle;
    if (s == "squared-odds") return WeightMode::SquaredOdds;
    throw ConfigError("unknown weight mode '" + s + "' (valid: estimated, oracle, squared-odds)");
}

struct EstimatorSpec {
    ClassifierKind kind = ClassifierKind::LinearLogistic;
    double l1_lambda = 0.0;

    std::string label() const {
        if (kind != ClassifierKind::SparseLogistic) return to_string(kind);
        std::ostringstream s;
        s << to_string(kind) << '@' << l1_lambda;
        return s.str();
    }
};

struct ExperimentGrid {
    std::vector<std::size_t> n2_values{200};
    std::vector<std::size_t> m_values{5};
    std::vector<EstimatorSpec> estimators{EstimatorSpec{}};
    std::vector<WeightMode> weight_modes{WeightMode::Estimated};
    double alpha = 0.05;
    FitConfig fit;
    bool compute_mce = true;
};

/// Simulation batch count ceil(n2 / ln n2).
inline std::size_t simulation_k(std::size_t n2) {
    if (n2 < 3) throw ConfigError("simulation needs n2 >= 3");
    const double nd = static_cast<double>(n2);
    return static_cast<std::size_t>(std::ceil(nd / std::log(nd)));
}

struct CellSizes {
    std::size_t k = 0;
    std::size_t n_fit = 0;  // n11 = n21
    std::size_t n1 = 0;
};

inline CellSizes simulation_sizes(std::size_t n2, std::size_t m) {
    if (m < 1) throw ConfigError("m must be >= 1");
    CellSizes s;
    s.k = simulation_k(n2);
    if (s.k >= n2) throw SizingError("K >= n2 leaves no test points to fit on");
    s.n_fit = n2 - s.k;
    s.n1 = n2 + (m - 1) * s.k;
    if (s.n1 - m * s.k != s.n_fit) throw SizingError("inconsistent simulation sizes");
    return s;
}

/// Hidden layers used for a neural-network fit. Quadratic shifts (model D) and
/// the joint fit under nonlinear alternatives get a second layer.
inline std::vector<int> simulation_hidden_layers(const ModelSpec& spec, bool joint) {
    if (spec.model == Model::D) return {10, 10};
    if (joint && spec.hypothesis == Hypothesis::Alt && (spec.model == Model::B || spec.model == Model::C)) {
        return {10, 10};
    }
    return {10};
}

/// Outcome of one replication for one (estimator, weight mode).
struct ReplicationResult {
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    bool reject = false;
    double t = 0.0;
    double p_value = 1.0;
    std::optional<double> err_p;
    std::optional<double> err_v;
    std::optional<double> mce;
    std::size_t clipped_weights = 0;
};

struct ReportRow {
    std::string estimator;
    WeightMode weight_mode = WeightMode::Estimated;
    std::size_t n2 = 0;
    std::size_t m = 0;
    std::size_t k = 0;
    std::size_t reps = 0;
    std::size_t failures = 0;
    double reject_frac = 0.0;
    std::optional<double> err_p;
    std::optional<double> err_v;
    std::optional<double> mce;
    double mean_t = 0.0;
    double var_t = 0.0;
    std::vector<ReplicationResult> replications;
};

struct ExperimentReport {
    ModelSpec spec;
    ExperimentGrid grid;
    std::size_t reps = 0;
    std::uint64_t base_seed = 0;
    std::vector<ReportRow> rows;
    double wall_ms = 0.0;
};

namespace detail {

inline WeightRows oracle_weight_rows(const GeneratedData& data, const SplitPlan& plan) {
    const LabeledSample rank_train = data.train.subset(plan.rank_train);
    const LabeledSample rank_test = data.test.subset(plan.rank_test);
    const Eigen::VectorXd g_train = data.oracle.g(rank_train.features);
    const Eigen::VectorXd g_test = data.oracle.g(rank_test.features);
    WeightRows rows(plan.k);
    for (std::size_t b = 0; b < plan.k; ++b) {
        std::vector<double> g(plan.m);
        for (std::size_t l = 0; l < plan.m; ++l) g[l] = g_train(static_cast<Eigen::Index>(b * plan.m + l));
        rows[b] = batch_weights(g, g_test(static_cast<Eigen::Index>(b)));
    }
    return rows;
}

inline WeightRows oracle_score_rows(const GeneratedData& data, const SplitPlan& plan) {
    const LabeledSample rank_train = data.train.subset(plan.rank_train);
    const LabeledSample rank_test = data.test.subset(plan.rank_test);
    const Eigen::VectorXd v_train = data.oracle.v(rank_train.features, rank_train.response);
    const Eigen::VectorXd v_test = data.oracle.v(rank_test.features, rank_test.response);
    WeightRows rows(plan.k);
    for (std::size_t b = 0; b < plan.k; ++b) {
        rows[b].resize(plan.m + 1);
        for (std::size_t l = 0; l < plan.m; ++l) rows[b][l] = v_train(static_cast<Eigen::Index>(b * plan.m + l));
        rows[b][plan.m] = v_test(static_cast<Eigen::Index>(b));
    }
    return rows;
}

inline WeightRows weights_of(const ConformalRun& run) {
    WeightRows rows;
    rows.reserve(run.batches.size());
    for (const auto& b : run.batches) rows.push_back(b.weights);
    return rows;
}

inline WeightRows scores_of(const ConformalRun& run) {
    WeightRows rows;
    rows.reserve(run.batches.size());
    for (const auto& b : run.batches) rows.push_back(b.scores);
    return rows;
}

}  // namespace detail

/// Runs every (estimator, weight mode) on one replication's data. The result
/// vector is indexed estimator-major, then weight mode.
inline std::vector<ReplicationResult> run_replication(const ModelSpec& spec, const ExperimentGrid& grid,
                                                      std::size_t n2, std::size_t m, std::uint64_t seed) {
    const CellSizes sizes = simulation_sizes(n2, m);
    const std::size_t modes = grid.weight_modes.size();
    std::vector<ReplicationResult> results(grid.estimators.size() * modes);
    for (auto& r : results) r.seed = seed;

    GeneratedData data;
    std::optional<GeneratedData> holdout;
    try {
        data = generate(spec, sizes.n1, n2, seed);
        if (grid.compute_mce) holdout = generate(spec, sizes.n_fit, sizes.n_fit, derive_seed(seed, stream::holdout));
    } catch (const Error& e) {
        for (auto& r : results) {
            r.failed = true;
            r.error = std::string("generate: ") + e.what();
        }
        return results;
    }
    const SplitPlan plan = plan_split(sizes.n1, n2, m, sizes.k, seed);
    const WeightRows oracle_w = detail::oracle_weight_rows(data, plan);
    const WeightRows oracle_v = detail::oracle_score_rows(data, plan);
    const LabeledSample fit_train = data.train.subset(plan.fit_train);
    const LabeledSample fit_test = data.test.subset(plan.fit_test);

    for (std::size_t e = 0; e < grid.estimators.size(); ++e) {
        const EstimatorSpec& est = grid.estimators[e];
        FitConfig marginal_cfg = grid.fit;
        marginal_cfg.l1_lambda = est.l1_lambda;
        marginal_cfg.seed = derive_seed(seed, stream::marginal_fit, e);
        FitConfig joint_cfg = marginal_cfg;
        joint_cfg.seed = derive_seed(seed, stream::joint_fit, e);
        if (est.kind == ClassifierKind::NeuralNet) {
            marginal_cfg.hidden_layers = simulation_hidden_layers(spec, false);
            joint_cfg.hidden_layers = simulation_hidden_layers(spec, true);
        }

        // One marginal and one joint fit serve every weight mode.
        std::optional<MarginalRatio> g_hat;
        RatioModel scores;
        std::string failure;
        try {
            g_hat = estimate_marginal_ratio(fit_train, fit_test, est.kind, marginal_cfg);
            scores = estimate_conditional_ratio(fit_train, fit_test, est.kind, joint_cfg, *g_hat);
        } catch (const Error& err) {
            failure = err.what();
        }

        std::optional<double> mce_value;
        if (failure.empty() && holdout) {
            auto [hx, hy] = stack_labeled(holdout->train.features, holdout->test.features);
            mce_value = mce(*g_hat->classifier, hx, hy);
        }

        for (std::size_t w = 0; w < modes; ++w) {
            ReplicationResult& r = results[e * modes + w];
            if (!failure.empty()) {
                r.failed = true;
                r.error = failure;
                continue;
            }
            const WeightMode mode = grid.weight_modes[w];
            // Whatever g the mode selects enters both the weights and V_hat.
            RatioModel ratios;
            if (mode == WeightMode::Estimated) {
                ratios = scores;
            } else if (mode == WeightMode::SquaredOdds) {
                ratios = compose_ratio(scores.joint_classifier, miscalibrate(*g_hat, 2.0));
            } else {
                ratios = compose_ratio(scores.joint_classifier, data.oracle.g_hat);
            }
            try {
                const ConformalRun run = run_with_ratios(data.train, data.test, plan, ratios, grid.alpha, seed,
                                                         EngineOptions{true, true});
                r.reject = run.reject;
                r.t = run.t_statistic;
                r.p_value = run.p_value;
                r.clipped_weights = run.diagnostics.clipped_weights;
                r.err_p = err_p(detail::weights_of(run), oracle_w);
                if (spec.hypothesis == Hypothesis::Alt) r.err_v = err_v(detail::scores_of(run), oracle_v);
                if (mode != WeightMode::Oracle) r.mce = mce_value;
            } catch (const Error& err) {
                r.failed = true;
                r.error = err.what();
            }
        }
    }
    return results;
}

/// Runs reps replications per (n2, m) cell in parallel. Replication r uses
/// seed base_seed + r for data, split and zeta draws; results do not depend
/// on the thread count.
inline ExperimentReport run_experiment(const ModelSpec& spec, const ExperimentGrid& grid, std::size_t reps,
                                       std::uint64_t base_seed, unsigned threads = 1) {
    if (reps < 1) throw ConfigError("reps must be >= 1");
    check_alpha(grid.alpha);
    if (grid.n2_values.empty() || grid.m_values.empty() || grid.estimators.empty() || grid.weight_modes.empty()) {
        throw ConfigError("experiment grid has an empty axis");
    }
    grid.fit.validate();
    for (const auto n2 : grid.n2_values) {
        for (const auto m : grid.m_values) (void)simulation_sizes(n2, m);
    }

    const auto start = std::chrono::steady_clock::now();
    ExperimentReport report;
    report.spec = spec;
    report.grid = grid;
    report.reps = reps;
    report.base_seed = base_seed;

    const std::size_t per_rep = grid.estimators.size() * grid.weight_modes.size();
    for (const auto n2 : grid.n2_values) {
        for (const auto m : grid.m_values) {
            std::vector<std::vector<ReplicationResult>> outcomes(reps);
            parallel_for(reps, threads, [&](std::size_t r) {
                outcomes[r] = run_replication(spec, grid, n2, m, base_seed + r);
            });

            for (std::size_t cell = 0; cell < per_rep; ++cell) {
                ReportRow row;
                row.estimator = grid.estimators[cell / grid.weight_modes.size()].label();
                row.weight_mode = grid.weight_modes[cell % grid.weight_modes.size()];
                row.n2 = n2;
                row.m = m;
                row.k = simulation_k(n2);
                row.reps = reps;

                std::size_t ok = 0, rejects = 0, n_err_p = 0, n_err_v = 0, n_mce = 0;
                double sum_err_p = 0.0, sum_err_v = 0.0, sum_mce = 0.0, sum_t = 0.0, sum_t2 = 0.0;
                for (std::size_t r = 0; r < reps; ++r) {
                    const ReplicationResult& res = outcomes[r][cell];
                    row.replications.push_back(res);
                    if (res.failed) {
                        ++row.failures;
                        continue;
                    }
                    ++ok;
                    rejects += res.reject ? 1 : 0;
                    sum_t += res.t;
                    sum_t2 += res.t * res.t;
                    if (res.err_p) { sum_err_p += *res.err_p; ++n_err_p; }
                    if (res.err_v) { sum_err_v += *res.err_v; ++n_err_v; }
                    if (res.mce) { sum_mce += *res.mce; ++n_mce; }
                }
                if (ok > 0) {
                    const double n = static_cast<double>(ok);
                    row.reject_frac = static_cast<double>(rejects) / n;
                    row.mean_t = sum_t / n;
                    row.var_t = ok > 1 ? (sum_t2 - n * row.mean_t * row.mean_t) / (n - 1.0) : 0.0;
                }
                if (n_err_p > 0) row.err_p = sum_err_p / static_cast<double>(n_err_p);
                if (n_err_v > 0) row.err_v = sum_err_v / static_cast<double>(n_err_v);
                if (n_mce > 0) row.mce = sum_mce / static_cast<double>(n_mce);
                report.rows.push_back(std::move(row));
            }
        }
    }
    report.wall_ms = detail::elapsed_ms(start);
    return report;
}

// ---------------------------------------------------------------------------
// Serialization

inline const std::vector<std::string>& report_csv_columns() {
    static const std::vector<std::string> columns{"model",  "hypothesis", "estimator", "weight_mode", "n2",
                                                  "m",      "K",          "reps",      "reject_frac", "err_p",
                                                  "err_v",  "mce",        "failures"};
    return columns;
}

inline void write_report_csv(std::ostream& out, const ExperimentReport& report) {
    const auto& cols = report_csv_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    auto opt = [](const std::optional<double>& v) {
        if (!v) return std::string();
        std::ostringstream s;
        s << std::setprecision(6) << *v;
        return s.str();
    };
    for (const auto& row : report.rows) {
        out << to_string(report.spec.model) << ',' << to_string(report.spec.hypothesis) << ',' << row.estimator << ','
            << to_string(row.weight_mode) << ',' << row.n2 << ',' << row.m << ',' << row.k << ',' << row.reps << ','
            << std::setprecision(6) << row.reject_frac << ',' << opt(row.err_p) << ',' << opt(row.err_v) << ','
            << opt(row.mce) << ',' << row.failures << '\n';
    }
}

inline nlohmann::json to_json(const ReplicationResult& r) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::json j{{"seed", r.seed}, {"failed", r.failed}};
    if (r.failed) {
        j["error"] = r.error;
        return j;
    }
    j.update({{"reject", r.reject},
              {"t", r.t},
              {"p_value", r.p_value},
              {"err_p", opt(r.err_p)},
              {"err_v", opt(r.err_v)},
              {"mce", opt(r.mce)},
              {"clipped_weights", r.clipped_weights}});
    return j;
}

inline nlohmann::json to_json(const ExperimentGrid& g) {
    nlohmann::json estimators = nlohmann::json::array();
    for (const auto& e : g.estimators) estimators.push_back(e.label());
    nlohmann::json modes = nlohmann::json::array();
    for (const auto w : g.weight_modes) modes.push_back(to_string(w));
    return {{"n2", g.n2_values},
            {"m", g.m_values},
            {"estimators", estimators},
            {"weight_modes", modes},
            {"alpha", g.alpha},
            {"compute_mce", g.compute_mce}};
}

inline nlohmann::json to_json(const ExperimentReport& report, bool full = false) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : report.rows) {
        nlohmann::json j{{"estimator", row.estimator},
                         {"weight_mode", to_string(row.weight_mode)},
                         {"n2", row.n2},
                         {"m", row.m},
                         {"K", row.k},
                         {"reps", row.reps},
                         {"reject_frac", row.reject_frac},
                         {"err_p", opt(row.err_p)},
                         {"err_v", opt(row.err_v)},
                         {"mce", opt(row.mce)},
                         {"mean_t", row.mean_t},
                         {"var_t", row.var_t},
                         {"failures", row.failures}};
        if (full) {
            nlohmann::json reps = nlohmann::json::array();
            for (const auto& r : row.replications) reps.push_back(to_json(r));
            j["replications"] = std::move(reps);
        }
        rows.push_back(std::move(j));
    }
    return {{"model", to_json(report.spec)},
            {"grid", to_json(report.grid)},
            {"reps", report.reps},
            {"base_seed", report.base_seed},
            {"replication_seeds", {{"first", report.base_seed}, {"last", report.base_seed + report.reps - 1}}},
            {"rows", rows},
            {"wall_ms", report.wall_ms}};
}

}  // namespace cshift
