// cshift: command-line front end.
//
//   cshift test      --train a.csv --test b.csv [--m 10] [--b 9] ...
//   cshift simulate  --model A --hypothesis null --n2 200 --m 5 --reps 200 ...
//   cshift aggregate run1.json run2.json ...   (or a directory)
//
// Exit status: 0 on success whatever the decision, 2 configuration error,
// 3 data error, 4 numerical failure, 1 anything else.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cshift/cshift.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TestArgs {
    std::string train;
    std::string test;
    std::string response;
    std::size_t m = 10;
    std::size_t k = 0;
    double alpha = 0.05;
    std::string estimator = "ll";
    double l1_lambda = 0.0;
    std::vector<int> hidden{10};
    bool equal_marginals = false;
    bool no_clip = false;
    std::size_t b = cshift::default_aggregation_b;
    std::uint64_t seed = 0;
    unsigned threads = cshift::default_thread_count();
    std::string out;
    std::string format = "json";
};

struct SimulateArgs {
    std::string model = "A";
    std::string hypothesis = "null";
    std::size_t p = 5;
    std::vector<std::size_t> n2{200};
    std::vector<std::size_t> m{5};
    std::vector<std::string> estimators{"ll"};
    std::vector<double> l1_lambdas{0.0};
    std::vector<std::string> weights{"estimated"};
    double alpha = 0.05;
    std::size_t reps = 100;
    bool no_filter = false;
    bool no_mce = false;
    std::uint64_t seed = 0;
    unsigned threads = cshift::default_thread_count();
    std::string out;
    std::string format = "csv";
    bool full = false;
};

struct AggregateArgs {
    std::vector<std::string> inputs;
    std::string out;
    std::string format = "json";
};

std::string hex64(std::uint64_t v) {
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << v;
    return s.str();
}

void check_format(const std::string& format) {
    if (format != "json" && format != "csv") throw cshift::ConfigError("--format must be json or csv");
}

/// Writes to --out, or stdout when no path is given.
void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(path);
    if (!f) throw cshift::DataError("cannot write " + path);
    f << text;
    if (!f) throw cshift::DataError("failed writing " + path);
}

template <typename F>
auto stage(const std::string& name, F&& body) {
    try {
        return body();
    } catch (const cshift::Error& e) {
        cshift::rethrow_with_context(e, name);
    }
}

// ---------------------------------------------------------------------------

json test_config_json(const TestArgs& a) {
    return {{"command", "test"},   {"train", a.train},
            {"test", a.test},      {"response", a.response.empty() ? json(nullptr) : json(a.response)},
            {"m", a.m},            {"K", a.k == 0 ? json("default") : json(a.k)},
            {"alpha", a.alpha},    {"estimator", a.estimator},
            {"l1_lambda", a.l1_lambda}, {"hidden_layers", a.hidden},
            {"equal_marginals", a.equal_marginals}, {"clip_estimated_g", !a.no_clip},
            {"b", a.b},            {"seed", a.seed},
            {"threads", a.threads}, {"format", a.format}};
}

int cmd_test(const TestArgs& a) {
    cshift::check_alpha(a.alpha);
    check_format(a.format);
    if (a.b < 1) throw cshift::ConfigError("--b must be >= 1");

    cshift::TestConfig cfg;
    cfg.m = a.m;
    cfg.k = a.k;
    cfg.alpha = a.alpha;
    cfg.classifier = cshift::parse_classifier_kind(a.estimator);
    cfg.fit.l1_lambda = a.l1_lambda;
    cfg.fit.hidden_layers = a.hidden;
    cfg.equal_marginals = a.equal_marginals;
    cfg.clip_estimated_g = !a.no_clip;
    cfg.validate();

    const cshift::CsvSchema schema{a.response};
    const auto train = stage("loading --train", [&] { return cshift::load_csv(a.train, schema, cshift::Population::Train); });
    const auto test = stage("loading --test", [&] { return cshift::load_csv(a.test, schema, cshift::Population::Test); });
    if (train.feature_names != test.feature_names) {
        throw cshift::DataError("train and test CSVs have different feature columns");
    }
    const std::uint64_t train_hash = cshift::fingerprint_file(a.train);
    const std::uint64_t test_hash = cshift::fingerprint_file(a.test);
    const std::uint64_t data_hash = cshift::fingerprint_file(a.test, cshift::fingerprint_file(a.train));

    std::vector<cshift::ConformalRun> runs(a.b);
    stage("running the test", [&] {
        cshift::parallel_for(a.b, a.threads, [&](std::size_t i) {
            cshift::TestConfig c = cfg;
            c.seed = a.seed + i;
            runs[i] = cshift::run_test(train, test, c);
        });
        return 0;
    });

    std::vector<double> p_values;
    for (const auto& r : runs) p_values.push_back(r.p_value);
    const double combined = cshift::median_p(p_values);

    if (a.format == "csv") {
        std::ostringstream s;
        s << "# cshift " << cshift::version() << " data_fingerprint " << hex64(data_hash) << '\n';
        s << "# config " << test_config_json(a).dump() << '\n';
        s << "seed,m,K,t,p_value,reject,warnings\n";
        s << std::setprecision(17);
        for (const auto& r : runs) {
            s << r.seed << ',' << r.m << ',' << r.k << ',' << r.t_statistic << ',' << r.p_value << ','
              << (r.reject ? "true" : "false") << ',' << r.diagnostics.warnings.size() << '\n';
        }
        s << "combined,,,," << combined << ',' << (combined <= a.alpha ? "true" : "false") << ",\n";
        emit(a.out, s.str());
    } else {
        json j{{"version", cshift::version()},
               {"config", test_config_json(a)},
               {"data_fingerprint", hex64(data_hash)},
               {"inputs",
                {{"train", {{"path", a.train}, {"rows", train.size()}, {"fingerprint", hex64(train_hash)}}},
                 {"test", {{"path", a.test}, {"rows", test.size()}, {"fingerprint", hex64(test_hash)}}}}},
               {"B", a.b},
               {"p_values", p_values},
               {"combined_p", combined},
               {"combined_reject", combined <= a.alpha},
               {"runs", json::array()}};
        for (const auto& r : runs) j["runs"].push_back(cshift::to_json(r));
        emit(a.out, j.dump(2) + "\n");
    }
    for (const auto& r : runs) {
        for (const auto& w : r.diagnostics.warnings) std::cerr << "warning (seed " << r.seed << "): " << w << '\n';
    }
    std::cerr << "B=" << a.b << " combined p=" << combined << (combined <= a.alpha ? " (reject)" : " (no rejection)")
              << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

json simulate_config_json(const SimulateArgs& a) {
    return {{"command", "simulate"}, {"model", a.model},   {"hypothesis", a.hypothesis},
            {"p", a.p},              {"n2", a.n2},         {"m", a.m},
            {"estimators", a.estimators}, {"l1_lambdas", a.l1_lambdas}, {"weights", a.weights},
            {"alpha", a.alpha},      {"reps", a.reps},     {"filter", !a.no_filter},
            {"mce", !a.no_mce},      {"seed", a.seed},     {"threads", a.threads},
            {"format", a.format},    {"full", a.full}};
}

int cmd_simulate(const SimulateArgs& a) {
    cshift::check_alpha(a.alpha);
    check_format(a.format);
    const auto model = cshift::parse_model(a.model);
    const auto hypothesis = cshift::parse_hypothesis(a.hypothesis);
    if (a.reps < 1) throw cshift::ConfigError("--reps must be >= 1");

    cshift::ModelSpec spec = cshift::ModelSpec::make(model, hypothesis, a.seed, a.p);
    spec.filter = !a.no_filter;

    cshift::ExperimentGrid grid;
    grid.n2_values = a.n2;
    grid.m_values = a.m;
    grid.alpha = a.alpha;
    grid.compute_mce = !a.no_mce;
    grid.estimators.clear();
    for (const auto& name : a.estimators) {
        const auto kind = cshift::parse_classifier_kind(name);
        if (kind == cshift::ClassifierKind::SparseLogistic) {
            for (double lambda : a.l1_lambdas) grid.estimators.push_back({kind, lambda});
        } else {
            grid.estimators.push_back({kind, 0.0});
        }
    }
    grid.weight_modes.clear();
    for (const auto& w : a.weights) grid.weight_modes.push_back(cshift::parse_weight_mode(w));

    const auto report = stage("simulation", [&] { return cshift::run_experiment(spec, grid, a.reps, a.seed, a.threads); });

    for (const auto& row : report.rows) {
        std::cout << "model " << cshift::to_string(model) << '/' << cshift::to_string(hypothesis) << "  "
                  << row.estimator << '+' << cshift::to_string(row.weight_mode) << "  n2=" << row.n2 << " m=" << row.m
                  << " K=" << row.k << "  reject=" << std::fixed << std::setprecision(3) << row.reject_frac;
        if (row.err_p) std::cout << " err_p=" << *row.err_p;
        if (row.err_v) std::cout << " err_v=" << *row.err_v;
        if (row.mce) std::cout << " mce=" << *row.mce;
        std::cout << " failures=" << row.failures << std::defaultfloat << '\n';
    }

    std::string text;
    if (a.format == "csv") {
        std::ostringstream s;
        s << "# cshift " << cshift::version() << '\n';
        s << "# config " << simulate_config_json(a).dump() << '\n';
        s << "# model " << cshift::to_json(spec).dump() << '\n';
        cshift::write_report_csv(s, report);
        text = s.str();
    } else {
        json j = cshift::to_json(report, a.full);
        j["version"] = cshift::version();
        j["config"] = simulate_config_json(a);
        text = j.dump(2) + "\n";
    }
    if (a.out.empty()) {
        std::cerr << "(no --out given; report not written)\n";
    } else {
        emit(a.out, text);
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct LoadedRun {
    std::string source;
    std::string fingerprint;
    std::vector<double> p_values;
};

LoadedRun load_run_report(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw cshift::DataError("cannot open " + path.string());
    json j;
    try {
        j = json::parse(f);
    } catch (const json::exception& e) {
        throw cshift::DataError(path.string() + ": not valid JSON (" + e.what() + ")");
    }
    LoadedRun run;
    run.source = path.string();
    if (!j.contains("data_fingerprint")) throw cshift::DataError(path.string() + ": no data_fingerprint field");
    run.fingerprint = j.at("data_fingerprint").get<std::string>();
    try {
        if (j.contains("runs")) {
            for (const auto& r : j.at("runs")) run.p_values.push_back(r.at("p_value").get<double>());
        } else {
            run.p_values.push_back(j.at("p_value").get<double>());
        }
    } catch (const json::exception& e) {
        throw cshift::DataError(path.string() + ": missing p_value (" + e.what() + ")");
    }
    return run;
}

int cmd_aggregate(const AggregateArgs& a) {
    check_format(a.format);
    std::vector<fs::path> files;
    for (const auto& in : a.inputs) {
        const fs::path p(in);
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& entry : fs::directory_iterator(p)) {
                if (entry.is_regular_file() && entry.path().extension() == ".json") found.push_back(entry.path());
            }
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else if (fs::exists(p)) {
            files.push_back(p);
        } else {
            throw cshift::DataError("no such file or directory: " + in);
        }
    }
    if (files.empty()) throw cshift::DataError("no run reports to aggregate");

    std::vector<LoadedRun> runs;
    for (const auto& f : files) runs.push_back(load_run_report(f));
    for (const auto& r : runs) {
        if (r.fingerprint != runs.front().fingerprint) {
            throw cshift::DataError("reports come from different data: " + runs.front().source + " has fingerprint " +
                                    runs.front().fingerprint + " but " + r.source + " has " + r.fingerprint);
        }
    }
    std::vector<double> p_values;
    std::vector<std::string> sources;
    for (const auto& r : runs) {
        p_values.insert(p_values.end(), r.p_values.begin(), r.p_values.end());
        sources.push_back(r.source);
    }
    const double combined = cshift::median_p(p_values);

    if (a.format == "csv") {
        std::ostringstream s;
        s << std::setprecision(17) << "B,combined_p,data_fingerprint\n"
          << p_values.size() << ',' << combined << ',' << runs.front().fingerprint << '\n';
        emit(a.out, s.str());
    } else {
        const json j{{"version", cshift::version()},   {"B", p_values.size()},
                     {"p_values", p_values},           {"combined_p", combined},
                     {"data_fingerprint", runs.front().fingerprint}, {"inputs", sources}};
        emit(a.out, j.dump(2) + "\n");
    }
    return 0;
}

int exit_code_for(const cshift::Error& e) {
    if (dynamic_cast<const cshift::ConfigError*>(&e)) return 2;
    if (dynamic_cast<const cshift::DataError*>(&e)) return 3;
    if (dynamic_cast<const cshift::NumericError*>(&e)) return 4;
    return 1;
}

const char* category(const cshift::Error& e) {
    switch (exit_code_for(e)) {
        case 2: return "configuration error";
        case 3: return "data error";
        case 4: return "numerical failure";
        default: return "error";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conformal test of covariate shift"};
    app.set_version_flag("--version", std::string(cshift::version()));
    app.require_subcommand(1);

    TestArgs t;
    auto* test = app.add_subcommand("test", "Test whether Y|X is the same in two CSV samples");
    test->add_option("--train", t.train, "Training CSV (header row, numeric columns)")->required();
    test->add_option("--test", t.test, "Test CSV with the same columns")->required();
    test->add_option("--response", t.response, "Response column name (default: last column)");
    test->add_option("--m", t.m, "Training points per ranking minibatch")->capture_default_str();
    test->add_option("--k", t.k, "Number of minibatches (0: default)")->capture_default_str();
    test->add_option("--alpha", t.alpha, "Test level")->capture_default_str();
    test->add_option("--estimator", t.estimator, "Classifier: ll, ql, nn or sparse-ll")->capture_default_str();
    test->add_option("--l1-lambda", t.l1_lambda, "L1 penalty for sparse-ll")->capture_default_str();
    test->add_option("--hidden", t.hidden, "Hidden layer widths for nn")->delimiter(',')->capture_default_str();
    test->add_flag("--equal-marginals", t.equal_marginals, "Assume equal X marginals (weights 1/(m+1))");
    test->add_flag("--no-clip", t.no_clip, "Do not clip estimated weights to [0.01, 100]");
    test->add_option("--b", t.b, "Replays of the random split, combined by median p-value")->capture_default_str();
    test->add_option("--seed", t.seed, "Base seed; replay i uses seed+i")->capture_default_str();
    test->add_option("--threads", t.threads, "Worker threads")->capture_default_str();
    test->add_option("--out", t.out, "Report path (default: stdout)");
    test->add_option("--format", t.format, "json or csv")->capture_default_str();

    SimulateArgs s;
    auto* sim = app.add_subcommand("simulate", "Replicated experiments on simulation models A-D");
    sim->add_option("--model", s.model, "A, B, C or D")->capture_default_str();
    sim->add_option("--hypothesis", s.hypothesis, "null or alt")->capture_default_str();
    sim->add_option("--p", s.p, "Covariate dimension")->capture_default_str();
    sim->add_option("--n2", s.n2, "Test sample sizes")->delimiter(',')->capture_default_str();
    sim->add_option("--m", s.m, "Minibatch sizes")->delimiter(',')->capture_default_str();
    sim->add_option("--estimator", s.estimators, "Classifiers: ll, ql, nn, sparse-ll")->delimiter(',')->capture_default_str();
    sim->add_option("--l1-lambda", s.l1_lambdas, "L1 penalties for sparse-ll (one row each)")->delimiter(',')->capture_default_str();
    sim->add_option("--weights", s.weights, "estimated, oracle or squared-odds")->delimiter(',')->capture_default_str();
    sim->add_option("--alpha", s.alpha, "Test level")->capture_default_str();
    sim->add_option("--reps", s.reps, "Replications per grid cell")->capture_default_str();
    sim->add_flag("--no-filter", s.no_filter, "Keep points with extreme true ratios");
    sim->add_flag("--no-mce", s.no_mce, "Skip the holdout classification error");
    sim->add_option("--seed", s.seed, "Base seed; replication r uses seed+r")->capture_default_str();
    sim->add_option("--threads", s.threads, "Worker threads")->capture_default_str();
    sim->add_option("--out", s.out, "Report path");
    sim->add_option("--format", s.format, "csv or json")->capture_default_str();
    sim->add_flag("--full", s.full, "Per-replication detail in JSON output");

    AggregateArgs g;
    auto* agg = app.add_subcommand("aggregate", "Combine p-values of run reports by twice their median");
    agg->add_option("inputs", g.inputs, "Run report files or directories")->required();
    agg->add_option("--out", g.out, "Output path (default: stdout)");
    agg->add_option("--format", g.format, "json or csv")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        if (command == "test") return cmd_test(t);
        if (command == "simulate") return cmd_simulate(s);
        return cmd_aggregate(g);
    } catch (const cshift::Error& e) {
        std::cerr << "cshift " << command << ": " << category(e) << ": " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "cshift " << command << ": internal error: " << e.what() << '\n';
        return 1;
    }
}
