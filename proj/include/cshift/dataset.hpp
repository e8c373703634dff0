#pragma once

// Labeled samples, CSV ingestion and the randomized sample split.

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cshift/error.hpp"
#include "cshift/rng.hpp"

namespace cshift {

enum class Population { Train, Test };

inline const char* to_string(Population p) { return p == Population::Train ? "train" : "test"; }

/// Covariates plus response for one population. Rows are observations.
struct LabeledSample {
    Eigen::MatrixXd features;
    Eigen::VectorXd response;
    Population population = Population::Train;
    std::vector<std::string> feature_names;
    std::string response_name = "y";

    std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }

    /// Covariates with the response appended as the last column.
    Eigen::MatrixXd joint() const {
        Eigen::MatrixXd out(features.rows(), features.cols() + 1);
        out << features, response;
        return out;
    }

    LabeledSample subset(const std::vector<std::size_t>& rows) const {
        LabeledSample out;
        out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
        out.response.resize(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto r = static_cast<Eigen::Index>(rows[i]);
            out.features.row(static_cast<Eigen::Index>(i)) = features.row(r);
            out.response(static_cast<Eigen::Index>(i)) = response(r);
        }
        out.population = population;
        out.feature_names = feature_names;
        out.response_name = response_name;
        return out;
    }
};

/// Checks the LabeledSample invariants; throws DataError on violation.
inline void validate(const LabeledSample& s) {
    if (s.features.rows() < 1 || s.features.cols() < 1) {
        throw DataError("sample must have at least one row and one covariate");
    }
    if (s.response.size() != s.features.rows()) {
        throw DataError("response length does not match number of feature rows");
    }
    if (!s.features.allFinite() || !s.response.allFinite()) {
        throw DataError("sample contains non-finite values");
    }
}

struct CsvSchema {
    /// Name of the response column. Empty selects the last column.
    std::string response_column;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            return out;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
}

inline std::optional<double> parse_real(std::string_view cell) {
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) return std::nullopt;
    return value;
}

}  // namespace detail

/// Parses CSV text. Rows and columns in error messages are 1-based, with
/// row 1 being the header.
inline LabeledSample parse_csv(std::istream& in, const CsvSchema& schema,
                               Population population, const std::string& source = "<csv>") {
    std::string line;
    if (!std::getline(in, line)) throw DataError(source + ": empty file, header row required");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    std::vector<std::string> header;
    for (const auto cell : detail::split_commas(line)) header.emplace_back(cell);

    std::size_t response_col = header.size() - 1;
    if (!schema.response_column.empty()) {
        const auto it = std::find(header.begin(), header.end(), schema.response_column);
        if (it == header.end()) {
            throw DataError(source + ": response column '" + schema.response_column +
                            "' not found in header");
        }
        response_col = static_cast<std::size_t>(it - header.begin());
    }
    if (header.size() < 2) throw DataError(source + ": need at least one covariate and a response");

    LabeledSample out;
    out.population = population;
    out.response_name = header[response_col];
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c != response_col) out.feature_names.emplace_back(header[c]);
    }

    std::vector<double> values;
    std::vector<double> responses;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_commas(line);
        if (cells.size() != header.size()) {
            throw ParseError(source + ": row " + std::to_string(row) + " has " +
                                 std::to_string(cells.size()) + " fields, expected " +
                                 std::to_string(header.size()),
                             row, 0);
        }
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto value = detail::parse_real(cells[c]);
            const std::string where = source + ": row " + std::to_string(row) + ", column " +
                                      std::to_string(c + 1) + " ('" + header[c] + "')";
            if (!value) {
                throw ParseError(where + ": cannot parse '" + std::string(cells[c]) + "' as a real",
                                 row, c + 1);
            }
            if (!std::isfinite(*value)) {
                throw ParseError(where + ": non-finite value '" + std::string(cells[c]) + "'", row,
                                 c + 1);
            }
            if (c == response_col) {
                responses.push_back(*value);
            } else {
                values.push_back(*value);
            }
        }
    }
    if (responses.empty()) throw DataError(source + ": no data rows");

    const auto n = static_cast<Eigen::Index>(responses.size());
    const auto p = static_cast<Eigen::Index>(header.size() - 1);
    out.features = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), n, p);
    out.response = Eigen::Map<Eigen::VectorXd>(responses.data(), n);
    return out;
}

inline LabeledSample load_csv(const std::string& path, const CsvSchema& schema,
                              Population population = Population::Train) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    return parse_csv(in, schema, population, path);
}

/// Writes covariates then the response, `precision` significant digits.
inline void write_csv(std::ostream& out, const LabeledSample& s, int precision = 17) {
    for (std::size_t c = 0; c < s.dim(); ++c) {
        out << (c < s.feature_names.size() ? s.feature_names[c] : "x" + std::to_string(c + 1))
            << ',';
    }
    out << s.response_name << '\n';
    out << std::setprecision(precision);
    for (Eigen::Index i = 0; i < s.features.rows(); ++i) {
        for (Eigen::Index j = 0; j < s.features.cols(); ++j) out << s.features(i, j) << ',';
        out << s.response(i) << '\n';
    }
}

inline void write_csv(const std::string& path, const LabeledSample& s, int precision = 17) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    write_csv(out, s, precision);
}

/// 64-bit FNV-1a over canonicalized CSV bytes: line endings normalized to
/// '\n', trailing whitespace and blank lines dropped.
inline std::uint64_t fingerprint_csv(std::istream& in, std::uint64_t hash = 0xCBF29CE484222325ULL) {
    auto mix = [&hash](unsigned char byte) {
        hash ^= byte;
        hash *= 0x100000001B3ULL;
    };
    std::string line;
    while (std::getline(in, line)) {
        const auto t = detail::trim(line);
        if (t.empty()) continue;
        for (const char ch : t) mix(static_cast<unsigned char>(ch));
        mix('\n');
    }
    return hash;
}

inline std::uint64_t fingerprint_file(const std::string& path,
                                      std::uint64_t hash = 0xCBF29CE484222325ULL) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    return fingerprint_csv(in, hash);
}

// ---------------------------------------------------------------------------
// Sample splitting

/// Index sets of the split. All indices are zero-based.
///
/// fit_train / fit_test feed the density-ratio fits; rank_test[k] is paired
/// with batches[k], and the batches partition rank_train.
struct SplitPlan {
    std::uint64_t seed = 0;
    std::size_t m = 0;
    std::size_t k = 0;
    std::vector<std::size_t> fit_train;
    std::vector<std::size_t> rank_train;
    std::vector<std::size_t> fit_test;
    std::vector<std::size_t> rank_test;
    std::vector<std::vector<std::size_t>> batches;

    friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

/// Builds the random partition. Requires m, K >= 1, mK <= n1 - 1 and
/// K <= n2 - 1 so that both fitting subsamples are non-empty.
inline SplitPlan plan_split(std::size_t n1, std::size_t n2, std::size_t m, std::size_t k,
                            std::uint64_t seed) {
    if (m < 1) throw SizingError("batch size m must be >= 1");
    if (k < 1) throw SizingError("batch count K must be >= 1");
    if (n1 < 1 || m * k > n1 - 1) {
        throw SizingError("infeasible split: need m*K <= n1-1 but m*K=" + std::to_string(m * k) +
                          " and n1-1=" + std::to_string(n1 == 0 ? 0 : n1 - 1));
    }
    if (n2 < 1 || k > n2 - 1) {
        throw SizingError("infeasible split: need K <= n2-1 but K=" + std::to_string(k) +
                          " and n2-1=" + std::to_string(n2 == 0 ? 0 : n2 - 1));
    }

    Rng rng(seed, stream::split);
    auto permutation = [&rng](std::size_t n) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        for (std::size_t i = n; i > 1; --i) {
            std::swap(idx[i - 1], idx[rng.integer(0, i - 1)]);
        }
        return idx;
    };

    SplitPlan plan;
    plan.seed = seed;
    plan.m = m;
    plan.k = k;

    const auto train_perm = permutation(n1);
    plan.rank_train.assign(train_perm.begin(), train_perm.begin() + static_cast<std::ptrdiff_t>(m * k));
    plan.fit_train.assign(train_perm.begin() + static_cast<std::ptrdiff_t>(m * k), train_perm.end());
    std::sort(plan.fit_train.begin(), plan.fit_train.end());

    const auto test_perm = permutation(n2);
    plan.rank_test.assign(test_perm.begin(), test_perm.begin() + static_cast<std::ptrdiff_t>(k));
    plan.fit_test.assign(test_perm.begin() + static_cast<std::ptrdiff_t>(k), test_perm.end());
    std::sort(plan.fit_test.begin(), plan.fit_test.end());

    // rank_train is already in random order, so consecutive chunks form a
    // uniformly random partition into batches.
    plan.batches.resize(k);
    for (std::size_t b = 0; b < k; ++b) {
        plan.batches[b].assign(plan.rank_train.begin() + static_cast<std::ptrdiff_t>(b * m),
                               plan.rank_train.begin() + static_cast<std::ptrdiff_t>((b + 1) * m));
    }
    return plan;
}

/// Default number of ranking batches: min(ceil(n2 / ln n2), floor(n1 / 2m)),
/// capped at n2 - 1. Natural log.
inline std::size_t default_k(std::size_t n2, std::size_t n1, std::size_t m) {
    if (n2 < 3) throw SizingError("default K needs n2 >= 3");
    if (m < 1 || n1 < 2 * m + 1) throw SizingError("default K needs n1 >= 2m+1");
    const double nd = static_cast<double>(n2);
    const auto by_test = static_cast<std::size_t>(std::ceil(nd / std::log(nd)));
    const std::size_t by_train = n1 / (2 * m);
    return std::min({by_test, by_train, n2 - 1});
}

inline nlohmann::json to_json(const SplitPlan& plan) {
    return {{"seed", plan.seed},           {"m", plan.m},
            {"K", plan.k},                 {"i11", plan.fit_train},
            {"i12", plan.rank_train},      {"i21", plan.fit_test},
            {"i22", plan.rank_test},       {"batches", plan.batches}};
}

inline SplitPlan split_plan_from_json(const nlohmann::json& j) {
    SplitPlan plan;
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.m = j.at("m").get<std::size_t>();
    plan.k = j.at("K").get<std::size_t>();
    plan.fit_train = j.at("i11").get<std::vector<std::size_t>>();
    plan.rank_train = j.at("i12").get<std::vector<std::size_t>>();
    plan.fit_test = j.at("i21").get<std::vector<std::size_t>>();
    plan.rank_test = j.at("i22").get<std::vector<std::size_t>>();
    plan.batches = j.at("batches").get<std::vector<std::vector<std::size_t>>>();
    return plan;
}

}  // namespace cshift
