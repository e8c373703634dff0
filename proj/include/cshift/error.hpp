#pragma once

#include <stdexcept>
#include <string>

namespace cshift {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid user-supplied configuration (sizes, levels, unknown enum names).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Infeasible (m, K) for the available sample sizes.
class SizingError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Problems with input data: I/O, parsing, non-finite values, shape mismatch.
class DataError : public Error {
public:
    using Error::Error;
};

class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::size_t row, std::size_t column)
        : DataError(what), row_(row), column_(column) {}

    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

/// Numerical failure: diverging optimizers, degenerate weights.
class NumericError : public Error {
public:
    using Error::Error;
};

class DivergenceError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Rethrows `e` as the same error category with "stage: " prepended.
[[noreturn]] inline void rethrow_with_context(const Error& e, const std::string& stage) {
    const std::string msg = stage + ": " + e.what();
    if (dynamic_cast<const SizingError*>(&e)) throw SizingError(msg);
    if (dynamic_cast<const ConfigError*>(&e)) throw ConfigError(msg);
    if (const auto* p = dynamic_cast<const ParseError*>(&e)) throw ParseError(msg, p->row(), p->column());
    if (dynamic_cast<const DataError*>(&e)) throw DataError(msg);
    if (dynamic_cast<const DivergenceError*>(&e)) throw DivergenceError(msg);
    if (dynamic_cast<const NumericError*>(&e)) throw NumericError(msg);
    throw Error(msg);
}

}  // namespace cshift
