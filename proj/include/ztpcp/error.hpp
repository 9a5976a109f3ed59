#pragma once

#include <stdexcept>
#include <string>

namespace ztpcp {

// Root of every error thrown by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid run configuration (iters <= burnin, bad split fraction, unknown key...).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Problems with input data files.
class DataError : public Error {
public:
    using Error::Error;
};

class ParseError : public DataError {
public:
    ParseError(const std::string& path, std::size_t line, const std::string& what)
        : DataError(path + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class BoundsError : public DataError {
public:
    using DataError::DataError;
};

// A distribution parameter outside its support.
class DomainError : public Error {
public:
    using Error::Error;
};

// Dimension mismatch between arguments; a programming error on the caller's side.
class ContractError : public Error {
public:
    using Error::Error;
};

// Metric undefined for the given input (e.g. single-class labels).
class MetricError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace ztpcp
