#pragma once

#include <stdexcept>
#include <string>

namespace crowdps {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad configuration: unknown options, inconsistent parameters, missing files.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// Malformed or inconsistent input data.
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg) {}
};

/// Numerical failure: singular systems, degenerate weights, failed residual checks.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

} // namespace crowdps
