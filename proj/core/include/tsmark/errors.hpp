#pragma once

#include <stdexcept>
#include <string>

namespace tsmark {

/// Invalid configuration or usage (CLI exit code 1).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or inconsistent data: parse failures, schema violations,
/// fingerprint mismatches (CLI exit code 2).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numeric failure such as a non-finite gradient or a singular solve
/// (CLI exit code 3).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace tsmark
