#pragma once

#include <stdexcept>
#include <string>

namespace greenfarm {

/// Raised when an argument lies outside the domain of an operation
/// (negative rates, occupancy above the server count, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Raised when an iterative evaluation fails to converge or overflows.
/// Carries the last partial value so callers can inspect how far it got.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, double partial_value)
        : std::runtime_error(what), partial_(partial_value) {}

    [[nodiscard]] double partial_value() const noexcept { return partial_; }

private:
    double partial_;
};

/// Invalid or inconsistent configuration (simulation setup, experiment files).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed input file; the message carries the offending line number.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace greenfarm
