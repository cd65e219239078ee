#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace roughlv {

/// Broad failure class, used by the command-line front end to pick an exit code.
enum class ErrorCategory { config, data, numerical };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    [[nodiscard]] ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(ErrorCategory::numerical, what) {}
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(ErrorCategory::data, what + " (line " + std::to_string(line) + ")"), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class LookupError : public Error {
public:
    explicit LookupError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

/// Non-finite state in a Monte Carlo run.
class SimulationError : public Error {
public:
    SimulationError(const std::string& what, std::size_t step)
        : Error(ErrorCategory::numerical, what + " at step " + std::to_string(step)), step_(step) {}

    [[nodiscard]] std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Divergence of a deterministic solver (Riccati, PDE).
class SolverError : public Error {
public:
    SolverError(const std::string& what, std::size_t step)
        : Error(ErrorCategory::numerical, what + " at step " + std::to_string(step)), step_(step) {}

    [[nodiscard]] std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class PricingError : public Error {
public:
    explicit PricingError(const std::string& what) : Error(ErrorCategory::numerical, what) {}
};

/// Price outside the no-arbitrage band of the Black formula.
class InversionError : public Error {
public:
    enum class Bound { lower, upper };

    InversionError(const std::string& what, Bound bound)
        : Error(ErrorCategory::numerical, what), bound_(bound) {}

    [[nodiscard]] Bound bound() const noexcept { return bound_; }

private:
    Bound bound_;
};

/// Non-positive Dupire denominator (butterfly or calendar violation).
class ArbitrageError : public Error {
public:
    ArbitrageError(const std::string& what, double t, double k)
        : Error(ErrorCategory::numerical, what), t_(t), k_(k) {}

    [[nodiscard]] double time() const noexcept { return t_; }
    [[nodiscard]] double strike() const noexcept { return k_; }

private:
    double t_;
    double k_;
};

class CalibrationError : public Error {
public:
    CalibrationError(const std::string& what, std::vector<std::vector<double>> residuals)
        : Error(ErrorCategory::numerical, what), residuals_(std::move(residuals)) {}

    [[nodiscard]] const std::vector<std::vector<double>>& residuals() const noexcept { return residuals_; }

private:
    std::vector<std::vector<double>> residuals_;
};

class EstimatorError : public Error {
public:
    explicit EstimatorError(const std::string& what) : Error(ErrorCategory::numerical, what) {}
};

class RegressionError : public Error {
public:
    RegressionError(const std::string& what, double closest_slope)
        : Error(ErrorCategory::numerical, what), closest_slope_(closest_slope) {}

    [[nodiscard]] double closest_slope() const noexcept { return closest_slope_; }

private:
    double closest_slope_;
};

}  // namespace roughlv
