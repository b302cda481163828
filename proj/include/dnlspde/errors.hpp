#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dnlspde {

/// Raised when a norm or growth exponent is outside its admissible range.
class InvalidExponentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Failure of an iterative solve (Newton, bisection, ...).
///
/// Carries the residual history so callers can judge how close the solve got,
/// plus optional context (time step, path seed) filled in as the error
/// propagates outward.
class SolveError : public std::runtime_error {
public:
    enum class Kind { nonconvergence, divergence };

    SolveError(Kind kind, std::string message, std::vector<double> residual_history = {})
        : std::runtime_error(message)
        , kind_(kind)
        , message_(std::move(message))
        , residuals_(std::move(residual_history)) {}

    Kind kind() const noexcept { return kind_; }
    const std::vector<double>& residual_history() const noexcept { return residuals_; }
    std::optional<std::size_t> step() const noexcept { return step_; }
    std::optional<std::uint64_t> path_seed() const noexcept { return seed_; }

    const char* what() const noexcept override { return full_.empty() ? message_.c_str() : full_.c_str(); }

    SolveError& with_step(std::size_t step) {
        step_ = step;
        rebuild();
        return *this;
    }
    SolveError& with_seed(std::uint64_t seed) {
        seed_ = seed;
        rebuild();
        return *this;
    }

private:
    void rebuild() {
        full_ = message_;
        if (step_) full_ += " [step " + std::to_string(*step_) + "]";
        if (seed_) full_ += " [path seed " + std::to_string(*seed_) + "]";
    }

    Kind kind_;
    std::string message_;
    std::string full_;
    std::vector<double> residuals_;
    std::optional<std::size_t> step_;
    std::optional<std::uint64_t> seed_;
};

/// Scalar root finding gave up; the last bracket still contains the root.
class BracketError : public std::runtime_error {
public:
    BracketError(const std::string& msg, double lo, double hi)
        : std::runtime_error(msg), lo_(lo), hi_(hi) {}
    double lower() const noexcept { return lo_; }
    double upper() const noexcept { return hi_; }

private:
    double lo_;
    double hi_;
};

} // namespace dnlspde
