#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace blfmrac {

enum class ErrorKind {
    InvalidInput,
    NumericalFailure,
    InfeasibleModel,
    BarrierBreach,
    InfeasibleC1,
    InfeasibleC2,
    DisturbanceMargin,
    StepFailure,
    InvalidScenario,
    Parse,
    Validation,
};

std::string_view to_string(ErrorKind kind);

/// Base of every error raised by the library. `kind()` lets callers branch
/// without a cascade of catch clauses.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// A barrier denominator fell inside its guard band.
class BarrierBreach : public Error {
public:
    BarrierBreach(std::string barrier, double value, double bound)
        : Error(ErrorKind::BarrierBreach,
                "barrier breach on '" + barrier + "': " + std::to_string(value) +
                    " vs bound " + std::to_string(bound)),
          barrier_(std::move(barrier)),
          value_(value),
          bound_(bound) {}

    const std::string& barrier() const noexcept { return barrier_; }
    double value() const noexcept { return value_; }
    double bound() const noexcept { return bound_; }

private:
    std::string barrier_;
    double value_;
    double bound_;
};

/// Raised by the integrator once retry-halving hits the minimum step.
class StepFailure : public Error {
public:
    StepFailure(std::string barrier, double t, double dt)
        : Error(ErrorKind::StepFailure,
                "step failure at t=" + std::to_string(t) + " (dt=" + std::to_string(dt) +
                    "): barrier '" + barrier + "' breached below minimum step"),
          barrier_(std::move(barrier)),
          t_(t) {}

    const std::string& barrier() const noexcept { return barrier_; }
    double time() const noexcept { return t_; }

private:
    std::string barrier_;
    double t_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace blfmrac
