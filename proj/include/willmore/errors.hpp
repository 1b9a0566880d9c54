#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace willmore {

enum class ErrorKind {
    NonPositiveImaginaryPart,
    ReductionCycle,
    PoleAtInput,
    ResiduesDoNotSumToZero,
    DuplicatePoles,
    CriticalValue,
    ConvergenceFailure,
    NonSimpleZero,
    ContourHitsPole,
    RetryExhausted,
    UnexpectedPreimage,
    DegeneratePoint,
    RefinementBudgetExceeded,
    SolverDivergence,
    NonPositiveDefiniteMetric,
    ChartPackingFailure,
    NewtonDivergence,
    IllConditionedBasis,
    PathHitsPole,
    InvalidArgument,
    Io,
};

std::string_view to_string(ErrorKind kind);

// True for errors caused by bad input rather than numerical breakdown.
bool is_validation_error(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind)
    {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace willmore
