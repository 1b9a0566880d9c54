#include "willmore/errors.hpp"

namespace willmore {

std::string_view to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::NonPositiveImaginaryPart: return "NonPositiveImaginaryPart";
    case ErrorKind::ReductionCycle: return "ReductionCycle";
    case ErrorKind::PoleAtInput: return "PoleAtInput";
    case ErrorKind::ResiduesDoNotSumToZero: return "ResiduesDoNotSumToZero";
    case ErrorKind::DuplicatePoles: return "DuplicatePoles";
    case ErrorKind::CriticalValue: return "CriticalValue";
    case ErrorKind::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorKind::NonSimpleZero: return "NonSimpleZero";
    case ErrorKind::ContourHitsPole: return "ContourHitsPole";
    case ErrorKind::RetryExhausted: return "RetryExhausted";
    case ErrorKind::UnexpectedPreimage: return "UnexpectedPreimage";
    case ErrorKind::DegeneratePoint: return "DegeneratePoint";
    case ErrorKind::RefinementBudgetExceeded: return "RefinementBudgetExceeded";
    case ErrorKind::SolverDivergence: return "SolverDivergence";
    case ErrorKind::NonPositiveDefiniteMetric: return "NonPositiveDefiniteMetric";
    case ErrorKind::ChartPackingFailure: return "ChartPackingFailure";
    case ErrorKind::NewtonDivergence: return "NewtonDivergence";
    case ErrorKind::IllConditionedBasis: return "IllConditionedBasis";
    case ErrorKind::PathHitsPole: return "PathHitsPole";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

bool is_validation_error(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::NonPositiveImaginaryPart:
    case ErrorKind::ResiduesDoNotSumToZero:
    case ErrorKind::DuplicatePoles:
    case ErrorKind::CriticalValue:
    case ErrorKind::InvalidArgument:
    case ErrorKind::Io:
        return true;
    default:
        return false;
    }
}

} // namespace willmore
