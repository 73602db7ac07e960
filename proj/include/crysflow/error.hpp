#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace crysflow {

enum class ErrorCode {
    MissingBlock,
    BadNumber,
    BadElement,
    InvalidStructure,
    IndexOutOfRange,
    BadWeights,
    NoConvergence,
    MissingReference,
    Infeasible,
    BadFormula,
    NonIntegerComposition,
    MissingEnergy,
    MissingBandgap,
    DivisionDomain,
    DuplicateName,
    InvalidSchema,
    BindFailure,
    BackendUnavailable,
    UnreadableTrajectory,
    EmptyDistribution,
    SpanOutOfRange,
    EmptyInput,
    BadConfig,
    Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Domain error carrying a machine-readable code. Every module throws this;
/// the CLI maps it to exit status 1 and the tool server to an is_error result.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace crysflow
