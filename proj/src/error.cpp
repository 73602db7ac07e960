#include "crysflow/error.hpp"

namespace crysflow {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::MissingBlock: return "MissingBlock";
        case ErrorCode::BadNumber: return "BadNumber";
        case ErrorCode::BadElement: return "BadElement";
        case ErrorCode::InvalidStructure: return "InvalidStructure";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::BadWeights: return "BadWeights";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::MissingReference: return "MissingReference";
        case ErrorCode::Infeasible: return "Infeasible";
        case ErrorCode::BadFormula: return "BadFormula";
        case ErrorCode::NonIntegerComposition: return "NonIntegerComposition";
        case ErrorCode::MissingEnergy: return "MissingEnergy";
        case ErrorCode::MissingBandgap: return "MissingBandgap";
        case ErrorCode::DivisionDomain: return "DivisionDomain";
        case ErrorCode::DuplicateName: return "DuplicateName";
        case ErrorCode::InvalidSchema: return "InvalidSchema";
        case ErrorCode::BindFailure: return "BindFailure";
        case ErrorCode::BackendUnavailable: return "BackendUnavailable";
        case ErrorCode::UnreadableTrajectory: return "UnreadableTrajectory";
        case ErrorCode::EmptyDistribution: return "EmptyDistribution";
        case ErrorCode::SpanOutOfRange: return "SpanOutOfRange";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::BadConfig: return "BadConfig";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace crysflow
