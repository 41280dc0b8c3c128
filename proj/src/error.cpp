#include "candleaug/error.hpp"

namespace candleaug {

std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonPositivePrice: return "NonPositivePrice";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::WindowTooShort: return "WindowTooShort";
    case ErrorCode::ConstantSeries: return "ConstantSeries";
    case ErrorCode::DiagonalOutOfRange: return "DiagonalOutOfRange";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::InconsistentShapes: return "InconsistentShapes";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::SeedUnlabeled: return "SeedUnlabeled";
    case ErrorCode::BudgetExhausted: return "BudgetExhausted";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::NonMonotoneTimestamp: return "NonMonotoneTimestamp";
    case ErrorCode::InvalidOHLC: return "InvalidOHLC";
    case ErrorCode::InsufficientClass: return "InsufficientClass";
    case ErrorCode::UnpairedInput: return "UnpairedInput";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::ScoreOutOfRange: return "ScoreOutOfRange";
    case ErrorCode::CorpusTooSmall: return "CorpusTooSmall";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::DuplicateAnswer: return "DuplicateAnswer";
    case ErrorCode::UnknownQuestion: return "UnknownQuestion";
    case ErrorCode::SessionIncomplete: return "SessionIncomplete";
    case ErrorCode::MalformedBody: return "MalformedBody";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(error_name(code)) + ": " + detail), code_(code) {}

}  // namespace candleaug
