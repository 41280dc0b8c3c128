#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace candleaug {

enum class ErrorCode {
  NonPositivePrice,
  EmptySequence,
  WindowTooShort,
  ConstantSeries,
  DiagonalOutOfRange,
  ShapeMismatch,
  EmptyDataset,
  InconsistentShapes,
  InvalidConfig,
  SeedUnlabeled,
  BudgetExhausted,
  MalformedRow,
  NonMonotoneTimestamp,
  InvalidOHLC,
  InsufficientClass,
  UnpairedInput,
  DegenerateVariance,
  ScoreOutOfRange,
  CorpusTooSmall,
  UnknownSession,
  DuplicateAnswer,
  UnknownQuestion,
  SessionIncomplete,
  MalformedBody,
  IoError,
  ParseError,
};

std::string_view error_name(ErrorCode code) noexcept;

/// Domain error raised by every module. `what()` is prefixed with the error
/// name so CLI diagnostics carry it verbatim.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }
  std::string_view name() const noexcept { return error_name(code_); }

 private:
  ErrorCode code_;
};

}  // namespace candleaug
