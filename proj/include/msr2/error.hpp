#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace msr2 {

enum class ErrorCode {
  MalformedTag,
  EmptyQuery,
  UnparsableAnswer,
  EmptyEvidence,
  EmptyCorpus,
  DuplicateDoc,
  EmbedderUnavailable,
  DimMismatch,
  UnknownSource,
  FormatVersion,
  ParseError,
  RolloutAborted,
  FactTooLong,
  InvalidConfig,
  JudgeParseFailure,
  JudgeUnavailable,
  GeneratorUnavailable,
  ProtocolError,
  RubricModified,
  CorrelationUndefined,
  GroupTooSmall,
  NonFiniteLogProb,
  DegenerateTrajectory,
  InfiniteKL,
  Divergence,
  EmptyEval,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace msr2
