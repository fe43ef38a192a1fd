#include "msr2/error.hpp"

namespace msr2 {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedTag: return "MalformedTag";
    case ErrorCode::EmptyQuery: return "EmptyQuery";
    case ErrorCode::UnparsableAnswer: return "UnparsableAnswer";
    case ErrorCode::EmptyEvidence: return "EmptyEvidence";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::DuplicateDoc: return "DuplicateDoc";
    case ErrorCode::EmbedderUnavailable: return "EmbedderUnavailable";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::UnknownSource: return "UnknownSource";
    case ErrorCode::FormatVersion: return "FormatVersion";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::RolloutAborted: return "RolloutAborted";
    case ErrorCode::FactTooLong: return "FactTooLong";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::JudgeParseFailure: return "JudgeParseFailure";
    case ErrorCode::JudgeUnavailable: return "JudgeUnavailable";
    case ErrorCode::GeneratorUnavailable: return "GeneratorUnavailable";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::RubricModified: return "RubricModified";
    case ErrorCode::CorrelationUndefined: return "CorrelationUndefined";
    case ErrorCode::GroupTooSmall: return "GroupTooSmall";
    case ErrorCode::NonFiniteLogProb: return "NonFiniteLogProb";
    case ErrorCode::DegenerateTrajectory: return "DegenerateTrajectory";
    case ErrorCode::InfiniteKL: return "InfiniteKL";
    case ErrorCode::Divergence: return "Divergence";
    case ErrorCode::EmptyEval: return "EmptyEval";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace msr2
