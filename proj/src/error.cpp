#include "cdfh/error.hpp"

namespace cdfh {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::AllBackground: return "AllBackground";
    case ErrorCode::DegenerateConstant: return "DegenerateConstant";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::BadTailSpec: return "BadTailSpec";
    case ErrorCode::NonMonotone: return "NonMonotone";
    case ErrorCode::DegenerateCdf: return "DegenerateCdf";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::EmptyCohort: return "EmptyCohort";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::HeaderMismatch: return "HeaderMismatch";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::BadSpec: return "BadSpec";
    case ErrorCode::ChannelMismatch: return "ChannelMismatch";
    case ErrorCode::UsageError: return "UsageError";
  }
  return "Unknown";
}

}  // namespace cdfh
