#include "adaptvo/error.hpp"

namespace adaptvo {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::MissingFrame: return "MissingFrame";
    case ErrorCode::CorruptFlow: return "CorruptFlow";
    case ErrorCode::MalformedPoseLine: return "MalformedPoseLine";
    case ErrorCode::InsufficientCorrespondences: return "InsufficientCorrespondences";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DuplicateWaypointTimes: return "DuplicateWaypointTimes";
    case ErrorCode::FrameMismatch: return "FrameMismatch";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyBuffer: return "EmptyBuffer";
    case ErrorCode::MissingReferenceRun: return "MissingReferenceRun";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::MissingFlow: return "MissingFlow";
    case ErrorCode::SequenceMismatch: return "SequenceMismatch";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace adaptvo
