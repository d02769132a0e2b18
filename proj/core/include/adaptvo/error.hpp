#pragma once

#include <stdexcept>
#include <string>

namespace adaptvo {

enum class ErrorCode {
  InvalidArgument,
  ImageTooSmall,
  OutOfBounds,
  MissingFrame,
  CorruptFlow,
  MalformedPoseLine,
  InsufficientCorrespondences,
  DegenerateConfiguration,
  EmptyInput,
  DuplicateWaypointTimes,
  FrameMismatch,
  EmptySequence,
  DimensionMismatch,
  LengthMismatch,
  EmptyBuffer,
  MissingReferenceRun,
  IoError,
  InvalidConfig,
  MissingFlow,
  SequenceMismatch,
  CorruptCheckpoint,
};

const char* to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI's exit-code mapping) can branch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace adaptvo
