#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace glasshands {

enum class ErrorCode {
  InvalidArgument,
  BehindCamera,
  PointAtInfinity,
  InsufficientCorrespondences,
  DegenerateConfiguration,
  DivergenceDetected,
  LensOutOfFrame,
  OutOfRange,
  InsufficientHistory,
  NonMonotonicTimestamp,
  InputNotFound,
  CorruptFrame,
  CalibrationFailed,
  ProtocolError,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Process exit code for each error class, as documented in the README.
int exit_code(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace glasshands
