#include "glasshands/error.hpp"

namespace glasshands {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::PointAtInfinity: return "PointAtInfinity";
    case ErrorCode::InsufficientCorrespondences: return "InsufficientCorrespondences";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::LensOutOfFrame: return "LensOutOfFrame";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::InsufficientHistory: return "InsufficientHistory";
    case ErrorCode::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
    case ErrorCode::InputNotFound: return "InputNotFound";
    case ErrorCode::CorruptFrame: return "CorruptFrame";
    case ErrorCode::CalibrationFailed: return "CalibrationFailed";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::InputNotFound: return 3;
    case ErrorCode::CorruptFrame: return 4;
    case ErrorCode::CalibrationFailed: return 5;
    case ErrorCode::InvalidArgument: return 6;
    case ErrorCode::IoError: return 7;
    case ErrorCode::LensOutOfFrame: return 8;
    case ErrorCode::OutOfRange: return 9;
    case ErrorCode::ProtocolError: return 10;
    case ErrorCode::NonMonotonicTimestamp: return 11;
    case ErrorCode::InsufficientHistory: return 12;
    case ErrorCode::InsufficientCorrespondences: return 13;
    case ErrorCode::DegenerateConfiguration: return 14;
    case ErrorCode::DivergenceDetected: return 15;
    case ErrorCode::BehindCamera: return 16;
    case ErrorCode::PointAtInfinity: return 17;
  }
  return 1;
}

}  // namespace glasshands
