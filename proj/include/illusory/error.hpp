#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace illusory {

enum class ErrorCode {
  ChannelMismatch,
  BadKernelSize,
  ImageTooSmall,
  SizeMismatch,
  BadClassId,
  EmptyReference,
  LengthMismatch,
  UnknownLabel,
  EmptyMatrix,
  EmptyInput,
  ParseError,
  DuplicateId,
  MissingLabels,
  UnknownSampleId,
  KindMismatch,
  AuthError,
  IoError,
  FormatError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ChannelMismatch: return "ChannelMismatch";
    case ErrorCode::BadKernelSize: return "BadKernelSize";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::BadClassId: return "BadClassId";
    case ErrorCode::EmptyReference: return "EmptyReference";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::MissingLabels: return "MissingLabels";
    case ErrorCode::UnknownSampleId: return "UnknownSampleId";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::AuthError: return "AuthError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FormatError: return "FormatError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace illusory
