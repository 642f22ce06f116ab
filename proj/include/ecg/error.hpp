#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ecg {

/// Failure categories raised across the toolkit. The CLI maps each one to a
/// stable exit code, so new values go at the end.
enum class ErrorCode {
  kDecodeError,
  kDimensionError,
  kDegenerateImage,
  kBoundsError,
  kDegenerateHistogram,
  kEmptyMask,
  kAllGaps,
  kWidthMismatch,
  kInvalidParams,
  kEmptyFilter,
  kSignalTooShort,
  kSamplingRateUnsupported,
  kTooFewPeaks,
  kNoPeaks,
  kInvalidSpec,
  kInvalidCredentials,
  kUnauthorized,
  kValidationError,
  kNotFound,
  kSchemaError,
  kNetworkError,
  kIoError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ecg
