#include "ecg/error.hpp"

namespace ecg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDecodeError: return "DecodeError";
    case ErrorCode::kDimensionError: return "DimensionError";
    case ErrorCode::kDegenerateImage: return "DegenerateImage";
    case ErrorCode::kBoundsError: return "BoundsError";
    case ErrorCode::kDegenerateHistogram: return "DegenerateHistogram";
    case ErrorCode::kEmptyMask: return "EmptyMask";
    case ErrorCode::kAllGaps: return "AllGaps";
    case ErrorCode::kWidthMismatch: return "WidthMismatch";
    case ErrorCode::kInvalidParams: return "InvalidParams";
    case ErrorCode::kEmptyFilter: return "EmptyFilter";
    case ErrorCode::kSignalTooShort: return "SignalTooShort";
    case ErrorCode::kSamplingRateUnsupported: return "SamplingRateUnsupported";
    case ErrorCode::kTooFewPeaks: return "TooFewPeaks";
    case ErrorCode::kNoPeaks: return "NoPeaks";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kInvalidCredentials: return "InvalidCredentials";
    case ErrorCode::kUnauthorized: return "Unauthorized";
    case ErrorCode::kValidationError: return "ValidationError";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kSchemaError: return "SchemaError";
    case ErrorCode::kNetworkError: return "NetworkError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "UnknownError";
}

}  // namespace ecg
