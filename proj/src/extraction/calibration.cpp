#include <algorithm>
#include <cmath>

#include "ecg/extraction.hpp"

namespace ecg::extraction {
namespace {

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lower + upper) / 2.0;
}

}  // namespace

bool operator==(const CalibrationParams& a, const CalibrationParams& b) {
  return a.trace_height_px == b.trace_height_px && a.physical_height_cm == b.physical_height_cm &&
         a.gain_mm_per_mV == b.gain_mm_per_mV && a.paper_speed_mm_per_s == b.paper_speed_mm_per_s &&
         a.baseline_row_px == b.baseline_row_px;
}

bool operator==(const CalibratedSignal& a, const CalibratedSignal& b) {
  return a.samples_mV == b.samples_mV && a.sample_period_s == b.sample_period_s && a.lead_label == b.lead_label &&
         a.source_id == b.source_id && a.calibration == b.calibration;
}

double quantize_mV(double mv) {
  const double q = std::round(mv * 1000.0) / 1000.0;
  return q == 0.0 ? 0.0 : q;  // no negative zero
}

CalibratedSignal calibrate(const PixelTrace& trace, const CalibrationParams& params, std::string lead_label,
                           std::string source_id) {
  if (!(params.trace_height_px > 0.0) || !(params.physical_height_cm > 0.0) || !(params.gain_mm_per_mV > 0.0) ||
      !(params.paper_speed_mm_per_s > 0.0)) {
    throw Error(ErrorCode::kInvalidParams, "calibration parameters must be strictly positive");
  }
  if (trace.samples.size() < 2) throw Error(ErrorCode::kInvalidParams, "trace needs at least two columns");
  if (params.baseline_row_px) {
    const double b = *params.baseline_row_px;
    if (!(b >= 0.0) || (trace.height > 0 && b >= trace.height)) {
      throw Error(ErrorCode::kInvalidParams, "baseline row lies outside the image");
    }
  }

  CalibrationParams used = params;
  if (!used.baseline_row_px) used.baseline_row_px = median(trace.samples);
  const double baseline = *used.baseline_row_px;
  const double mm_per_px = used.mm_per_px();

  CalibratedSignal sig;
  sig.samples_mV.reserve(trace.samples.size());
  for (double row : trace.samples) {
    // Rows grow downward, so ink above the baseline is positive.
    sig.samples_mV.push_back(quantize_mV((baseline - row) * mm_per_px / used.gain_mm_per_mV));
  }
  sig.sample_period_s = mm_per_px / used.paper_speed_mm_per_s;
  sig.lead_label = std::move(lead_label);
  sig.source_id = std::move(source_id);
  sig.calibration = used;
  return sig;
}

void validate(const CalibratedSignal& sig) {
  if (!(sig.sample_period_s > 0.0) || !std::isfinite(sig.sample_period_s)) {
    throw Error(ErrorCode::kValidationError, "sample_period_s must be positive");
  }
  if (sig.samples_mV.empty()) throw Error(ErrorCode::kValidationError, "signal has no samples");
  if (!std::all_of(sig.samples_mV.begin(), sig.samples_mV.end(), [](double v) { return std::isfinite(v); })) {
    throw Error(ErrorCode::kValidationError, "signal contains non-finite samples");
  }
}

}  // namespace ecg::extraction
