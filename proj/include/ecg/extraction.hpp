#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ecg/image.hpp"

namespace ecg::extraction {

/// Per-column row coordinate of the trace boundary. `gap_mask[c]` is true
/// where column c held no ink; `values[c]` is meaningless there.
struct Envelope {
  std::vector<double> values;
  std::vector<bool> gap_mask;
  int height = 0;  // rows of the source image

  std::size_t width() const noexcept { return values.size(); }
  bool gap_free() const;
};

struct Envelopes {
  Envelope top;
  Envelope bottom;
};

/// Scans every column from the top and from the bottom for the first ink
/// pixel. Throws kEmptyMask when the mask has no ink at all.
Envelopes extract_envelopes(const BinaryImage& mask);

enum class GapStrategy { kRepeatPrevious, kLinearInterpolate };

/// Leading gaps take the first present value under both strategies; trailing
/// gaps under interpolation take the last present value.
Envelope fill_gaps(const Envelope& env, GapStrategy strategy);

struct PixelTrace {
  std::vector<double> samples;  // row coordinate per column, may be fractional
  int height = 0;
};

PixelTrace average_envelopes(const Envelope& top, const Envelope& bottom);

struct CalibrationParams {
  double trace_height_px = 0.0;  // user-declared height of the trace area
  double physical_height_cm = 3.5;
  double gain_mm_per_mV = 10.0;
  double paper_speed_mm_per_s = 25.0;
  std::optional<double> baseline_row_px;  // 0 mV row; median of the trace when unset

  double mm_per_px() const { return physical_height_cm * 10.0 / trace_height_px; }
};

struct CalibratedSignal {
  std::vector<double> samples_mV;
  double sample_period_s = 0.0;
  std::string lead_label;
  std::string source_id;
  std::optional<CalibrationParams> calibration;

  double sampling_rate_hz() const { return 1.0 / sample_period_s; }
  double duration_s() const { return static_cast<double>(samples_mV.size()) * sample_period_s; }

  friend bool operator==(const CalibratedSignal&, const CalibratedSignal&);
};

bool operator==(const CalibrationParams& a, const CalibrationParams& b);

/// Amplitudes are stored at 1 uV resolution, far below one pixel at any
/// practical scan density, so serialized traces stay compact.
inline constexpr double kAmplitudeResolution_mV = 1e-3;
double quantize_mV(double mv);

/// Pixel rows to millivolts and columns to seconds, assuming square pixels.
/// The returned calibration records the baseline actually used.
CalibratedSignal calibrate(const PixelTrace& trace, const CalibrationParams& params, std::string lead_label = "",
                           std::string source_id = "");

/// Throws kValidationError unless sample_period_s > 0 and samples are a
/// nonempty list of finite numbers.
void validate(const CalibratedSignal& sig);

inline constexpr int kSignalSchemaVersion = 1;

nlohmann::json to_json(const CalibratedSignal& sig);
/// Throws kSchemaError for an unknown schema_version or a missing field.
CalibratedSignal signal_from_json(const nlohmann::json& j);

/// `time_s,amplitude_mV` with a header row and LF line endings.
std::string to_csv(const CalibratedSignal& sig);

}  // namespace ecg::extraction
