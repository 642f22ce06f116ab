#pragma once

#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "ecg/analysis.hpp"
#include "ecg/binarization.hpp"
#include "ecg/extraction.hpp"
#include "ecg/imaging.hpp"

namespace ecg::pipeline {

/// Every tunable of the digitize and analyze stages.
struct PipelineConfig {
  bool deskew = true;
  double deskew_range_deg = 10.0;
  double deskew_step_deg = 0.25;
  bool strict_deskew = false;  // fail instead of assuming 0 deg on a featureless image

  std::optional<imaging::CropRect> crop;  // applied after deskew
  std::optional<int> otsu_threshold;      // fixed threshold instead of Otsu
  int se_length = 4;
  double angle_step_deg = 15.0;
  extraction::GapStrategy gap_strategy = extraction::GapStrategy::kRepeatPrevious;

  // trace_height_px <= 0 means "height of the (cropped) image".
  extraction::CalibrationParams calibration{};
  std::string lead_label;

  analysis::AnalysisConfig analysis;

  struct Outputs {
    std::optional<std::string> signal;
    std::optional<std::string> overlay;
    std::optional<std::string> csv;
    std::optional<std::string> mask;
    std::optional<std::string> report;
  } outputs;

  /// Throws kInvalidParams when a field is outside its module's range.
  void check() const;
};

/// Overlays `patch` onto `base`; keys absent from the patch keep their value.
/// Throws kInvalidParams on unknown keys or wrongly typed values.
PipelineConfig merge_config(PipelineConfig base, const nlohmann::json& patch);
nlohmann::json to_json(const PipelineConfig& cfg);

struct DigitizeResult {
  extraction::CalibratedSignal signal;
  extraction::PixelTrace trace;
  double skew_deg = 0.0;
  double skew_confidence = 0.0;
  bool skew_degenerate = false;
  int threshold = 0;
  BinaryImage mask;                    // after artifact removal
  std::optional<RasterImage> overlay;  // present when requested
};

enum class Stage { kDeskew, kCrop, kThreshold, kArtifacts, kEnvelope, kCalibrate };
std::string_view to_string(Stage stage);

/// Error raised by digitize(); carries the stage that failed.
class StageError : public Error {
 public:
  StageError(Stage stage, const Error& cause)
      : Error(cause.code(), std::string(to_string(stage)) + " stage: " + cause.what()), stage_(stage) {}
  Stage stage() const noexcept { return stage_; }

 private:
  Stage stage_;
};

/// grayscale -> deskew -> crop -> threshold -> artifact removal -> envelopes
/// -> gap fill -> average -> calibrate.
DigitizeResult digitize(const RasterImage& photo, const PipelineConfig& cfg, const std::string& source_id = "",
                        bool want_overlay = false);

}  // namespace ecg::pipeline
