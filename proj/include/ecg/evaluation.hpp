#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ecg/extraction.hpp"
#include "ecg/image.hpp"
#include "ecg/pipeline.hpp"

namespace ecg::evaluation {

// ---------------------------------------------------------------------------
// Feature points and matching
// ---------------------------------------------------------------------------

enum class WaveLabel { kR, kP, kQ, kS, kT };
inline constexpr std::array<WaveLabel, 5> kAllLabels = {WaveLabel::kR, WaveLabel::kP, WaveLabel::kQ, WaveLabel::kS,
                                                        WaveLabel::kT};
char to_char(WaveLabel label) noexcept;

struct FeaturePoint {
  double time_s = 0.0;
  WaveLabel label = WaveLabel::kR;
  friend bool operator==(const FeaturePoint&, const FeaturePoint&) = default;
};

struct FeaturePointSet {
  enum class Source { kDetected, kGroundTruth };
  std::vector<FeaturePoint> points;
  Source source = Source::kDetected;
};

/// R from the peak set, P/Q/S/T from the beats; times are index * period.
FeaturePointSet feature_points(const analysis::AnalysisReport& report, double time_offset_s = 0.0);

struct Matching {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (detected index, truth index)
  std::vector<std::size_t> unmatched_detected;
  std::vector<std::size_t> unmatched_truth;
  double tolerance_s = 0.0;
};

/// One-to-one matching within each label. All candidate pairs within
/// `tolerance_s` are taken in increasing distance order (ties by detected,
/// then truth index), skipping points already used. Throws kInvalidParams
/// for a nonpositive tolerance.
Matching match_points(const FeaturePointSet& detected, const FeaturePointSet& truth, double tolerance_s);

/// Fraction of detections that hit a truth point; 1.0 when nothing was
/// detected.
double precision(const Matching& m);

/// Fraction of truth points that were found (matched / truth); 1.0 when the
/// truth set is empty.
double recall(const Matching& m);

struct Counts {
  std::size_t matched = 0;
  std::size_t detected = 0;
  std::size_t truth = 0;
  Counts& operator+=(const Counts& o) {
    matched += o.matched;
    detected += o.detected;
    truth += o.truth;
    return *this;
  }
  double precision() const { return detected == 0 ? 1.0 : static_cast<double>(matched) / detected; }
  double recall() const { return truth == 0 ? 1.0 : static_cast<double>(matched) / truth; }
};

struct Tolerances {
  double r_s = 0.050;
  double wave_s = 0.080;  // P, Q, S, T
  double for_label(WaveLabel l) const { return l == WaveLabel::kR ? r_s : wave_s; }
};

struct EvalResult {
  double precision = 1.0;
  double recall = 1.0;
  std::array<Counts, 5> per_label{};  // indexed by WaveLabel
  Counts counts;

  const Counts& label(WaveLabel l) const { return per_label[static_cast<std::size_t>(l)]; }
  /// Pooled counts over P, Q, S and T.
  Counts waves() const;
  void add(const EvalResult& other);
};

/// Matches each label at its own tolerance and pools the counts.
EvalResult evaluate_points(const FeaturePointSet& detected, const FeaturePointSet& truth, const Tolerances& tol = {});

// ---------------------------------------------------------------------------
// Synthetic traces
// ---------------------------------------------------------------------------

/// Gaussian deflection: amplitude, offset of its centre from the R peak, and
/// standard deviation.
struct WaveComponent {
  double amplitude_mV = 0.0;
  double offset_ms = 0.0;
  double width_ms = 10.0;
  friend bool operator==(const WaveComponent&, const WaveComponent&) = default;
};

struct WaveformParams {
  double heart_rate_bpm = 75.0;
  double duration_s = 10.0;
  double first_beat_s = 0.45;
  WaveComponent p{0.15, -170.0, 22.0};
  WaveComponent q{-0.12, -32.0, 9.0};
  WaveComponent r{1.2, 0.0, 11.0};
  WaveComponent s{-0.3, 32.0, 9.0};
  WaveComponent t{0.3, 280.0, 40.0};  // offset and width scale with sqrt(RR / 1 s)
  std::vector<int> missing_beats;     // beat numbers left out (dropped beats)
  friend bool operator==(const WaveformParams&, const WaveformParams&) = default;
};

struct PaperParams {
  double grid_mm = 1.0;
  int major_every = 5;
  Rgb minor_color{252, 228, 228};
  Rgb major_color{250, 210, 210};
  Rgb ink_color{25, 25, 35};
  double stroke_width_px = 2.0;
  double px_per_mm = 10.0;
  double height_mm = 35.0;
  double baseline_fraction = 0.6;  // 0 mV row as a fraction of the height, from the top
  friend bool operator==(const PaperParams&, const PaperParams&) = default;
};

struct Distortions {
  double rotation_deg = 0.0;
  double noise_sd = 0.0;           // gray levels, per channel
  double lighting_gradient = 0.0;  // fractional darkening from left to right edge
  std::optional<int> jpeg_quality;
  friend bool operator==(const Distortions&, const Distortions&) = default;
};

struct SyntheticTraceSpec {
  WaveformParams waveform;
  PaperParams paper;
  Distortions distortions;

  /// Throws kInvalidSpec.
  void check() const;
  friend bool operator==(const SyntheticTraceSpec&, const SyntheticTraceSpec&) = default;
};

struct GroundTruth {
  extraction::CalibratedSignal signal;
  FeaturePointSet fiducials;
  double skew_deg = 0.0;
  double trace_height_px = 0.0;
};

/// Samples the beat model at `sampling_rate_hz`, quantized to 1 uV. Truth
/// fiducials are the extrema of the summed waveform next to each component.
GroundTruth synthesize_ecg(const WaveformParams& waveform, double sampling_rate_hz);

struct RenderedTrace {
  RasterImage image;
  GroundTruth truth;
};

/// Draws the grid and the trace at 10 mm/mV and 25 mm/s, then rotates,
/// shades, adds noise and JPEG-compresses as requested. Column c of the
/// undistorted image holds sample c of the truth signal.
RenderedTrace render_synthetic_trace(const SyntheticTraceSpec& spec, std::uint64_t seed);

nlohmann::json to_json(const SyntheticTraceSpec& spec);
/// Missing fields keep their defaults. Throws kInvalidSpec.
SyntheticTraceSpec spec_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Corpus evaluation
// ---------------------------------------------------------------------------

struct CorpusItem {
  std::string name;
  SyntheticTraceSpec spec;
  std::uint64_t seed = 0;
};

/// JSON list of {name?, seed, spec}. Throws kInvalidSpec.
std::vector<CorpusItem> corpus_from_json(const nlohmann::json& j);
nlohmann::json to_json(const std::vector<CorpusItem>& corpus);

struct EvaluationOptions {
  pipeline::PipelineConfig pipeline;
  double success_rmse_mV = 0.1;
  Tolerances tolerances;
  int lag_search_px = 3;
};

struct ItemResult {
  std::string name;
  std::uint64_t seed = 0;
  std::optional<std::string> error;  // digitize failure
  std::optional<double> rmse_mV;
  bool success = false;
  int lag = 0;
  double estimated_skew_deg = 0.0;
  double injected_skew_deg = 0.0;
  std::optional<double> heart_rate_bpm;
  std::optional<std::string> analysis_failure;
  EvalResult points;
};

struct EvaluationReport {
  std::vector<ItemResult> items;
  std::size_t successes = 0;
  double success_rate = 0.0;
  std::vector<double> rmse_mV;  // digitized items, corpus order
  EvalResult points;            // pooled over items
  bool vacuous_precision = false;
  bool vacuous_recall = false;
};

/// RMSE between an extracted and a truth signal, searching integer lags
/// within +-max_lag around the centring offset of the two lengths.
/// Returns (rmse, lag) where extracted[i + lag] aligns with truth[i].
std::pair<double, int> aligned_rmse(const std::vector<double>& extracted, const std::vector<double>& truth,
                                    int max_lag);

/// Renders, digitizes and analyzes every item; per-item failures are recorded
/// rather than thrown. Throws kInvalidSpec for an empty corpus.
EvaluationReport evaluate_pipeline(const std::vector<CorpusItem>& corpus, const EvaluationOptions& options = {});

nlohmann::json to_json(const EvaluationReport& report);
std::string format_table(const EvaluationReport& report);

}  // namespace ecg::evaluation
