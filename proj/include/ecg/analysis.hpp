#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ecg/error.hpp"
#include "ecg/extraction.hpp"

namespace ecg::analysis {

using extraction::CalibratedSignal;

// ---------------------------------------------------------------------------
// Noise filters
// ---------------------------------------------------------------------------

struct FilterSpec {
  enum class Kind { kFirDirect, kSavitzkyGolay };

  Kind kind = Kind::kSavitzkyGolay;
  std::vector<double> coefficients;  // kFirDirect taps
  int window_length = 0;             // kSavitzkyGolay, odd
  int poly_order = 0;                // kSavitzkyGolay

  static FilterSpec fir(std::vector<double> taps);
  static FilterSpec savitzky_golay(int window_length, int poly_order);

  /// Throws kInvalidParams when the invariants of the chosen kind fail.
  void check() const;

  friend bool operator==(const FilterSpec&, const FilterSpec&) = default;
};

/// Causal direct-form FIR, y[n] = sum_k h[k] x[n-k], with x[n<0] = x[0].
std::vector<double> fir_filter(std::span<const double> x, std::span<const double> taps);
CalibratedSignal fir_filter(const CalibratedSignal& sig, std::span<const double> taps);

/// Weights w such that sum_j w[j] * x[j] evaluates, at window position
/// `eval_pos`, the least-squares polynomial of degree `poly_order` fitted to
/// a window of `window_length` consecutive samples.
std::vector<double> savgol_weights(int window_length, int poly_order, int eval_pos);

/// Savitzky-Golay smoothing. Within half a window of either end the
/// polynomial fitted to the first (last) full window is evaluated at the edge
/// sample. Throws kSignalTooShort when the signal is shorter than the window.
std::vector<double> savgol_filter(std::span<const double> x, int window_length, int poly_order);
CalibratedSignal savgol_filter(const CalibratedSignal& sig, int window_length, int poly_order);

CalibratedSignal apply(const CalibratedSignal& sig, const FilterSpec& spec);

/// Savitzky-Golay window 15 / order 3 at 250 Hz, window scaled with rate.
FilterSpec default_smoothing(double sampling_rate_hz);

// ---------------------------------------------------------------------------
// R-peak detection
// ---------------------------------------------------------------------------

struct PanTompkinsConfig {
  double band_low_hz = 5.0;
  double band_high_hz = 15.0;
  double integration_window_s = 0.150;
  double refractory_s = 0.200;
  double searchback_factor = 1.66;
  double peak_weight = 0.125;            // running level update: w*peak + (1-w)*level
  double searchback_peak_weight = 0.25;  // same, for peaks recovered by search-back
  double snap_window_s = 0.050;
  double learning_period_s = 2.0;
  double min_duration_s = 3.0;
  double min_rate_hz = 50.0;
  double max_rate_hz = 1000.0;
};

struct RPeakSet {
  std::vector<std::size_t> indices;  // strictly increasing
  std::string signal_ref;
  double sample_period_s = 0.0;

  std::size_t size() const noexcept { return indices.size(); }
};

/// Intermediate stages, exposed for diagnostics and tests.
struct PanTompkinsTrace {
  std::vector<double> bandpassed;
  std::vector<double> derivative;
  std::vector<double> integrated;
  std::vector<std::size_t> integrator_detections;
};

/// Band-pass, derivative, squaring, moving-window integration and dual
/// adaptive thresholds with search-back. Detections are snapped to the
/// largest raw sample within +-snap_window_s.
RPeakSet pan_tompkins(const CalibratedSignal& sig, const PanTompkinsConfig& cfg = {},
                      PanTompkinsTrace* trace = nullptr);

/// Linear-phase windowed-sinc band-pass taps (Hamming window), unit gain at
/// the band centre.
std::vector<double> bandpass_taps(double low_hz, double high_hz, double sampling_rate_hz);

/// 60 / mean RR. Throws kTooFewPeaks with fewer than two peaks.
double heart_rate(const RPeakSet& peaks);

/// Population standard deviation of RR intervals in milliseconds. Throws
/// kTooFewPeaks with fewer than three peaks.
double rr_std(const RPeakSet& peaks);

// ---------------------------------------------------------------------------
// Wave delineation
// ---------------------------------------------------------------------------

struct DelineationConfig {
  double qs_window_s = 0.080;
  double p_window_s = 0.300;
  double t_window_s = 0.400;
  double t_rr_fraction = 0.7;
  double prominence_floor_mV = 0.05;
};

struct BeatFiducials {
  std::optional<std::size_t> p;
  std::optional<std::size_t> q;
  std::size_t r = 0;
  std::optional<std::size_t> s;
  std::optional<std::size_t> t;
  bool p_low_prominence = false;
  bool t_low_prominence = false;

  friend bool operator==(const BeatFiducials&, const BeatFiducials&) = default;
};

/// Windowed extremum search around each R peak: Q/S are minima within
/// qs_window_s before/after R, P is the maximum between p_window_s and
/// qs_window_s before R, T the maximum from qs_window_s to
/// min(t_window_s, t_rr_fraction * next RR) after R. A window cut by the
/// record edge or a neighbouring R yields an absent fiducial.
std::vector<BeatFiducials> delineate_waves(const CalibratedSignal& sig, const RPeakSet& peaks,
                                           const DelineationConfig& cfg = {});

// ---------------------------------------------------------------------------
// Full back-end analysis
// ---------------------------------------------------------------------------

struct AnalysisConfig {
  std::optional<std::vector<FilterSpec>> filter_chain;  // default_smoothing() when unset
  PanTompkinsConfig pan_tompkins;
  DelineationConfig delineation;
};

struct AnalysisReport {
  RPeakSet r_peaks;
  std::optional<double> heart_rate_bpm;
  std::optional<double> rr_std_ms;
  std::vector<BeatFiducials> beats;
  std::vector<FilterSpec> filter_chain;
  std::optional<ErrorCode> failure;  // kSignalTooShort, kSamplingRateUnsupported or kTooFewPeaks

  bool complete() const noexcept { return !failure.has_value(); }
};

/// Filter chain, R peaks on the raw signal, rate and RR spread, then
/// delineation on the filtered signal. Detector precondition failures and
/// too few peaks produce a partial report with `failure` set instead of
/// throwing.
AnalysisReport analyze(const CalibratedSignal& sig, const AnalysisConfig& cfg = {});

nlohmann::json to_json(const FilterSpec& spec);
FilterSpec filter_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AnalysisReport& report);
/// Throws kSchemaError on malformed input.
AnalysisReport report_from_json(const nlohmann::json& j);

}  // namespace ecg::analysis
