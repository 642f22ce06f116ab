#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "ecg/pipeline.hpp"

namespace ecg::pipeline {
namespace {

using nlohmann::json;

void invalid(const std::string& what) { throw Error(ErrorCode::kInvalidParams, what); }

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& where) {
  if (!obj.is_object()) invalid(where + " must be an object");
  for (const auto& item : obj.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return item.key() == k; })) {
      invalid("unknown config key '" + item.key() + "' in " + where);
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    invalid(std::string("config key '") + key + "' has the wrong type");
  }
}

template <typename T>
void read_optional(const json& obj, const char* key, std::optional<T>& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  if (it->is_null()) {
    out.reset();
    return;
  }
  T value{};
  read(obj, key, value);
  out = value;
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

std::string_view gap_name(extraction::GapStrategy g) {
  return g == extraction::GapStrategy::kRepeatPrevious ? "repeat_previous" : "linear_interpolate";
}

// Reruns a stage, rethrowing module errors tagged with the stage name.
template <typename F>
auto run_stage(Stage stage, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  }
}

RasterImage draw_overlay(RasterImage base, const extraction::PixelTrace& trace) {
  const Rgb red{220, 20, 20};
  const int h = base.height();
  const int w = std::min<int>(base.width(), static_cast<int>(trace.samples.size()));
  long prev = std::lround(trace.samples.empty() ? 0.0 : trace.samples[0]);
  for (int x = 0; x < w; ++x) {
    const long y = std::lround(trace.samples[static_cast<std::size_t>(x)]);
    const long lo = std::clamp(std::min(prev, y), 0L, static_cast<long>(h - 1));
    const long hi = std::clamp(std::max(prev, y), 0L, static_cast<long>(h - 1));
    for (long r = lo; r <= hi; ++r) base.at(x, static_cast<int>(r)) = red;
    prev = y;
  }
  return base;
}

}  // namespace

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::kDeskew: return "deskew";
    case Stage::kCrop: return "crop";
    case Stage::kThreshold: return "threshold";
    case Stage::kArtifacts: return "artifact removal";
    case Stage::kEnvelope: return "envelope";
    case Stage::kCalibrate: return "calibrate";
  }
  return "unknown";
}

void PipelineConfig::check() const {
  if (!(deskew_range_deg > 0.0 && deskew_range_deg <= 45.0)) invalid("deskew range must be in (0, 45] degrees");
  if (!(deskew_step_deg > 0.0 && deskew_step_deg <= deskew_range_deg)) invalid("deskew step must be in (0, range]");
  if (crop && (crop->w < 1 || crop->h < 1 || crop->x < 0 || crop->y < 0)) invalid("crop rectangle must be non-empty");
  if (otsu_threshold && (*otsu_threshold < 0 || *otsu_threshold > 255)) invalid("threshold must be in [0, 255]");
  if (se_length < 2) invalid("structuring element length must be >= 2");
  if (!(angle_step_deg > 0.0 && angle_step_deg <= 90.0)) invalid("angle step must be in (0, 90] degrees");
  const auto& c = calibration;
  if (!(c.trace_height_px >= 0.0) || !(c.physical_height_cm > 0.0) || !(c.gain_mm_per_mV > 0.0) ||
      !(c.paper_speed_mm_per_s > 0.0)) {
    invalid("calibration parameters must be positive");
  }
  if (analysis.filter_chain) {
    for (const auto& f : *analysis.filter_chain) f.check();
  }
  const auto& pt = analysis.pan_tompkins;
  if (!(pt.band_low_hz > 0.0 && pt.band_high_hz > pt.band_low_hz)) invalid("band-pass edges must satisfy 0 < low < high");
  if (!(pt.integration_window_s > 0.0 && pt.refractory_s > 0.0 && pt.searchback_factor > 1.0 &&
        pt.snap_window_s >= 0.0 && pt.learning_period_s > 0.0)) {
    invalid("Pan-Tompkins windows must be positive");
  }
  if (!(pt.peak_weight > 0.0 && pt.peak_weight <= 1.0 && pt.searchback_peak_weight > 0.0 &&
        pt.searchback_peak_weight <= 1.0)) {
    invalid("Pan-Tompkins level weights must be in (0, 1]");
  }
  const auto& d = analysis.delineation;
  if (!(d.qs_window_s > 0.0 && d.p_window_s > d.qs_window_s && d.t_window_s > d.qs_window_s &&
        d.t_rr_fraction > 0.0 && d.t_rr_fraction <= 1.0 && d.prominence_floor_mV >= 0.0)) {
    invalid("delineation windows are inconsistent");
  }
}

PipelineConfig merge_config(PipelineConfig cfg, const json& patch) {
  reject_unknown(patch,
                 {"deskew", "crop", "otsu_threshold", "se_length", "angle_step_deg", "gap_strategy", "calibration",
                  "lead_label", "filter_chain", "pan_tompkins", "delineation", "outputs"},
                 "config");
  if (auto it = patch.find("deskew"); it != patch.end()) {
    reject_unknown(*it, {"enabled", "range_deg", "step_deg", "strict"}, "deskew");
    read(*it, "enabled", cfg.deskew);
    read(*it, "range_deg", cfg.deskew_range_deg);
    read(*it, "step_deg", cfg.deskew_step_deg);
    read(*it, "strict", cfg.strict_deskew);
  }
  if (auto it = patch.find("crop"); it != patch.end()) {
    if (it->is_null()) {
      cfg.crop.reset();
    } else {
      reject_unknown(*it, {"x", "y", "w", "h"}, "crop");
      imaging::CropRect r = cfg.crop.value_or(imaging::CropRect{});
      read(*it, "x", r.x);
      read(*it, "y", r.y);
      read(*it, "w", r.w);
      read(*it, "h", r.h);
      cfg.crop = r;
    }
  }
  read_optional(patch, "otsu_threshold", cfg.otsu_threshold);
  read(patch, "se_length", cfg.se_length);
  read(patch, "angle_step_deg", cfg.angle_step_deg);
  if (auto it = patch.find("gap_strategy"); it != patch.end()) {
    std::string name;
    read(patch, "gap_strategy", name);
    if (name == "repeat_previous") cfg.gap_strategy = extraction::GapStrategy::kRepeatPrevious;
    else if (name == "linear_interpolate") cfg.gap_strategy = extraction::GapStrategy::kLinearInterpolate;
    else invalid("gap_strategy must be repeat_previous or linear_interpolate");
  }
  if (auto it = patch.find("calibration"); it != patch.end()) {
    reject_unknown(*it,
                   {"trace_height_px", "physical_height_cm", "gain_mm_per_mV", "paper_speed_mm_per_s",
                    "baseline_row_px"},
                   "calibration");
    auto& c = cfg.calibration;
    read(*it, "trace_height_px", c.trace_height_px);
    read(*it, "physical_height_cm", c.physical_height_cm);
    read(*it, "gain_mm_per_mV", c.gain_mm_per_mV);
    read(*it, "paper_speed_mm_per_s", c.paper_speed_mm_per_s);
    read_optional(*it, "baseline_row_px", c.baseline_row_px);
  }
  read(patch, "lead_label", cfg.lead_label);
  if (auto it = patch.find("filter_chain"); it != patch.end()) {
    if (it->is_null()) {
      cfg.analysis.filter_chain.reset();
    } else {
      if (!it->is_array()) invalid("filter_chain must be a list");
      std::vector<analysis::FilterSpec> chain;
      try {
        for (const json& f : *it) chain.push_back(analysis::filter_from_json(f));
      } catch (const Error& e) {
        invalid(std::string("filter_chain: ") + e.what());
      }
      cfg.analysis.filter_chain = std::move(chain);
    }
  }
  if (auto it = patch.find("pan_tompkins"); it != patch.end()) {
    reject_unknown(*it,
                   {"band_low_hz", "band_high_hz", "integration_window_s", "refractory_s", "searchback_factor",
                    "peak_weight", "searchback_peak_weight", "snap_window_s", "learning_period_s"},
                   "pan_tompkins");
    auto& pt = cfg.analysis.pan_tompkins;
    read(*it, "band_low_hz", pt.band_low_hz);
    read(*it, "band_high_hz", pt.band_high_hz);
    read(*it, "integration_window_s", pt.integration_window_s);
    read(*it, "refractory_s", pt.refractory_s);
    read(*it, "searchback_factor", pt.searchback_factor);
    read(*it, "peak_weight", pt.peak_weight);
    read(*it, "searchback_peak_weight", pt.searchback_peak_weight);
    read(*it, "snap_window_s", pt.snap_window_s);
    read(*it, "learning_period_s", pt.learning_period_s);
  }
  if (auto it = patch.find("delineation"); it != patch.end()) {
    reject_unknown(*it, {"qs_window_s", "p_window_s", "t_window_s", "t_rr_fraction", "prominence_floor_mV"},
                   "delineation");
    auto& d = cfg.analysis.delineation;
    read(*it, "qs_window_s", d.qs_window_s);
    read(*it, "p_window_s", d.p_window_s);
    read(*it, "t_window_s", d.t_window_s);
    read(*it, "t_rr_fraction", d.t_rr_fraction);
    read(*it, "prominence_floor_mV", d.prominence_floor_mV);
  }
  if (auto it = patch.find("outputs"); it != patch.end()) {
    reject_unknown(*it, {"signal", "overlay", "csv", "mask", "report"}, "outputs");
    read_optional(*it, "signal", cfg.outputs.signal);
    read_optional(*it, "overlay", cfg.outputs.overlay);
    read_optional(*it, "csv", cfg.outputs.csv);
    read_optional(*it, "mask", cfg.outputs.mask);
    read_optional(*it, "report", cfg.outputs.report);
  }
  cfg.check();
  return cfg;
}

json to_json(const PipelineConfig& cfg) {
  json chain = nullptr;
  if (cfg.analysis.filter_chain) {
    chain = json::array();
    for (const auto& f : *cfg.analysis.filter_chain) chain.push_back(analysis::to_json(f));
  }
  const auto& c = cfg.calibration;
  const auto& pt = cfg.analysis.pan_tompkins;
  const auto& d = cfg.analysis.delineation;
  return {
      {"deskew",
       {{"enabled", cfg.deskew},
        {"range_deg", cfg.deskew_range_deg},
        {"step_deg", cfg.deskew_step_deg},
        {"strict", cfg.strict_deskew}}},
      {"crop", cfg.crop ? json{{"x", cfg.crop->x}, {"y", cfg.crop->y}, {"w", cfg.crop->w}, {"h", cfg.crop->h}}
                        : json(nullptr)},
      {"otsu_threshold", optional_json(cfg.otsu_threshold)},
      {"se_length", cfg.se_length},
      {"angle_step_deg", cfg.angle_step_deg},
      {"gap_strategy", gap_name(cfg.gap_strategy)},
      {"calibration",
       {{"trace_height_px", c.trace_height_px},
        {"physical_height_cm", c.physical_height_cm},
        {"gain_mm_per_mV", c.gain_mm_per_mV},
        {"paper_speed_mm_per_s", c.paper_speed_mm_per_s},
        {"baseline_row_px", optional_json(c.baseline_row_px)}}},
      {"lead_label", cfg.lead_label},
      {"filter_chain", std::move(chain)},
      {"pan_tompkins",
       {{"band_low_hz", pt.band_low_hz},
        {"band_high_hz", pt.band_high_hz},
        {"integration_window_s", pt.integration_window_s},
        {"refractory_s", pt.refractory_s},
        {"searchback_factor", pt.searchback_factor},
        {"peak_weight", pt.peak_weight},
        {"searchback_peak_weight", pt.searchback_peak_weight},
        {"snap_window_s", pt.snap_window_s},
        {"learning_period_s", pt.learning_period_s}}},
      {"delineation",
       {{"qs_window_s", d.qs_window_s},
        {"p_window_s", d.p_window_s},
        {"t_window_s", d.t_window_s},
        {"t_rr_fraction", d.t_rr_fraction},
        {"prominence_floor_mV", d.prominence_floor_mV}}},
      {"outputs",
       {{"signal", optional_json(cfg.outputs.signal)},
        {"overlay", optional_json(cfg.outputs.overlay)},
        {"csv", optional_json(cfg.outputs.csv)},
        {"mask", optional_json(cfg.outputs.mask)},
        {"report", optional_json(cfg.outputs.report)}}},
  };
}

DigitizeResult digitize(const RasterImage& photo, const PipelineConfig& cfg, const std::string& source_id,
                        bool want_overlay) {
  cfg.check();
  DigitizeResult result;
  GrayImage gray = imaging::to_grayscale(photo);
  RasterImage color;
  if (want_overlay) color = photo;

  if (cfg.deskew) {
    run_stage(Stage::kDeskew, [&] {
      try {
        const auto est = imaging::estimate_skew(gray, cfg.deskew_range_deg, cfg.deskew_step_deg);
        result.skew_deg = est.angle_deg;
        result.skew_confidence = est.confidence;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kDegenerateImage || cfg.strict_deskew) throw;
        result.skew_degenerate = true;
      }
      if (result.skew_deg != 0.0) {
        gray = imaging::rotate(gray, -result.skew_deg);
        if (want_overlay) color = imaging::rotate(color, -result.skew_deg);
      }
      return 0;
    });
  }

  if (cfg.crop) {
    run_stage(Stage::kCrop, [&] {
      gray = imaging::crop(gray, *cfg.crop);
      if (want_overlay) color = imaging::crop(color, *cfg.crop);
      return 0;
    });
  }

  const BinaryImage raw = run_stage(Stage::kThreshold, [&] {
    if (cfg.otsu_threshold) {
      result.threshold = *cfg.otsu_threshold;
    } else {
      try {
        result.threshold = binarization::otsu_threshold(binarization::histogram(gray));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kDegenerateHistogram) throw;
        // A single gray level holds no trace to separate from the background.
        throw Error(ErrorCode::kEmptyMask, "image has a single gray level, no ink to extract");
      }
    }
    return binarization::binarize(gray, result.threshold);
  });

  result.mask = run_stage(Stage::kArtifacts,
                          [&] { return binarization::remove_artifacts(raw, cfg.se_length, cfg.angle_step_deg); });

  result.trace = run_stage(Stage::kEnvelope, [&] {
    const auto env = extraction::extract_envelopes(result.mask);
    return extraction::average_envelopes(extraction::fill_gaps(env.top, cfg.gap_strategy),
                                         extraction::fill_gaps(env.bottom, cfg.gap_strategy));
  });

  result.signal = run_stage(Stage::kCalibrate, [&] {
    extraction::CalibrationParams params = cfg.calibration;
    if (params.trace_height_px <= 0.0) params.trace_height_px = result.mask.height();
    return extraction::calibrate(result.trace, params, cfg.lead_label, source_id);
  });

  if (want_overlay) result.overlay = draw_overlay(std::move(color), result.trace);
  return result;
}

}  // namespace ecg::pipeline
