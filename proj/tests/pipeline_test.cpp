#include <cmath>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "ecg/evaluation.hpp"
#include "ecg/pipeline.hpp"

namespace ecg::pipeline {
namespace {

using nlohmann::json;

evaluation::RenderedTrace clean_trace(double seconds = 6.0, double rotation = 0.0) {
  evaluation::SyntheticTraceSpec spec;
  spec.waveform.duration_s = seconds;
  spec.distortions.rotation_deg = rotation;
  return evaluation::render_synthetic_trace(spec, 0);
}

TEST(Digitize, BlankImageFailsAtThresholdStage) {
  RasterImage blank(300, 200, Rgb{255, 255, 255});
  try {
    digitize(blank, PipelineConfig{});
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyMask);
    EXPECT_EQ(e.stage(), Stage::kThreshold);
    EXPECT_NE(std::string(e.what()).find("threshold"), std::string::npos);
  }
}

TEST(Digitize, StrictDeskewRaisesDegenerateImage) {
  RasterImage blank(300, 200, Rgb{255, 255, 255});
  PipelineConfig cfg;
  cfg.strict_deskew = true;
  try {
    digitize(blank, cfg);
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateImage);
    EXPECT_EQ(e.stage(), Stage::kDeskew);
  }
}

TEST(Digitize, CleanTraceCloseToTruth) {
  const auto rendered = clean_trace();
  PipelineConfig cfg;
  cfg.calibration.trace_height_px = rendered.truth.trace_height_px;
  const DigitizeResult r = digitize(rendered.image, cfg, "clean.png", true);
  EXPECT_EQ(r.signal.source_id, "clean.png");
  EXPECT_NEAR(r.signal.sampling_rate_hz(), 250.0, 1e-6);
  const auto [rmse, lag] = evaluation::aligned_rmse(r.signal.samples_mV, rendered.truth.signal.samples_mV, 3);
  EXPECT_LT(rmse, 0.1);
  ASSERT_TRUE(r.overlay.has_value());
  EXPECT_EQ(r.overlay->width(), rendered.image.width());
  EXPECT_EQ(r.mask.width(), rendered.image.width());
}

TEST(Digitize, DeskewCorrectsRotation) {
  const auto rendered = clean_trace(6.0, 4.0);
  PipelineConfig cfg;
  cfg.calibration.trace_height_px = rendered.truth.trace_height_px;
  const DigitizeResult r = digitize(rendered.image, cfg);
  EXPECT_NEAR(r.skew_deg, 4.0, 0.5);
  EXPECT_FALSE(r.skew_degenerate);
}

TEST(Digitize, CropOutsideImageNamesCropStage) {
  const auto rendered = clean_trace(3.0);
  PipelineConfig cfg;
  cfg.crop = imaging::CropRect{0, 0, rendered.image.width() + 10, 10};
  try {
    digitize(rendered.image, cfg);
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBoundsError);
    EXPECT_EQ(e.stage(), Stage::kCrop);
  }
}

TEST(Config, MergeOverridesAndRejectsUnknownKeys) {
  const PipelineConfig merged = merge_config(PipelineConfig{}, json{
                                                                   {"deskew", {{"enabled", false}, {"step_deg", 0.5}}},
                                                                   {"otsu_threshold", 120},
                                                                   {"gap_strategy", "linear_interpolate"},
                                                                   {"calibration", {{"gain_mm_per_mV", 20.0}}},
                                                                   {"filter_chain", json::array({{{"kind", "fir_direct"}, {"coefficients", {0.5, 0.5}}}})},
                                                               });
  EXPECT_FALSE(merged.deskew);
  EXPECT_EQ(merged.deskew_step_deg, 0.5);
  EXPECT_EQ(merged.deskew_range_deg, PipelineConfig{}.deskew_range_deg);
  EXPECT_EQ(merged.otsu_threshold, 120);
  EXPECT_EQ(merged.gap_strategy, extraction::GapStrategy::kLinearInterpolate);
  EXPECT_EQ(merged.calibration.gain_mm_per_mV, 20.0);
  ASSERT_TRUE(merged.analysis.filter_chain.has_value());
  EXPECT_EQ(merged.analysis.filter_chain->front(), analysis::FilterSpec::fir({0.5, 0.5}));

  for (const json& bad : {json{{"deskw", true}}, json{{"deskew", {{"range", 5}}}}, json{{"gap_strategy", "spline"}},
                          json{{"se_length", 1}}, json{{"calibration", {{"gain_mm_per_mV", -1}}}}}) {
    try {
      merge_config(PipelineConfig{}, bad);
      ADD_FAILURE() << "accepted " << bad.dump();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidParams) << bad.dump();
    }
  }
}

TEST(Config, JsonRoundTrip) {
  PipelineConfig cfg;
  cfg.crop = imaging::CropRect{1, 2, 30, 40};
  cfg.otsu_threshold = 90;
  cfg.lead_label = "II";
  cfg.calibration.baseline_row_px = 12.5;
  cfg.outputs.overlay = "o.png";
  const json j = to_json(cfg);
  EXPECT_EQ(to_json(merge_config(PipelineConfig{}, j)), j);
}

}  // namespace
}  // namespace ecg::pipeline
