#include <cmath>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "ecg/extraction.hpp"

namespace ecg::extraction {
namespace {

Envelope envelope(std::vector<double> values, std::vector<bool> gaps, int height = 100) {
  Envelope e;
  e.values = std::move(values);
  e.gap_mask = std::move(gaps);
  e.height = height;
  return e;
}

BinaryImage mask_from(const std::vector<std::string>& rows) {
  BinaryImage m(static_cast<int>(rows[0].size()), static_cast<int>(rows.size()));
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) m.at(x, y) = rows[y][x] == '#' ? Mask::kInk : Mask::kBackground;
  }
  return m;
}

PixelTrace trace_of(std::vector<double> samples, int height = 400) { return PixelTrace{std::move(samples), height}; }

CalibrationParams params_350() {
  CalibrationParams p;
  p.trace_height_px = 350;
  p.baseline_row_px = 200;
  return p;
}

TEST(Envelopes, ColumnMinMax) {
  BinaryImage m(1, 10);
  for (int y : {3, 4, 7}) m.at(0, y) = Mask::kInk;
  const Envelopes e = extract_envelopes(m);
  EXPECT_EQ(e.top.values[0], 3);
  EXPECT_EQ(e.bottom.values[0], 7);

  BinaryImage single(1, 10);
  single.at(0, 5) = Mask::kInk;
  const Envelopes s = extract_envelopes(single);
  EXPECT_EQ(s.top.values[0], 5);
  EXPECT_EQ(s.bottom.values[0], 5);
}

TEST(Envelopes, GapMaskMarksEmptyColumns) {
  const Envelopes e = extract_envelopes(mask_from({
      "##.##",
      ".#..#",
      "#..#.",
  }));
  EXPECT_EQ(e.top.gap_mask, (std::vector<bool>{false, false, true, false, false}));
  EXPECT_EQ(e.bottom.gap_mask, e.top.gap_mask);
  EXPECT_EQ(e.top.values[1], 0);
  EXPECT_EQ(e.bottom.values[1], 1);
}

TEST(Envelopes, EmptyMaskThrows) {
  try {
    extract_envelopes(BinaryImage(4, 4));
    FAIL() << "expected EmptyMask";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyMask);
  }
}

TEST(Envelopes, TopNeverBelowBottomOnRandomMasks) {
  std::mt19937 rng(8);
  std::bernoulli_distribution ink(0.08);
  for (int i = 0; i < 50; ++i) {
    BinaryImage m(37, 23);
    for (auto& p : m.pixels()) p = ink(rng) ? Mask::kInk : Mask::kBackground;
    m.at(0, 0) = Mask::kInk;
    const Envelopes e = extract_envelopes(m);
    for (std::size_t c = 0; c < e.top.width(); ++c) {
      if (e.top.gap_mask[c]) continue;
      ASSERT_LE(e.top.values[c], e.bottom.values[c]);
      // Column scan oracle.
      int lo = -1, hi = -1;
      for (int y = 0; y < m.height(); ++y) {
        if (is_ink(m.at(static_cast<int>(c), y))) {
          if (lo < 0) lo = y;
          hi = y;
        }
      }
      ASSERT_EQ(e.top.values[c], lo);
      ASSERT_EQ(e.bottom.values[c], hi);
    }
  }
}

TEST(FillGaps, Examples) {
  const Envelope mid = envelope({10, 0, 20}, {false, true, false});
  EXPECT_EQ(fill_gaps(mid, GapStrategy::kLinearInterpolate).values, (std::vector<double>{10, 15, 20}));
  EXPECT_EQ(fill_gaps(mid, GapStrategy::kRepeatPrevious).values, (std::vector<double>{10, 10, 20}));
  const Envelope lead = envelope({0, 0, 8}, {true, true, false});
  EXPECT_EQ(fill_gaps(lead, GapStrategy::kRepeatPrevious).values, (std::vector<double>{8, 8, 8}));
  EXPECT_EQ(fill_gaps(lead, GapStrategy::kLinearInterpolate).values, (std::vector<double>{8, 8, 8}));
  const Envelope trail = envelope({4, 0, 0}, {false, true, true});
  EXPECT_EQ(fill_gaps(trail, GapStrategy::kLinearInterpolate).values, (std::vector<double>{4, 4, 4}));
  EXPECT_TRUE(fill_gaps(mid, GapStrategy::kLinearInterpolate).gap_free());
}

TEST(FillGaps, AllGapsThrows) {
  try {
    fill_gaps(envelope({0, 0}, {true, true}), GapStrategy::kRepeatPrevious);
    FAIL() << "expected AllGaps";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAllGaps);
  }
}

TEST(FillGaps, IdentityOnGapFree) {
  std::mt19937 rng(4);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> v(30);
    for (auto& x : v) x = rng() % 100;
    const Envelope e = envelope(v, std::vector<bool>(v.size(), false));
    EXPECT_EQ(fill_gaps(e, GapStrategy::kRepeatPrevious).values, v);
    EXPECT_EQ(fill_gaps(e, GapStrategy::kLinearInterpolate).values, v);
  }
}

TEST(Average, Examples) {
  auto full = [](std::vector<double> v) { return envelope(v, std::vector<bool>(v.size(), false)); };
  EXPECT_EQ(average_envelopes(full({4, 4}), full({4, 4})).samples, (std::vector<double>{4.0, 4.0}));
  EXPECT_EQ(average_envelopes(full({3}), full({7})).samples, (std::vector<double>{5.0}));
  EXPECT_EQ(average_envelopes(full({2, 6}), full({4, 6})).samples, (std::vector<double>{3.0, 6.0}));
  try {
    average_envelopes(full({1, 2}), full({1}));
    FAIL() << "expected WidthMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kWidthMismatch);
  }
}

TEST(Average, StaysBetweenEnvelopes) {
  std::mt19937 rng(12);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> a(10), b(10);
    for (int c = 0; c < 10; ++c) {
      a[c] = rng() % 50;
      b[c] = rng() % 50;
    }
    const auto t = average_envelopes(envelope(a, std::vector<bool>(10, false)), envelope(b, std::vector<bool>(10, false)));
    for (int c = 0; c < 10; ++c) {
      ASSERT_GE(t.samples[c], std::min(a[c], b[c]));
      ASSERT_LE(t.samples[c], std::max(a[c], b[c]));
    }
  }
}

TEST(Calibrate, WorkedExample) {
  const CalibratedSignal sig = calibrate(trace_of({100, 200}), params_350());
  EXPECT_NEAR(sig.calibration->mm_per_px(), 0.1, 1e-12);
  EXPECT_NEAR(sig.samples_mV[0], 1.0, 1e-12);
  EXPECT_EQ(sig.samples_mV[1], 0.0);
  EXPECT_NEAR(sig.sample_period_s, 0.004, 1e-15);
  EXPECT_NEAR(sig.sampling_rate_hz(), 250.0, 1e-9);
}

TEST(Calibrate, DoublingHeightHalvesAmplitudeAndPeriod) {
  CalibrationParams p = params_350();
  const CalibratedSignal a = calibrate(trace_of({100, 150, 180, 200}), p);
  p.trace_height_px = 700;
  const CalibratedSignal b = calibrate(trace_of({100, 150, 180, 200}), p);
  for (std::size_t i = 0; i < a.samples_mV.size(); ++i) EXPECT_NEAR(b.samples_mV[i], a.samples_mV[i] / 2, 1e-3);
  EXPECT_NEAR(b.sample_period_s, a.sample_period_s / 2, 1e-15);
}

TEST(Calibrate, AffineInPixelRow) {
  const CalibrationParams p = params_350();
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> d(-40.0, 40.0);
  for (int i = 0; i < 200; ++i) {
    const double off = d(rng);
    const double k = std::uniform_real_distribution<double>(-4.0, 4.0)(rng);
    const double unit = calibrate(trace_of({200 - off, 200}), p).samples_mV[0];
    const double scaled = calibrate(trace_of({200 - k * off, 200}), p).samples_mV[0];
    // Both sides are rounded to 1 uV.
    ASSERT_NEAR(scaled, k * unit, 0.5e-3 * (1 + std::fabs(k)) + 1e-12);
  }
}

TEST(Calibrate, DefaultBaselineIsMedian) {
  CalibrationParams p;
  p.trace_height_px = 350;
  const CalibratedSignal sig = calibrate(trace_of({10, 50, 50, 50, 90}), p);
  EXPECT_EQ(*sig.calibration->baseline_row_px, 50);
  EXPECT_EQ(sig.samples_mV[1], 0.0);
  EXPECT_NEAR(sig.samples_mV[0], 0.4, 1e-12);
}

TEST(Calibrate, RejectsNonPositiveParams) {
  for (auto mutate : std::vector<void (*)(CalibrationParams&)>{
           [](CalibrationParams& p) { p.trace_height_px = 0; },
           [](CalibrationParams& p) { p.physical_height_cm = -1; },
           [](CalibrationParams& p) { p.gain_mm_per_mV = 0; },
           [](CalibrationParams& p) { p.paper_speed_mm_per_s = 0; },
       }) {
    CalibrationParams p = params_350();
    mutate(p);
    try {
      calibrate(trace_of({1, 2}), p);
      FAIL() << "expected InvalidParams";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidParams);
    }
  }
}

// Rasterize a smooth curve with a 1-px stroke: column c holds the rows the
// curve crosses over [c - 0.5, c + 0.5].
TEST(Extraction, PixelFidelityOnRasterizedCurve) {
  auto f = [](double x) { return 40.0 + 14.0 * std::sin(x / 7.0) + 3.0 * std::sin(x / 2.3); };
  const int w = 300, h = 80;
  BinaryImage m(w, h);
  for (int c = 0; c < w; ++c) {
    double lo = 1e9, hi = -1e9;
    for (int k = 0; k <= 20; ++k) {
      const double y = f(c - 0.5 + k / 20.0);
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
    for (int y = static_cast<int>(std::lround(lo)); y <= static_cast<int>(std::lround(hi)); ++y) m.at(c, y) = Mask::kInk;
  }
  const Envelopes e = extract_envelopes(m);
  const PixelTrace t = average_envelopes(fill_gaps(e.top, GapStrategy::kRepeatPrevious),
                                         fill_gaps(e.bottom, GapStrategy::kRepeatPrevious));
  for (int c = 0; c < w; ++c) ASSERT_LE(std::fabs(t.samples[c] - f(c)), 1.0) << "column " << c;
}

TEST(SignalIo, JsonRoundTripAndSchema) {
  const CalibratedSignal sig = calibrate(trace_of({100, 150, 210}), params_350(), "II", "img-1");
  const nlohmann::json j = to_json(sig);
  EXPECT_EQ(j.at("schema_version"), kSignalSchemaVersion);
  EXPECT_EQ(signal_from_json(j), sig);

  nlohmann::json missing = j;
  missing.erase("samples_mV");
  try {
    signal_from_json(missing);
    FAIL() << "expected SchemaError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaError);
  }
  nlohmann::json future = j;
  future["schema_version"] = 99;
  EXPECT_THROW(signal_from_json(future), Error);
}

TEST(SignalIo, Csv) {
  CalibratedSignal sig;
  sig.samples_mV = {0.5, -0.25};
  sig.sample_period_s = 0.004;
  const std::string csv = to_csv(sig);
  EXPECT_EQ(csv.rfind("time_s,amplitude_mV\n", 0), 0u);
  EXPECT_EQ(csv.find('\r'), std::string::npos);
  EXPECT_NE(csv.find("0.004,-0.25\n"), std::string::npos);
}

TEST(SignalIo, ValidateRejectsBadPeriod) {
  CalibratedSignal sig;
  sig.samples_mV = {1.0};
  sig.sample_period_s = 0.0;
  try {
    validate(sig);
    FAIL() << "expected ValidationError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidationError);
  }
  sig.sample_period_s = 0.004;
  sig.samples_mV.clear();
  EXPECT_THROW(validate(sig), Error);
}

}  // namespace
}  // namespace ecg::extraction
