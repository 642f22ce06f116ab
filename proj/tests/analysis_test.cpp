#include <cmath>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "ecg/analysis.hpp"
#include "ecg/evaluation.hpp"
#include "oracles.hpp"

namespace ecg::analysis {
namespace {

using evaluation::WaveLabel;

CalibratedSignal make_signal(std::vector<double> x, double fs = 250.0) {
  CalibratedSignal s;
  s.samples_mV = std::move(x);
  s.sample_period_s = 1.0 / fs;
  return s;
}

RPeakSet peaks_at(std::vector<std::size_t> idx, double fs = 1000.0) {
  RPeakSet p;
  p.indices = std::move(idx);
  p.sample_period_s = 1.0 / fs;
  return p;
}

std::vector<double> truth_times(const evaluation::GroundTruth& gt, WaveLabel label) {
  std::vector<double> out;
  for (const auto& p : gt.fiducials.points) {
    if (p.label == label) out.push_back(p.time_s);
  }
  return out;
}

double nearest(const std::vector<double>& v, double t) {
  double best = 1e9;
  for (double x : v) best = std::min(best, std::fabs(x - t));
  return best;
}

evaluation::GroundTruth synthetic(double bpm, double seconds, std::vector<int> missing = {}) {
  evaluation::WaveformParams w;
  w.heart_rate_bpm = bpm;
  w.duration_s = seconds;
  w.missing_beats = std::move(missing);
  return evaluation::synthesize_ecg(w, 250.0);
}

void expect_code(ErrorCode code, const std::function<void()>& f) {
  try {
    f();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

TEST(Fir, Examples) {
  const std::vector<double> x = {1.0, -2.0, 3.5, 0.25};
  const std::vector<double> id = {1.0};
  EXPECT_EQ(fir_filter(x, id), x);

  const std::vector<double> c(20, 3.0);
  const std::vector<double> avg = {0.5, 0.5};
  for (double v : fir_filter(c, avg)) EXPECT_DOUBLE_EQ(v, 3.0);

  std::vector<double> ramp(10);
  std::iota(ramp.begin(), ramp.end(), 0.0);
  const std::vector<double> diff = {1.0, -1.0};
  const auto y = fir_filter(ramp, diff);
  for (std::size_t n = 1; n < y.size(); ++n) EXPECT_DOUBLE_EQ(y[n], 1.0);

  expect_code(ErrorCode::kEmptyFilter, [&] { fir_filter(x, std::vector<double>{}); });
}

TEST(Fir, Linear) {
  std::mt19937 rng(31);
  std::normal_distribution<double> d;
  for (int i = 0; i < 50; ++i) {
    std::vector<double> x(64), y(64), taps(1 + rng() % 9);
    for (auto& v : x) v = d(rng);
    for (auto& v : y) v = d(rng);
    for (auto& v : taps) v = d(rng);
    const double a = d(rng), b = d(rng);
    std::vector<double> mix(64);
    for (int n = 0; n < 64; ++n) mix[n] = a * x[n] + b * y[n];
    const auto fx = fir_filter(x, taps), fy = fir_filter(y, taps), fm = fir_filter(mix, taps);
    for (int n = 0; n < 64; ++n) ASSERT_NEAR(fm[n], a * fx[n] + b * fy[n], 1e-9);
  }
}

TEST(SavGol, FiveTwoKernelMatchesNormalEquations) {
  const std::vector<double> expected = {-3 / 35.0, 12 / 35.0, 17 / 35.0, 12 / 35.0, -3 / 35.0};
  const auto w = savgol_weights(5, 2, 2);
  const auto oracle = oracle::savgol_normal_equations(5, 2, 0);
  for (int i = 0; i < 5; ++i) {
    EXPECT_NEAR(w[i], expected[i], 1e-12);
    EXPECT_NEAR(oracle[i], expected[i], 1e-12);
  }
  // Applied to an impulse the filter reproduces the kernel.
  std::vector<double> impulse(21, 0.0);
  impulse[10] = 1.0;
  const auto out = savgol_filter(impulse, 5, 2);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(out[8 + i], expected[4 - i], 1e-12);
}

TEST(SavGol, WeightsMatchOracleEverywhere) {
  for (auto [window, order] : {std::pair{5, 2}, {7, 3}, {15, 3}, {9, 0}, {11, 4}}) {
    for (int pos = 0; pos < window; ++pos) {
      const auto w = savgol_weights(window, order, pos);
      const auto o = oracle::savgol_normal_equations(window, order, pos - window / 2);
      for (int i = 0; i < window; ++i) ASSERT_NEAR(w[i], o[i], 1e-9) << window << "/" << order << " at " << pos;
    }
  }
}

TEST(SavGol, KernelSymmetricWithUnitGain) {
  for (auto [window, order] : {std::pair{5, 2}, {7, 3}, {15, 3}, {21, 6}}) {
    const auto w = savgol_weights(window, order, window / 2);
    EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-12);
    for (int i = 0; i < window; ++i) EXPECT_NEAR(w[i], w[window - 1 - i], 1e-12);
  }
}

TEST(SavGol, ReproducesPolynomials) {
  for (auto [window, order] : {std::pair{5, 2}, {7, 3}, {15, 3}}) {
    for (int degree = 0; degree <= order; ++degree) {
      std::vector<double> x(60);
      for (int n = 0; n < 60; ++n) {
        double v = 1.0;
        for (int k = 1; k <= degree; ++k) v += (k % 2 ? -0.7 : 1.3) * std::pow(n / 10.0, k);
        x[n] = v;
      }
      const auto y = savgol_filter(x, window, order);
      for (int n = 0; n < 60; ++n) ASSERT_NEAR(y[n], x[n], 1e-9 * std::max(1.0, std::fabs(x[n])));
    }
  }
  std::vector<double> q(40);
  for (int n = 0; n < 40; ++n) q[n] = 2.0 * n * n - 3.0 * n + 1.0;
  const auto y = savgol_filter(q, 7, 2);
  for (int n = 0; n < 40; ++n) EXPECT_NEAR(y[n], q[n], 1e-9 * std::max(1.0, std::fabs(q[n])));
  const std::vector<double> flat(30, -0.4);
  for (double v : savgol_filter(flat, 15, 3)) EXPECT_NEAR(v, -0.4, 1e-12);
}

TEST(SavGol, ErrorsAndSpecChecks) {
  expect_code(ErrorCode::kSignalTooShort, [] { savgol_filter(std::vector<double>(4, 0.0), 5, 2); });
  expect_code(ErrorCode::kInvalidParams, [] { FilterSpec::savitzky_golay(4, 2); });
  expect_code(ErrorCode::kInvalidParams, [] { FilterSpec::savitzky_golay(5, 5); });
  expect_code(ErrorCode::kInvalidParams, [] { FilterSpec::savitzky_golay(1, 0); });
  expect_code(ErrorCode::kEmptyFilter, [] { FilterSpec::fir({}); });
}

TEST(DefaultSmoothing, ScalesWithRate) {
  EXPECT_EQ(default_smoothing(250.0), FilterSpec::savitzky_golay(15, 3));
  const FilterSpec hi = default_smoothing(500.0);
  EXPECT_EQ(hi.window_length % 2, 1);
  EXPECT_NEAR(hi.window_length, 30, 1);
}

TEST(PanTompkins, FlatSignalHasNoPeaks) {
  const auto peaks = pan_tompkins(make_signal(std::vector<double>(2500, 0.0)));
  EXPECT_TRUE(peaks.indices.empty());
}

TEST(PanTompkins, Preconditions) {
  expect_code(ErrorCode::kSignalTooShort, [] { pan_tompkins(make_signal(std::vector<double>(500, 0.0))); });
  expect_code(ErrorCode::kSamplingRateUnsupported,
              [] { pan_tompkins(make_signal(std::vector<double>(400, 0.0), 40.0)); });
  expect_code(ErrorCode::kSamplingRateUnsupported,
              [] { pan_tompkins(make_signal(std::vector<double>(20000, 0.0), 2000.0)); });
}

TEST(PanTompkins, CleanSyntheticSixtySeconds) {
  const auto gt = synthetic(75, 60);
  const auto peaks = pan_tompkins(gt.signal);
  EXPECT_NEAR(static_cast<double>(peaks.size()), 75.0, 1.0);
  const auto r = truth_times(gt, WaveLabel::kR);
  for (std::size_t i : peaks.indices) EXPECT_LE(nearest(r, i * peaks.sample_period_s), 0.020);
}

TEST(PanTompkins, DroppedBeatGivesNoFalsePositive) {
  const auto gt = synthetic(75, 60, {37});
  const auto peaks = pan_tompkins(gt.signal);
  EXPECT_NEAR(static_cast<double>(peaks.size()), 74.0, 1.0);
  const auto r = truth_times(gt, WaveLabel::kR);
  for (std::size_t i : peaks.indices) EXPECT_LE(nearest(r, i * peaks.sample_period_s), 0.050);
}

// Refractory spacing, strictly increasing order and the snap-window local
// maximum, over several rates and noise levels.
TEST(PanTompkins, StructuralProperties) {
  std::mt19937 rng(77);
  for (double bpm : {50.0, 72.0, 95.0, 130.0}) {
    auto gt = synthetic(bpm, 20);
    std::normal_distribution<double> noise(0.0, 0.03);
    for (auto& v : gt.signal.samples_mV) v += noise(rng);
    const auto peaks = pan_tompkins(gt.signal);
    const std::size_t snap = static_cast<std::size_t>(std::lround(0.05 / gt.signal.sample_period_s));
    const auto& x = gt.signal.samples_mV;
    for (std::size_t k = 0; k < peaks.size(); ++k) {
      const std::size_t i = peaks.indices[k];
      if (k > 0) {
        ASSERT_GT(i, peaks.indices[k - 1]);
        ASSERT_GT((i - peaks.indices[k - 1]) * gt.signal.sample_period_s, 0.2);
      }
      const std::size_t lo = i >= snap ? i - snap : 0;
      const std::size_t hi = std::min(x.size() - 1, i + snap);
      for (std::size_t j = lo; j <= hi; ++j) ASSERT_LE(x[j], x[i]);
    }
  }
}

TEST(Rhythm, HeartRateExamples) {
  EXPECT_DOUBLE_EQ(heart_rate(peaks_at({0, 800, 1600, 2400})), 75.0);
  EXPECT_DOUBLE_EQ(heart_rate(peaks_at({0, 1000, 2000})), 60.0);
  EXPECT_DOUBLE_EQ(heart_rate(peaks_at({0, 750, 1600})), 75.0);
  expect_code(ErrorCode::kTooFewPeaks, [] { heart_rate(peaks_at({5})); });
}

TEST(Rhythm, RrStdExamples) {
  EXPECT_NEAR(rr_std(peaks_at({0, 800, 1600, 2400})), 0.0, 1e-9);
  EXPECT_NEAR(rr_std(peaks_at({0, 780, 1600})), 20.0, 1e-9);
  // Population SD of {700, 800, 900}: sqrt(20000 / 3).
  EXPECT_NEAR(rr_std(peaks_at({0, 700, 1500, 2400})), std::sqrt(20000.0 / 3.0), 1e-9);
  EXPECT_NEAR(rr_std(peaks_at({0, 700, 1500, 2400})), 81.65, 0.01);
  expect_code(ErrorCode::kTooFewPeaks, [] { rr_std(peaks_at({0, 800})); });
}

TEST(Rhythm, ShiftInvariant) {
  std::mt19937 rng(9);
  for (int i = 0; i < 50; ++i) {
    std::vector<std::size_t> idx{100};
    for (int k = 0; k < 8; ++k) idx.push_back(idx.back() + 400 + rng() % 800);
    RPeakSet a = peaks_at(idx);
    RPeakSet b = a;
    const std::size_t shift = rng() % 5000;
    for (auto& v : b.indices) v += shift;
    EXPECT_NEAR(heart_rate(a), heart_rate(b), 1e-9);
    EXPECT_NEAR(rr_std(a), rr_std(b), 1e-9);
  }
}

TEST(Delineation, FindsSyntheticFiducials) {
  const auto gt = synthetic(70, 20);
  const auto sig = apply(gt.signal, default_smoothing(250.0));
  const auto peaks = pan_tompkins(gt.signal);
  const auto beats = delineate_waves(sig, peaks);
  ASSERT_EQ(beats.size(), peaks.size());
  const double dt = sig.sample_period_s;
  int checked = 0;
  for (const auto& b : beats) {
    if (!b.p || !b.q || !b.s || !b.t) continue;
    EXPECT_LE(nearest(truth_times(gt, WaveLabel::kP), *b.p * dt), 0.020);
    EXPECT_LE(nearest(truth_times(gt, WaveLabel::kQ), *b.q * dt), 0.020);
    EXPECT_LE(nearest(truth_times(gt, WaveLabel::kS), *b.s * dt), 0.020);
    EXPECT_LE(nearest(truth_times(gt, WaveLabel::kT), *b.t * dt), 0.020);
    EXPECT_FALSE(b.p_low_prominence);
    EXPECT_FALSE(b.t_low_prominence);
    ++checked;
  }
  EXPECT_GE(checked, static_cast<int>(beats.size()) - 2);
}

TEST(Delineation, ClippedWindowsAreAbsent) {
  // R 50 ms after the record starts.
  std::vector<double> x(1000, 0.0);
  x[50] = 1.0;
  x[500] = 1.0;
  const auto beats = delineate_waves(make_signal(x, 1000.0), peaks_at({50, 500}));
  ASSERT_EQ(beats.size(), 2u);
  EXPECT_FALSE(beats[0].p.has_value());
  EXPECT_FALSE(beats[0].q.has_value());
  EXPECT_TRUE(beats[1].q.has_value());
  expect_code(ErrorCode::kNoPeaks, [&] { delineate_waves(make_signal(x, 1000.0), peaks_at({})); });
}

TEST(Delineation, MissingPAndTAreFlagged) {
  evaluation::WaveformParams w;
  w.duration_s = 10;
  w.p.amplitude_mV = 0.0;
  w.t.amplitude_mV = 0.0;
  const auto gt = evaluation::synthesize_ecg(w, 250.0);
  const auto beats = delineate_waves(gt.signal, pan_tompkins(gt.signal));
  int flagged = 0, found = 0;
  for (const auto& b : beats) {
    if (b.p) {
      ++found;
      flagged += b.p_low_prominence;
    }
    if (b.t) {
      ++found;
      flagged += b.t_low_prominence;
    }
  }
  EXPECT_GT(found, 0);
  EXPECT_EQ(flagged, found);
}

TEST(Delineation, OrderingInvariant) {
  std::mt19937 rng(5);
  for (double bpm : {55.0, 80.0, 110.0}) {
    auto gt = synthetic(bpm, 15);
    std::normal_distribution<double> noise(0.0, 0.02);
    for (auto& v : gt.signal.samples_mV) v += noise(rng);
    const auto report = analyze(gt.signal);
    for (const auto& b : report.beats) {
      std::vector<std::size_t> seq;
      for (auto v : {b.p, b.q, std::optional<std::size_t>(b.r), b.s, b.t}) {
        if (v) seq.push_back(*v);
      }
      ASSERT_TRUE(std::is_sorted(seq.begin(), seq.end()));
      ASSERT_EQ(std::adjacent_find(seq.begin(), seq.end()), seq.end());
    }
  }
}

TEST(Analyze, SyntheticReport) {
  const auto report = analyze(synthetic(75, 30).signal);
  ASSERT_TRUE(report.complete());
  EXPECT_NEAR(*report.heart_rate_bpm, 75.0, 1.0);
  EXPECT_LE(*report.rr_std_ms, 5.0);
  EXPECT_EQ(report.beats.size(), report.r_peaks.size());
  EXPECT_EQ(report.filter_chain, std::vector<FilterSpec>{default_smoothing(250.0)});
}

TEST(Analyze, PartialReports) {
  const auto flat = analyze(make_signal(std::vector<double>(2500, 0.0)));
  EXPECT_EQ(flat.failure, ErrorCode::kTooFewPeaks);
  EXPECT_TRUE(flat.r_peaks.indices.empty());
  EXPECT_FALSE(flat.heart_rate_bpm.has_value());

  const auto brief = analyze(make_signal(std::vector<double>(250, 0.0)));
  EXPECT_EQ(brief.failure, ErrorCode::kSignalTooShort);
}

TEST(Analyze, ReportJsonRoundTrip) {
  const auto report = analyze(synthetic(80, 12).signal);
  const nlohmann::json j = to_json(report);
  for (const char* key : {"heart_rate_bpm", "rr_std_ms", "r_peaks", "beats", "filter_chain"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(to_json(report_from_json(j)), j);
}

}  // namespace
}  // namespace ecg::analysis
