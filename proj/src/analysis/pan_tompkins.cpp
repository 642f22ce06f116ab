#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <numeric>

#include "ecg/analysis.hpp"

namespace ecg::analysis {
namespace {

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

// Zero-phase (centred) convolution with an odd-length symmetric kernel,
// replicating edge samples.
std::vector<double> centred_convolve(const std::vector<double>& x, const std::vector<double>& kernel) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(kernel.size() / 2);
  std::vector<double> y(x.size(), 0.0);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double acc = 0.0;
    const std::ptrdiff_t lo = i - half;
    if (lo >= 0 && i + half < n) {
      const double* src = x.data() + lo;
      for (std::size_t k = 0; k < kernel.size(); ++k) acc += kernel[k] * src[k];
    } else {
      for (std::ptrdiff_t k = -half; k <= half; ++k) {
        const std::ptrdiff_t j = std::clamp<std::ptrdiff_t>(i + k, 0, n - 1);
        acc += kernel[static_cast<std::size_t>(k + half)] * x[static_cast<std::size_t>(j)];
      }
    }
    y[static_cast<std::size_t>(i)] = acc;
  }
  return y;
}

std::vector<double> five_point_derivative(const std::vector<double>& x, double fs) {
  const std::size_t n = x.size();
  auto at = [&](std::ptrdiff_t i) {
    return x[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n) - 1))];
  };
  std::vector<double> d(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::ptrdiff_t>(i);
    d[i] = (-at(k - 2) - 2.0 * at(k - 1) + 2.0 * at(k + 1) + at(k + 2)) * fs / 8.0;
  }
  return d;
}

// Centred moving average of `width` samples (width forced odd).
std::vector<double> moving_window_integral(const std::vector<double>& x, std::size_t width) {
  if (width % 2 == 0) ++width;
  const std::size_t half = width / 2;
  const std::size_t n = x.size();
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
  std::vector<double> y(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, i + half + 1);
    y[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(width);
  }
  return y;
}

std::size_t argmax_in(const std::vector<double>& x, std::size_t lo, std::size_t hi) {
  std::size_t best = lo;
  for (std::size_t i = lo + 1; i <= hi; ++i) {
    if (x[i] > x[best]) best = i;
  }
  return best;
}

struct Candidate {
  std::size_t index;
  double value;
};

// Dual-threshold decision logic over the integrator's local maxima.
class ThresholdDetector {
 public:
  ThresholdDetector(const PanTompkinsConfig& cfg, double fs, double initial_signal, double initial_noise)
      : cfg_(cfg),
        fs_(fs),
        refractory_(static_cast<std::size_t>(std::lround(cfg.refractory_s * fs))),
        signal_level_(initial_signal),
        noise_level_(initial_noise) {}

  void feed(const Candidate& c) {
    search_back_until(c.index);
    if (c.value > threshold1()) {
      if (!accepted_.empty() && c.index - accepted_.back().index < refractory_) {
        if (c.value > accepted_.back().value) {
          accepted_.back() = c;
          update_signal(c.value, cfg_.peak_weight);
        } else {
          update_noise(c.value);
        }
        return;
      }
      accept(c, cfg_.peak_weight);
      pending_.clear();
      return;
    }
    update_noise(c.value);
    pending_.push_back(c);
  }

  void finish(std::size_t end) { search_back_until(end); }

  std::vector<std::size_t> detections() const {
    std::vector<std::size_t> out;
    out.reserve(accepted_.size());
    for (const auto& c : accepted_) out.push_back(c.index);
    return out;
  }

 private:
  double threshold1() const { return noise_level_ + 0.25 * (signal_level_ - noise_level_); }
  double threshold2() const { return 0.5 * threshold1(); }

  void update_signal(double v, double w) { signal_level_ = w * v + (1.0 - w) * signal_level_; }
  void update_noise(double v) { noise_level_ = cfg_.peak_weight * v + (1.0 - cfg_.peak_weight) * noise_level_; }

  void accept(const Candidate& c, double weight) {
    if (!accepted_.empty()) {
      rr_.push_back(static_cast<double>(c.index - accepted_.back().index));
      if (rr_.size() > 8) rr_.pop_front();
    }
    accepted_.push_back(c);
    update_signal(c.value, weight);
  }

  double mean_rr() const {
    if (rr_.empty()) return fs_;  // one second until two beats are known
    return std::accumulate(rr_.begin(), rr_.end(), 0.0) / static_cast<double>(rr_.size());
  }

  // Recovers the largest sub-threshold peak after a silence longer than
  // searchback_factor * mean RR, if it clears the second threshold.
  void search_back_until(std::size_t now) {
    while (!accepted_.empty()) {
      const std::size_t last = accepted_.back().index;
      if (static_cast<double>(now - last) <= cfg_.searchback_factor * mean_rr()) return;
      const Candidate* best = nullptr;
      for (const auto& p : pending_) {
        if (p.index <= last || p.index - last < refractory_ || p.index >= now) continue;
        if (!best || p.value > best->value) best = &p;
      }
      if (!best || best->value <= threshold2()) return;
      const Candidate found = *best;
      std::erase_if(pending_, [&](const Candidate& p) { return p.index <= found.index; });
      accept(found, cfg_.searchback_peak_weight);
    }
  }

  const PanTompkinsConfig& cfg_;
  double fs_;
  std::size_t refractory_;
  double signal_level_;
  double noise_level_;
  std::vector<Candidate> accepted_;
  std::vector<Candidate> pending_;
  std::deque<double> rr_;
};

}  // namespace

std::vector<double> bandpass_taps(double low_hz, double high_hz, double sampling_rate_hz) {
  if (!(low_hz > 0.0 && high_hz > low_hz && high_hz < sampling_rate_hz / 2.0)) {
    throw Error(ErrorCode::kInvalidParams, "band edges must satisfy 0 < low < high < Nyquist");
  }
  // Hamming transition width is about 3.3 fs / N; aim for ~4 Hz.
  std::size_t taps = static_cast<std::size_t>(std::ceil(3.3 * sampling_rate_hz / 4.0));
  if (taps % 2 == 0) ++taps;
  const double f1 = low_hz / sampling_rate_hz;
  const double f2 = high_hz / sampling_rate_hz;
  const double mid = static_cast<double>(taps - 1) / 2.0;
  std::vector<double> h(taps);
  for (std::size_t i = 0; i < taps; ++i) {
    const double m = static_cast<double>(i) - mid;
    const double ideal = 2.0 * f2 * sinc(2.0 * f2 * m) - 2.0 * f1 * sinc(2.0 * f1 * m);
    const double window = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / (taps - 1));
    h[i] = ideal * window;
  }
  const double centre = 2.0 * std::numbers::pi * (low_hz + high_hz) / 2.0 / sampling_rate_hz;
  double re = 0.0;
  double im = 0.0;
  for (std::size_t i = 0; i < taps; ++i) {
    const double m = static_cast<double>(i) - mid;
    re += h[i] * std::cos(centre * m);
    im += h[i] * std::sin(centre * m);
  }
  const double gain = std::hypot(re, im);
  for (double& v : h) v /= gain;
  return h;
}

RPeakSet pan_tompkins(const CalibratedSignal& sig, const PanTompkinsConfig& cfg, PanTompkinsTrace* trace) {
  if (!(sig.sample_period_s > 0.0)) throw Error(ErrorCode::kSamplingRateUnsupported, "sample period must be positive");
  const double fs = sig.sampling_rate_hz();
  constexpr double kRateSlack = 1e-9;
  if (fs < cfg.min_rate_hz * (1.0 - kRateSlack) || fs > cfg.max_rate_hz * (1.0 + kRateSlack)) {
    throw Error(ErrorCode::kSamplingRateUnsupported, "sampling rate outside [50, 1000] Hz");
  }
  if (sig.duration_s() < cfg.min_duration_s * (1.0 - kRateSlack)) {
    throw Error(ErrorCode::kSignalTooShort, "R-peak detection needs at least 3 s of signal");
  }

  const std::vector<double>& x = sig.samples_mV;
  const std::size_t n = x.size();

  auto bandpassed = centred_convolve(x, bandpass_taps(cfg.band_low_hz, cfg.band_high_hz, fs));
  auto derivative = five_point_derivative(bandpassed, fs);
  std::vector<double> squared(n);
  std::transform(derivative.begin(), derivative.end(), squared.begin(), [](double v) { return v * v; });
  const auto width = static_cast<std::size_t>(std::max(1L, std::lround(cfg.integration_window_s * fs)));
  auto integrated = moving_window_integral(squared, width);

  std::vector<Candidate> candidates;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (integrated[i] > integrated[i - 1] && integrated[i] >= integrated[i + 1] && integrated[i] > 0.0) {
      candidates.push_back({i, integrated[i]});
    }
  }

  const std::size_t learn = std::min(n, static_cast<std::size_t>(std::lround(cfg.learning_period_s * fs)));
  const double learn_max = *std::max_element(integrated.begin(), integrated.begin() + static_cast<std::ptrdiff_t>(learn));
  const double learn_mean =
      std::accumulate(integrated.begin(), integrated.begin() + static_cast<std::ptrdiff_t>(learn), 0.0) /
      static_cast<double>(learn);

  ThresholdDetector detector(cfg, fs, learn_max / 3.0, learn_mean / 2.0);
  for (const auto& c : candidates) detector.feed(c);
  detector.finish(n);
  const auto detections = detector.detections();

  // Snap to the raw-signal maximum, then re-impose the refractory period in
  // case two detections snapped close together.
  const auto snap = static_cast<std::size_t>(std::lround(cfg.snap_window_s * fs));
  const auto refractory = static_cast<std::size_t>(std::lround(cfg.refractory_s * fs));
  RPeakSet peaks;
  peaks.signal_ref = sig.source_id;
  peaks.sample_period_s = sig.sample_period_s;
  for (std::size_t d : detections) {
    const std::size_t lo = d >= snap ? d - snap : 0;
    const std::size_t hi = std::min(n - 1, d + snap);
    const std::size_t r = argmax_in(x, lo, hi);
    if (!peaks.indices.empty()) {
      std::size_t& last = peaks.indices.back();
      if (r <= last) continue;
      if (r - last < refractory) {
        if (x[r] > x[last]) last = r;
        continue;
      }
    }
    peaks.indices.push_back(r);
  }

  if (trace) {
    trace->bandpassed = std::move(bandpassed);
    trace->derivative = std::move(derivative);
    trace->integrated = std::move(integrated);
    trace->integrator_detections = detections;
  }
  return peaks;
}

}  // namespace ecg::analysis
