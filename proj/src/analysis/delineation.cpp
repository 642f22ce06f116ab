#include <algorithm>
#include <cmath>

#include "ecg/analysis.hpp"

namespace ecg::analysis {
namespace {

struct Window {
  std::size_t lo;  // inclusive
  std::size_t hi;  // inclusive
};

// Open interval (a, b) in sample indices, or nothing if it is empty or
// leaves [floor, ceil].
std::optional<Window> open_window(std::ptrdiff_t a, std::ptrdiff_t b, std::ptrdiff_t floor, std::ptrdiff_t ceil) {
  if (a < floor || b > ceil) return std::nullopt;
  if (b - a < 2) return std::nullopt;
  return Window{static_cast<std::size_t>(a + 1), static_cast<std::size_t>(b - 1)};
}

template <typename Better>
std::size_t extremum(const std::vector<double>& x, const Window& w, Better better) {
  std::size_t best = w.lo;
  for (std::size_t i = w.lo + 1; i <= w.hi; ++i) {
    if (better(x[i], x[best])) best = i;
  }
  return best;
}

// Height of a maximum above the higher of the lowest points on either side of
// it within the window.
double prominence(const std::vector<double>& x, const Window& w, std::size_t peak) {
  const double left = *std::min_element(x.begin() + static_cast<std::ptrdiff_t>(w.lo),
                                        x.begin() + static_cast<std::ptrdiff_t>(peak) + 1);
  const double right = *std::min_element(x.begin() + static_cast<std::ptrdiff_t>(peak),
                                         x.begin() + static_cast<std::ptrdiff_t>(w.hi) + 1);
  return x[peak] - std::max(left, right);
}

}  // namespace

std::vector<BeatFiducials> delineate_waves(const CalibratedSignal& sig, const RPeakSet& peaks,
                                           const DelineationConfig& cfg) {
  if (peaks.indices.empty()) throw Error(ErrorCode::kNoPeaks, "delineation needs at least one R peak");
  const std::vector<double>& x = sig.samples_mV;
  const double fs = sig.sampling_rate_hz();
  const auto samples = [fs](double seconds) { return static_cast<std::ptrdiff_t>(std::lround(seconds * fs)); };
  const std::ptrdiff_t qs = samples(cfg.qs_window_s);
  const std::ptrdiff_t p_reach = samples(cfg.p_window_s);
  const std::ptrdiff_t t_reach = samples(cfg.t_window_s);
  const std::ptrdiff_t last_index = static_cast<std::ptrdiff_t>(x.size()) - 1;

  std::vector<BeatFiducials> beats;
  beats.reserve(peaks.size());
  for (std::size_t k = 0; k < peaks.size(); ++k) {
    const auto r = static_cast<std::ptrdiff_t>(peaks.indices[k]);
    if (r > last_index) throw Error(ErrorCode::kInvalidParams, "R peak lies beyond the signal");
    const std::ptrdiff_t prev = k > 0 ? static_cast<std::ptrdiff_t>(peaks.indices[k - 1]) : -1;
    const std::ptrdiff_t next =
        k + 1 < peaks.size() ? static_cast<std::ptrdiff_t>(peaks.indices[k + 1]) : last_index + 1;

    // Windows may not reach the neighbouring R peak or past the record edge.
    const std::ptrdiff_t floor = std::max<std::ptrdiff_t>(prev, -1) + 1;
    const std::ptrdiff_t ceil = std::min(next - 1, last_index);

    BeatFiducials beat;
    beat.r = static_cast<std::size_t>(r);
    auto lower = [](double a, double b) { return a < b; };
    auto higher = [](double a, double b) { return a > b; };

    if (auto w = open_window(r - qs, r, floor, ceil)) beat.q = extremum(x, *w, lower);
    if (auto w = open_window(r, r + qs, floor, ceil)) beat.s = extremum(x, *w, lower);
    if (auto w = open_window(r - p_reach, r - qs, floor, ceil)) {
      beat.p = extremum(x, *w, higher);
      beat.p_low_prominence = prominence(x, *w, *beat.p) < cfg.prominence_floor_mV;
    }
    std::ptrdiff_t t_end = r + t_reach;
    if (k + 1 < peaks.size()) {
      t_end = std::min(t_end, r + static_cast<std::ptrdiff_t>(std::floor(cfg.t_rr_fraction * (next - r))));
    }
    if (auto w = open_window(r + qs, t_end, floor, ceil)) {
      beat.t = extremum(x, *w, higher);
      beat.t_low_prominence = prominence(x, *w, *beat.t) < cfg.prominence_floor_mV;
    }
    beats.push_back(beat);
  }
  return beats;
}

}  // namespace ecg::analysis
