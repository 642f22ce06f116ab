#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <vector>

#include "ecg/imaging.hpp"

namespace ecg::imaging {
namespace {

constexpr int kStripWidth = 4;

double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

// Column strips of the zero-mean ink field, summed per row. Projecting the
// strips instead of single pixels keeps each candidate angle at
// O(strips * height).
struct StripProfiles {
  int strips = 0;
  int height = 0;
  std::vector<double> centers;  // strip centre x, relative to the image centre
  std::vector<double> rows;     // strips x height, strip-major
};

StripProfiles build_strips(const GrayImage& img) {
  const int w = img.width();
  const int h = img.height();
  double total = 0.0;
  for (std::uint8_t v : img.pixels()) total += 255.0 - v;
  const double mean_ink = total / static_cast<double>(img.size());

  StripProfiles sp;
  sp.strips = (w + kStripWidth - 1) / kStripWidth;
  sp.height = h;
  sp.centers.resize(static_cast<std::size_t>(sp.strips));
  sp.rows.assign(static_cast<std::size_t>(sp.strips) * static_cast<std::size_t>(h), 0.0);
  const double cx = (w - 1) / 2.0;
  for (int s = 0; s < sp.strips; ++s) {
    const int x0 = s * kStripWidth;
    const int x1 = std::min(w, x0 + kStripWidth);
    sp.centers[static_cast<std::size_t>(s)] = (x0 + x1 - 1) / 2.0 - cx;
  }
  for (int y = 0; y < h; ++y) {
    auto row = img.row(y);
    for (int s = 0; s < sp.strips; ++s) {
      const int x0 = s * kStripWidth;
      const int x1 = std::min(w, x0 + kStripWidth);
      double acc = 0.0;
      for (int x = x0; x < x1; ++x) acc += 255.0 - row[static_cast<std::size_t>(x)] - mean_ink;
      sp.rows[static_cast<std::size_t>(s) * static_cast<std::size_t>(h) + static_cast<std::size_t>(y)] = acc;
    }
  }
  return sp;
}

// Variance of the row profile obtained by integrating along lines of slope
// tan(angle). Content tilted counter-clockwise by `angle` (image y grows
// downward) lines up with constant y + x * tan(angle).
double profile_variance(const StripProfiles& sp, double angle_deg, int pad, std::vector<double>& bins) {
  const double slope = std::tan(deg_to_rad(angle_deg));
  std::fill(bins.begin(), bins.end(), 0.0);
  const std::size_t h = static_cast<std::size_t>(sp.height);
  for (int s = 0; s < sp.strips; ++s) {
    const double shift = sp.centers[static_cast<std::size_t>(s)] * slope + pad;
    const double base = std::floor(shift);
    const double frac = shift - base;
    const auto offset = static_cast<std::ptrdiff_t>(base);
    const double* src = sp.rows.data() + static_cast<std::size_t>(s) * h;
    double* dst = bins.data() + offset;
    for (std::size_t y = 0; y < h; ++y) {
      const double v = src[y];
      dst[y] += v * (1.0 - frac);
      dst[y + 1] += v * frac;
    }
  }
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double b : bins) {
    sum += b;
    sum_sq += b * b;
  }
  const double n = static_cast<double>(bins.size());
  const double mean = sum / n;
  return std::max(0.0, sum_sq / n - mean * mean);
}

}  // namespace

SkewEstimate estimate_skew(const GrayImage& img, double half_range_deg, double step_deg) {
  if (!(half_range_deg > 0.0 && half_range_deg <= 45.0)) {
    throw Error(ErrorCode::kInvalidParams, "skew search half-range must be in (0, 45] degrees");
  }
  if (!(step_deg > 0.0 && step_deg <= half_range_deg)) {
    throw Error(ErrorCode::kInvalidParams, "skew step must be in (0, half-range]");
  }

  const StripProfiles sp = build_strips(img);
  const double max_shift = (img.width() / 2.0 + kStripWidth) * std::tan(deg_to_rad(half_range_deg));
  const int pad = static_cast<int>(std::ceil(max_shift)) + 2;
  std::vector<double> bins(static_cast<std::size_t>(img.height() + 2 * pad + 2), 0.0);

  // Candidates are indexed by integer multiples of the step.
  const int max_index = static_cast<int>(std::floor(half_range_deg / step_deg + 1e-9));
  std::map<int, double> scores;
  auto score = [&](int k) {
    auto it = scores.find(k);
    if (it != scores.end()) return it->second;
    const double v = profile_variance(sp, k * step_deg, pad, bins);
    scores.emplace(k, v);
    return v;
  };

  const int coarse = 4 * step_deg <= half_range_deg ? 4 : 1;
  int best_coarse = 0;
  double best_coarse_score = -1.0;
  for (int k = -(max_index / coarse) * coarse; k <= max_index; k += coarse) {
    const double v = score(k);
    if (v > best_coarse_score) {
      best_coarse_score = v;
      best_coarse = k;
    }
  }
  for (int k = std::max(-max_index, best_coarse - coarse + 1); k <= std::min(max_index, best_coarse + coarse - 1);
       ++k) {
    score(k);
  }

  int best_k = 0;
  double best = -1.0;
  double worst = 0.0;
  double sum = 0.0;
  bool first = true;
  for (const auto& [k, v] : scores) {
    sum += v;
    if (first || v < worst) worst = v;
    first = false;
    // Prefer the smaller tilt on exact ties.
    if (v > best || (v == best && std::abs(k) < std::abs(best_k))) {
      best = v;
      best_k = k;
    }
  }
  if (!(best > 0.0) || best - worst <= 1e-9 * best) {
    throw Error(ErrorCode::kDegenerateImage, "projection profile is identical at every candidate angle");
  }
  const double mean = sum / static_cast<double>(scores.size());
  return {best_k * step_deg, best / mean};
}

}  // namespace ecg::imaging
