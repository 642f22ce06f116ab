#pragma once

// Reference implementations used to cross-check the library. Each one
// follows the textbook definition by a different route from the code under
// test and favours clarity over speed.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "ecg/binarization.hpp"
#include "ecg/evaluation.hpp"

namespace ecg::oracle {

// Weighted luminance evaluated in long double; values within 1e-9 of a half are exact
// halves (the weights have three decimals) and round up.
inline int grayscale(int r, int g, int b) {
  const long double y = 0.299L * r + 0.587L * g + 0.114L * b;
  const long double k = std::floor(y);
  const long double frac = y - k;
  int out = static_cast<int>(k);
  if (std::fabs(frac - 0.5L) < 1e-9L || frac > 0.5L) ++out;
  return std::clamp(out, 0, 255);
}

// Exhaustive scan of w0 w1 (mu0 - mu1)^2 from its definition in long double.
// Scores within a relative 1e-12 of the maximum are ties; the smallest t wins.
inline int otsu(const binarization::Histogram256& h) {
  std::array<long double, 256> score{};
  score.fill(-1.0L);
  const long double n = static_cast<long double>(h.total);
  for (int t = 0; t < 256; ++t) {
    long double n0 = 0, s0 = 0, n1 = 0, s1 = 0;
    for (int b = 0; b < 256; ++b) {
      const long double c = static_cast<long double>(h.counts[static_cast<std::size_t>(b)]);
      if (b <= t) {
        n0 += c;
        s0 += c * b;
      } else {
        n1 += c;
        s1 += c * b;
      }
    }
    if (n0 == 0 || n1 == 0) continue;
    const long double d = s0 / n0 - s1 / n1;
    score[static_cast<std::size_t>(t)] = (n0 / n) * (n1 / n) * d * d;
  }
  const long double best = *std::max_element(score.begin(), score.end());
  for (int t = 0; t < 256; ++t) {
    if (score[static_cast<std::size_t>(t)] >= best - 1e-12L * best) return t;
  }
  return -1;
}

// Histograms mixing sparse, dense and heavy-count shapes; at least two bins
// are occupied.
inline binarization::Histogram256 random_histogram(std::mt19937_64& rng) {
  binarization::Histogram256 h;
  const int style = static_cast<int>(rng() % 4);
  const int occupied = 2 + static_cast<int>(rng() % (style == 0 ? 6 : 255));
  for (int i = 0; i < occupied; ++i) {
    const auto b = static_cast<std::size_t>(rng() % 256);
    std::uint64_t c = 1 + rng() % 50;
    if (style == 2) c = 1 + rng() % 1000000;
    if (style == 3) c = 1 + rng() % 3;  // many exact ties
    h.counts[b] += c;
  }
  if (std::count_if(h.counts.begin(), h.counts.end(), [](auto c) { return c > 0; }) < 2) {
    h.counts[h.counts[0] ? 255 : 0] += 1;
  }
  h.total = 0;
  for (auto c : h.counts) h.total += c;
  return h;
}

// Least-squares polynomial weights from the normal equations (A'A) c = A'x,
// with A'A inverted by Gauss-Jordan elimination in long double. The weights
// evaluate the fit at window offset `at` (0 = centre).
inline std::vector<double> savgol_normal_equations(int window, int order, int at) {
  const int half = window / 2;
  const int m = order + 1;
  std::vector<std::vector<long double>> ata(m, std::vector<long double>(m, 0.0L));
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      for (int k = -half; k <= half; ++k) ata[i][j] += std::pow(static_cast<long double>(k), i + j);
    }
  }
  std::vector<std::vector<long double>> inv(m, std::vector<long double>(m, 0.0L));
  for (int i = 0; i < m; ++i) inv[i][i] = 1.0L;
  for (int col = 0; col < m; ++col) {
    int pivot = col;
    for (int r = col + 1; r < m; ++r) {
      if (std::fabs(ata[r][col]) > std::fabs(ata[pivot][col])) pivot = r;
    }
    std::swap(ata[col], ata[pivot]);
    std::swap(inv[col], inv[pivot]);
    const long double p = ata[col][col];
    for (int j = 0; j < m; ++j) {
      ata[col][j] /= p;
      inv[col][j] /= p;
    }
    for (int r = 0; r < m; ++r) {
      if (r == col) continue;
      const long double f = ata[r][col];
      for (int j = 0; j < m; ++j) {
        ata[r][j] -= f * ata[col][j];
        inv[r][j] -= f * inv[col][j];
      }
    }
  }
  std::vector<double> w(static_cast<std::size_t>(window));
  for (int k = -half; k <= half; ++k) {
    long double acc = 0.0L;
    for (int i = 0; i < m; ++i) {
      const long double basis_at = std::pow(static_cast<long double>(at), i);
      for (int j = 0; j < m; ++j) acc += basis_at * inv[i][j] * std::pow(static_cast<long double>(k), j);
    }
    w[static_cast<std::size_t>(k + half)] = static_cast<double>(acc);
  }
  return w;
}

struct OptimalMatching {
  std::size_t pairs = 0;
  double total_distance = 0.0;
};

// Every one-to-one assignment of detections to same-label truth points within
// tolerance, maximising the pair count and then minimising total distance.
inline OptimalMatching optimal_matching(const evaluation::FeaturePointSet& det,
                                        const evaluation::FeaturePointSet& truth, const evaluation::Tolerances& tol) {
  const std::size_t nd = det.points.size();
  const std::size_t nt = truth.points.size();
  std::vector<bool> used(nt, false);
  OptimalMatching best;
  bool have = false;
  std::size_t pairs = 0;
  double dist = 0.0;
  auto better = [&] {
    return !have || pairs > best.pairs || (pairs == best.pairs && dist < best.total_distance - 1e-12);
  };
  auto recurse = [&](auto& self, std::size_t i) -> void {
    if (i == nd) {
      if (better()) best = {pairs, dist}, have = true;
      return;
    }
    self(self, i + 1);  // leave detection i unmatched
    const auto& d = det.points[i];
    for (std::size_t j = 0; j < nt; ++j) {
      const auto& t = truth.points[j];
      const double gap = std::fabs(d.time_s - t.time_s);
      if (used[j] || t.label != d.label || gap > tol.for_label(d.label)) continue;
      used[j] = true;
      ++pairs;
      dist += gap;
      self(self, i + 1);
      dist -= gap;
      --pairs;
      used[j] = false;
    }
  };
  recurse(recurse, 0);
  return best;
}

// Random point sets of at most `max_size` points each. Truth points of one
// label sit more than twice the tolerance apart, the regime where greedy
// nearest matching is optimal; detections scatter around truth points or
// fall anywhere.
inline std::pair<evaluation::FeaturePointSet, evaluation::FeaturePointSet> random_point_sets(
    std::mt19937_64& rng, const evaluation::Tolerances& tol, std::size_t max_size = 8) {
  using evaluation::FeaturePoint;
  using evaluation::WaveLabel;
  std::uniform_int_distribution<std::size_t> size(0, max_size);
  std::uniform_int_distribution<int> label(0, 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  evaluation::FeaturePointSet truth{{}, evaluation::FeaturePointSet::Source::kGroundTruth};
  evaluation::FeaturePointSet det{{}, evaluation::FeaturePointSet::Source::kDetected};

  const std::size_t nt = size(rng);
  std::array<double, 5> cursor{};
  for (std::size_t i = 0; i < nt; ++i) {
    const auto l = static_cast<WaveLabel>(label(rng));
    auto& c = cursor[static_cast<std::size_t>(l)];
    c += 2.0 * tol.for_label(l) + 0.001 + 0.3 * unit(rng);
    truth.points.push_back({c, l});
  }
  const std::size_t nd = size(rng);
  for (std::size_t i = 0; i < nd; ++i) {
    if (!truth.points.empty() && unit(rng) < 0.75) {
      const auto& t = truth.points[rng() % truth.points.size()];
      const double spread = 1.3 * tol.for_label(t.label);
      det.points.push_back({std::max(0.0, t.time_s + (2.0 * unit(rng) - 1.0) * spread), t.label});
    } else {
      det.points.push_back({3.0 * unit(rng), static_cast<WaveLabel>(label(rng))});
    }
  }
  auto by_label_time = [](const FeaturePoint& a, const FeaturePoint& b) {
    return a.label != b.label ? a.label < b.label : a.time_s < b.time_s;
  };
  std::sort(truth.points.begin(), truth.points.end(), by_label_time);
  std::sort(det.points.begin(), det.points.end(), by_label_time);
  return {det, truth};
}

}  // namespace ecg::oracle
