#include <algorithm>

#include "ecg/extraction.hpp"

namespace ecg::extraction {

bool Envelope::gap_free() const {
  return std::none_of(gap_mask.begin(), gap_mask.end(), [](bool g) { return g; });
}

Envelopes extract_envelopes(const BinaryImage& mask) {
  const int w = mask.width();
  const int h = mask.height();
  std::vector<int> top(static_cast<std::size_t>(w), -1);
  std::vector<int> bottom(static_cast<std::size_t>(w), -1);
  // Row-major sweep: the first row that hits a column is its top, the last is
  // its bottom.
  for (int y = 0; y < h; ++y) {
    auto row = mask.row(y);
    for (int x = 0; x < w; ++x) {
      if (!is_ink(row[static_cast<std::size_t>(x)])) continue;
      auto& t = top[static_cast<std::size_t>(x)];
      if (t < 0) t = y;
      bottom[static_cast<std::size_t>(x)] = y;
    }
  }
  if (std::all_of(top.begin(), top.end(), [](int t) { return t < 0; })) {
    throw Error(ErrorCode::kEmptyMask, "binary mask contains no ink");
  }

  Envelopes out;
  for (Envelope* env : {&out.top, &out.bottom}) {
    env->values.assign(static_cast<std::size_t>(w), 0.0);
    env->gap_mask.assign(static_cast<std::size_t>(w), false);
    env->height = h;
  }
  for (std::size_t c = 0; c < top.size(); ++c) {
    if (top[c] < 0) {
      out.top.gap_mask[c] = true;
      out.bottom.gap_mask[c] = true;
      continue;
    }
    out.top.values[c] = top[c];
    out.bottom.values[c] = bottom[c];
  }
  return out;
}

Envelope fill_gaps(const Envelope& env, GapStrategy strategy) {
  const std::size_t n = env.values.size();
  std::size_t first = n;
  for (std::size_t c = 0; c < n; ++c) {
    if (!env.gap_mask[c]) {
      first = c;
      break;
    }
  }
  if (first == n) throw Error(ErrorCode::kAllGaps, "envelope has no present values");

  Envelope out = env;
  for (std::size_t c = 0; c < first; ++c) out.values[c] = env.values[first];

  std::size_t prev = first;
  for (std::size_t c = first + 1; c < n; ++c) {
    if (!env.gap_mask[c]) {
      if (strategy == GapStrategy::kLinearInterpolate && c - prev > 1) {
        const double a = env.values[prev];
        const double b = env.values[c];
        const double span = static_cast<double>(c - prev);
        for (std::size_t g = prev + 1; g < c; ++g) {
          out.values[g] = a + (b - a) * static_cast<double>(g - prev) / span;
        }
      }
      prev = c;
      continue;
    }
    // Repeat-previous fill; interpolation overwrites interior runs once the
    // next present value is reached, and keeps this for trailing gaps.
    out.values[c] = env.values[prev];
  }
  std::fill(out.gap_mask.begin(), out.gap_mask.end(), false);
  return out;
}

PixelTrace average_envelopes(const Envelope& top, const Envelope& bottom) {
  if (top.width() != bottom.width()) {
    throw Error(ErrorCode::kWidthMismatch, "top and bottom envelopes differ in width");
  }
  if (!top.gap_free() || !bottom.gap_free()) {
    throw Error(ErrorCode::kInvalidParams, "envelopes must be gap-free before averaging");
  }
  PixelTrace trace;
  trace.height = std::max(top.height, bottom.height);
  trace.samples.resize(top.width());
  for (std::size_t c = 0; c < top.width(); ++c) {
    trace.samples[c] = (top.values[c] + bottom.values[c]) / 2.0;
  }
  return trace;
}

}  // namespace ecg::extraction
