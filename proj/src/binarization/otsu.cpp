#include <algorithm>

#include "ecg/binarization.hpp"

namespace ecg::binarization {

Histogram256 histogram(const GrayImage& img) {
  Histogram256 h;
  for (std::uint8_t v : img.pixels()) ++h.counts[v];
  h.total = img.size();
  return h;
}

namespace {

using u128 = unsigned __int128;

// a/b < c/d for b, d > 0, via continued-fraction expansion so nothing
// overflows.
bool fraction_less(u128 a, u128 b, u128 c, u128 d) {
  bool flipped = false;
  for (;;) {
    const u128 qa = a / b;
    const u128 qc = c / d;
    if (qa != qc) return (qa < qc) != flipped;
    a -= qa * b;
    c -= qc * d;
    if (a == 0 || c == 0) {
      if (a == c) return false;
      return (a == 0) != flipped;
    }
    // a/b < c/d  <=>  d/c < b/a
    std::swap(a, d);
    std::swap(b, c);
    std::swap(a, c);
    std::swap(b, d);
    flipped = !flipped;
  }
}

}  // namespace

int otsu_threshold(const Histogram256& hist) {
  if (hist.total == 0) throw Error(ErrorCode::kInvalidParams, "histogram is empty");
  const auto occupied = std::count_if(hist.counts.begin(), hist.counts.end(), [](auto c) { return c > 0; });
  if (occupied < 2) throw Error(ErrorCode::kDegenerateHistogram, "all pixels share one gray level");

  std::uint64_t mass_total = 0;
  for (int b = 0; b < 256; ++b) mass_total += static_cast<std::uint64_t>(b) * hist.counts[static_cast<std::size_t>(b)];

  // w0 w1 (mu0 - mu1)^2 = (N s0 - n0 S)^2 / (N^2 n0 n1). |N s0 - n0 S| is at
  // most 255 N^2 / 4, so the squared numerator fits 128 bits while N < 2^29
  // and ties are decided exactly. Larger totals fall back to long double.
  const bool exact = hist.total < (std::uint64_t{1} << 29);
  const long double n = static_cast<long double>(hist.total);
  std::uint64_t n0 = 0;
  std::uint64_t s0 = 0;
  int best_t = -1;
  u128 best_num = 0, best_den = 1;
  long double best = -1.0L;
  for (int t = 0; t < 256; ++t) {
    n0 += hist.counts[static_cast<std::size_t>(t)];
    s0 += static_cast<std::uint64_t>(t) * hist.counts[static_cast<std::size_t>(t)];
    const std::uint64_t n1 = hist.total - n0;
    if (n0 == 0 || n1 == 0) continue;
    if (exact) {
      const __int128 diff = static_cast<__int128>(hist.total) * s0 - static_cast<__int128>(n0) * mass_total;
      const u128 mag = static_cast<u128>(diff < 0 ? -diff : diff);
      const u128 num = mag * mag;
      const u128 den = static_cast<u128>(n0) * n1;
      if (best_t < 0 || fraction_less(best_num, best_den, num, den)) {
        best_num = num;
        best_den = den;
        best_t = t;
      }
    } else {
      const long double w0 = n0 / n;
      const long double w1 = n1 / n;
      const long double mu0 = static_cast<long double>(s0) / n0;
      const long double mu1 = static_cast<long double>(mass_total - s0) / n1;
      const long double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
      if (between > best) {
        best = between;
        best_t = t;
      }
    }
  }
  return best_t;
}

BinaryImage binarize(const GrayImage& img, int threshold) {
  if (threshold < 0 || threshold > 255) throw Error(ErrorCode::kInvalidParams, "threshold must be in [0, 255]");
  BinaryImage out(img.width(), img.height());
  auto src = img.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = src[i] <= threshold ? Mask::kInk : Mask::kBackground;
  }
  return out;
}

}  // namespace ecg::binarization
