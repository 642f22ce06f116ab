#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ecg/image.hpp"

namespace ecg::binarization {

struct Histogram256 {
  std::array<std::uint64_t, 256> counts{};
  std::uint64_t total = 0;
};

Histogram256 histogram(const GrayImage& img);

/// Otsu threshold: the gray level t maximising the between-class variance
/// w0 * w1 * (mu0 - mu1)^2, with class 0 = values <= t. Ties resolve to the
/// smallest t. Throws kDegenerateHistogram when all mass sits in one bin and
/// kInvalidParams for an empty histogram.
int otsu_threshold(const Histogram256& hist);

/// Ink where gray <= threshold (dark trace on light paper).
BinaryImage binarize(const GrayImage& img, int threshold);

struct Offset {
  int dx = 0;
  int dy = 0;
  friend bool operator==(const Offset&, const Offset&) = default;
};

struct StructuringElement {
  int length = 4;
  double angle_deg = 0.0;  // [0, 180), counter-clockwise from +x
};

/// Bresenham raster of the segment, exactly `length` pixels, anchored at
/// pixel index length / 2.
std::vector<Offset> rasterize(const StructuringElement& se);

/// Morphological opening (erosion then dilation) with a flat element given
/// as offsets from its anchor. Pixels outside the image count as background.
BinaryImage open(const BinaryImage& mask, const std::vector<Offset>& element);

/// Union over angles 0, step, 2*step, ... < 180 of the opening with a linear
/// element of `se_length` pixels. Keeps strokes that are locally straight over
/// `se_length` pixels in some sampled direction and drops isolated specks.
BinaryImage remove_artifacts(const BinaryImage& mask, int se_length = 4, double angle_step_deg = 15.0);

}  // namespace ecg::binarization
