#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ecg/image.hpp"

namespace ecg::imaging {

// ---------------------------------------------------------------------------
// Codecs (PNG and JPEG)
// ---------------------------------------------------------------------------

/// Decodes a PNG or JPEG byte stream. 16-bit PNGs are scaled to 8 bits and
/// any alpha channel is composited over white.
RasterImage load_image(std::span<const std::uint8_t> data);
RasterImage load_image_file(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const RasterImage& img);
std::vector<std::uint8_t> encode_png(const GrayImage& img);
/// 1-bit grayscale PNG; ink is written black.
std::vector<std::uint8_t> encode_png(const BinaryImage& mask);
std::vector<std::uint8_t> encode_jpeg(const RasterImage& img, int quality);

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Grayscale
// ---------------------------------------------------------------------------

/// ITU-R BT.601 luma, round-half-up: 0.299 R + 0.587 G + 0.114 B.
std::uint8_t luminance(Rgb px) noexcept;
GrayImage to_grayscale(const RasterImage& img);

// ---------------------------------------------------------------------------
// Skew
// ---------------------------------------------------------------------------

struct SkewEstimate {
  double angle_deg = 0.0;   // positive = content tilted counter-clockwise
  double confidence = 0.0;  // best profile variance / mean over candidates
};

/// Finds the tilt whose projection profile of ink (255 - gray) is sharpest.
///
/// Candidates are multiples of `step_deg` in [-half_range_deg, half_range_deg].
/// The search runs a coarse pass at four times the step, then refines at
/// `step_deg` around the coarse winner. Each candidate angle projects the
/// image along lines of that slope (a discrete Radon projection) and scores
/// the variance of the resulting row profile.
///
/// Throws kDegenerateImage when no angle stands out (blank or uniform input),
/// kInvalidParams when the range or step is out of bounds.
SkewEstimate estimate_skew(const GrayImage& img, double half_range_deg = 10.0, double step_deg = 0.25);

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// Rotates content counter-clockwise by `angle_deg` about the image centre.
/// Bilinear sampling; uncovered area is white; the canvas grows to hold the
/// whole rotated frame. A zero angle returns an identical copy.
RasterImage rotate(const RasterImage& img, double angle_deg);
GrayImage rotate(const GrayImage& img, double angle_deg);

struct CropRect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  friend bool operator==(const CropRect&, const CropRect&) = default;
};

template <typename Pixel>
Image<Pixel> crop(const Image<Pixel>& img, const CropRect& rect) {
  if (rect.w < 1 || rect.h < 1 || rect.x < 0 || rect.y < 0 || rect.x + rect.w > img.width() ||
      rect.y + rect.h > img.height()) {
    throw Error(ErrorCode::kBoundsError, "crop rectangle escapes the image");
  }
  Image<Pixel> out(rect.w, rect.h);
  for (int y = 0; y < rect.h; ++y) {
    auto src = img.row(rect.y + y).subspan(static_cast<std::size_t>(rect.x), static_cast<std::size_t>(rect.w));
    std::copy(src.begin(), src.end(), out.row(y).begin());
  }
  return out;
}

}  // namespace ecg::imaging
