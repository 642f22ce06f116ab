#include "ecg/imaging.hpp"

namespace ecg::imaging {

std::uint8_t luminance(Rgb px) noexcept {
  // Weights scaled by 1000 so the sum and the half-up rounding are exact.
  const unsigned scaled = 299u * px.r + 587u * px.g + 114u * px.b;
  return static_cast<std::uint8_t>((scaled + 500u) / 1000u);
}

GrayImage to_grayscale(const RasterImage& img) {
  GrayImage out(img.width(), img.height());
  auto src = img.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = luminance(src[i]);
  return out;
}

}  // namespace ecg::imaging
