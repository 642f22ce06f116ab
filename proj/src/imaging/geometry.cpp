#include <cmath>
#include <numbers>

#include "ecg/imaging.hpp"

namespace ecg::imaging {
namespace {

template <typename Pixel>
struct PixelOps;

template <>
struct PixelOps<std::uint8_t> {
  static constexpr std::uint8_t white() { return 255; }
  static std::uint8_t blend(std::uint8_t p00, std::uint8_t p10, std::uint8_t p01, std::uint8_t p11, double fx,
                            double fy) {
    const double top = p00 + (p10 - p00) * fx;
    const double bottom = p01 + (p11 - p01) * fx;
    return static_cast<std::uint8_t>(std::lround(top + (bottom - top) * fy));
  }
};

template <>
struct PixelOps<Rgb> {
  static constexpr Rgb white() { return {255, 255, 255}; }
  static Rgb blend(Rgb p00, Rgb p10, Rgb p01, Rgb p11, double fx, double fy) {
    auto channel = [&](auto member) {
      return PixelOps<std::uint8_t>::blend(p00.*member, p10.*member, p01.*member, p11.*member, fx, fy);
    };
    return {channel(&Rgb::r), channel(&Rgb::g), channel(&Rgb::b)};
  }
};

template <typename Pixel>
Image<Pixel> rotate_impl(const Image<Pixel>& img, double angle_deg) {
  if (angle_deg == 0.0) return img;
  using Ops = PixelOps<Pixel>;

  const double rad = angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(rad);
  const double s = std::sin(rad);
  const int w = img.width();
  const int h = img.height();
  int out_w = std::max(1, static_cast<int>(std::ceil(w * std::abs(c) + h * std::abs(s) - 1e-6)));
  int out_h = std::max(1, static_cast<int>(std::ceil(w * std::abs(s) + h * std::abs(c) - 1e-6)));
  // Same parity as the input keeps the two centres on a common pixel lattice,
  // so a rotation and its inverse line up without a half-pixel shift.
  if ((out_w - w) % 2 != 0) ++out_w;
  if ((out_h - h) % 2 != 0) ++out_h;

  const double cx = (w - 1) / 2.0;
  const double cy = (h - 1) / 2.0;
  const double ocx = (out_w - 1) / 2.0;
  const double ocy = (out_h - 1) / 2.0;

  auto sample = [&](int x, int y) { return img.contains(x, y) ? img.at(x, y) : Ops::white(); };

  Image<Pixel> out(out_w, out_h, Ops::white());
  for (int oy = 0; oy < out_h; ++oy) {
    const double dy = oy - ocy;
    auto row = out.row(oy);
    for (int ox = 0; ox < out_w; ++ox) {
      const double dx = ox - ocx;
      // Inverse mapping of a counter-clockwise (on screen) rotation.
      const double sx = cx + dx * c - dy * s;
      const double sy = cy + dx * s + dy * c;
      if (sx <= -1.0 || sy <= -1.0 || sx >= w || sy >= h) continue;
      const double fx0 = std::floor(sx);
      const double fy0 = std::floor(sy);
      const int x0 = static_cast<int>(fx0);
      const int y0 = static_cast<int>(fy0);
      const double fx = sx - fx0;
      const double fy = sy - fy0;
      if (x0 >= 0 && y0 >= 0 && x0 + 1 < w && y0 + 1 < h) {
        row[static_cast<std::size_t>(ox)] =
            Ops::blend(img.at(x0, y0), img.at(x0 + 1, y0), img.at(x0, y0 + 1), img.at(x0 + 1, y0 + 1), fx, fy);
      } else {
        row[static_cast<std::size_t>(ox)] = Ops::blend(sample(x0, y0), sample(x0 + 1, y0), sample(x0, y0 + 1),
                                                       sample(x0 + 1, y0 + 1), fx, fy);
      }
    }
  }
  return out;
}

}  // namespace

RasterImage rotate(const RasterImage& img, double angle_deg) { return rotate_impl(img, angle_deg); }

GrayImage rotate(const GrayImage& img, double angle_deg) { return rotate_impl(img, angle_deg); }

}  // namespace ecg::imaging
