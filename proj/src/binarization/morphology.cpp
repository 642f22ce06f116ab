#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>

#include "ecg/binarization.hpp"

namespace ecg::binarization {
namespace {

std::vector<Offset> bresenham(int x1, int y1) {
  std::vector<Offset> pts;
  const int dx = std::abs(x1);
  const int dy = -std::abs(y1);
  const int sx = x1 >= 0 ? 1 : -1;
  const int sy = y1 >= 0 ? 1 : -1;
  int err = dx + dy;
  int x = 0;
  int y = 0;
  while (true) {
    pts.push_back({x, y});
    if (x == x1 && y == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
  return pts;
}

// Ink pixels that can host the whole element at that anchor position.
bool fits(const BinaryImage& mask, int x, int y, const std::vector<Offset>& element) {
  for (const Offset& o : element) {
    const int px = x + o.dx;
    const int py = y + o.dy;
    if (!mask.contains(px, py) || !is_ink(mask.at(px, py))) return false;
  }
  return true;
}

struct Point {
  int x;
  int y;
};

std::vector<Point> ink_pixels(const BinaryImage& mask) {
  std::vector<Point> pts;
  for (int y = 0; y < mask.height(); ++y) {
    auto row = mask.row(y);
    for (int x = 0; x < mask.width(); ++x) {
      if (is_ink(row[static_cast<std::size_t>(x)])) pts.push_back({x, y});
    }
  }
  return pts;
}

// Erosion evaluated only at ink anchors (the anchor offset is part of the
// element, so background anchors never fit), then dilation into `out`.
void open_into(const BinaryImage& mask, const std::vector<Point>& ink, const std::vector<Offset>& element,
               BinaryImage& out) {
  for (const Point& p : ink) {
    if (!fits(mask, p.x, p.y, element)) continue;
    for (const Offset& o : element) out.at(p.x + o.dx, p.y + o.dy) = Mask::kInk;
  }
}

}  // namespace

std::vector<Offset> rasterize(const StructuringElement& se) {
  if (se.length < 2) throw Error(ErrorCode::kInvalidParams, "structuring element length must be >= 2");
  const double rad = se.angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(rad);
  const double s = -std::sin(rad);  // image rows grow downward
  const int steps = se.length - 1;
  int x1 = 0;
  int y1 = 0;
  if (std::abs(c) >= std::abs(s) - 1e-12) {
    x1 = c >= 0 ? steps : -steps;
    y1 = static_cast<int>(std::lround(steps * s / std::abs(c)));
  } else {
    y1 = s >= 0 ? steps : -steps;
    x1 = static_cast<int>(std::lround(steps * c / std::abs(s)));
  }
  auto pts = bresenham(x1, y1);
  const Offset anchor = pts[static_cast<std::size_t>(se.length / 2)];
  for (Offset& p : pts) {
    p.dx -= anchor.dx;
    p.dy -= anchor.dy;
  }
  return pts;
}

BinaryImage open(const BinaryImage& mask, const std::vector<Offset>& element) {
  BinaryImage out(mask.width(), mask.height(), Mask::kBackground);
  if (element.empty()) return out;
  if (std::find(element.begin(), element.end(), Offset{0, 0}) == element.end()) {
    // The anchor is not part of the element, so background anchors may fit too.
    for (int y = 0; y < mask.height(); ++y) {
      for (int x = 0; x < mask.width(); ++x) {
        if (!fits(mask, x, y, element)) continue;
        for (const Offset& o : element) {
          if (out.contains(x + o.dx, y + o.dy)) out.at(x + o.dx, y + o.dy) = Mask::kInk;
        }
      }
    }
    return out;
  }
  open_into(mask, ink_pixels(mask), element, out);
  return out;
}

BinaryImage remove_artifacts(const BinaryImage& mask, int se_length, double angle_step_deg) {
  if (se_length < 2) throw Error(ErrorCode::kInvalidParams, "structuring element length must be >= 2");
  if (!(angle_step_deg > 0.0 && angle_step_deg <= 90.0)) {
    throw Error(ErrorCode::kInvalidParams, "angle step must be in (0, 90] degrees");
  }
  std::vector<std::vector<Offset>> elements;
  for (int k = 0; k * angle_step_deg < 180.0 - 1e-9; ++k) {
    auto element = rasterize({se_length, k * angle_step_deg});
    // Nearby angles often rasterize identically.
    if (std::find(elements.begin(), elements.end(), element) == elements.end()) {
      elements.push_back(std::move(element));
    }
  }

  const auto ink = ink_pixels(mask);
  BinaryImage out(mask.width(), mask.height(), Mask::kBackground);
  for (const auto& element : elements) open_into(mask, ink, element, out);
  return out;
}

}  // namespace ecg::binarization
