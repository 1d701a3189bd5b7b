#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace tubeground {

/// Axis-aligned box in continuous frame coordinates, corners (x1,y1)-(x2,y2).
struct BoundingBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }

  bool valid() const {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
           std::isfinite(y2) && x1 <= x2 && y1 <= y2;
  }

  bool operator==(const BoundingBox&) const = default;
};

/// Intersection-over-union of two boxes. A union of zero area (two
/// degenerate boxes) yields 0 rather than 0/0.
double box_iou(const BoundingBox& a, const BoundingBox& b);

/// Half-open frame interval [start, end).
struct FrameInterval {
  std::int64_t start = 0;
  std::int64_t end = 0;

  std::int64_t length() const { return end - start; }
  bool empty() const { return end <= start; }
  bool contains(std::int64_t frame) const { return frame >= start && frame < end; }

  bool operator==(const FrameInterval&) const = default;
};

FrameInterval interval_intersection(const FrameInterval& a, const FrameInterval& b);

/// Linear interpolation between two boxes, t in [0,1].
BoundingBox lerp_box(const BoundingBox& a, const BoundingBox& b, double t);

}  // namespace tubeground
