#include "tubeground/geometry.hpp"

#include <algorithm>

namespace tubeground {

double box_iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix1 = std::max(a.x1, b.x1);
  const double iy1 = std::max(a.y1, b.y1);
  const double ix2 = std::min(a.x2, b.x2);
  const double iy2 = std::min(a.y2, b.y2);

  const double iw = std::max(0.0, ix2 - ix1);
  const double ih = std::max(0.0, iy2 - iy1);
  const double inter = iw * ih;

  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

FrameInterval interval_intersection(const FrameInterval& a, const FrameInterval& b) {
  FrameInterval out;
  out.start = std::max(a.start, b.start);
  out.end = std::min(a.end, b.end);
  if (out.end < out.start) out.end = out.start;
  return out;
}

BoundingBox lerp_box(const BoundingBox& a, const BoundingBox& b, double t) {
  BoundingBox out;
  out.x1 = a.x1 + (b.x1 - a.x1) * t;
  out.y1 = a.y1 + (b.y1 - a.y1) * t;
  out.x2 = a.x2 + (b.x2 - a.x2) * t;
  out.y2 = a.y2 + (b.y2 - a.y2) * t;
  return out;
}

}  // namespace tubeground
