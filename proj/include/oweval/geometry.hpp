#pragma once

#include <algorithm>

#include "oweval/types.hpp"

namespace oweval {

// Intersection over union of two boxes, in [0,1]. Boxes are closed
// real-valued rectangles; touching edges intersect with zero area, which
// counts as no overlap. Identical boxes yield exactly 1.
inline double iou(const BBox& a, const BBox& b) {
  if (a == b) return 1.0;
  const double ix =
      std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const double iy =
      std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace oweval
