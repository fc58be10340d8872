#pragma once

#include <string>
#include <vector>

#include "qe/cu_layout.hpp"
#include "qe/error.hpp"
#include "qe/frame.hpp"

namespace qe {

// Normalizer for QP maps; fixed so that signaled models see the same scale everywhere.
inline constexpr double kQpNormalizer = static_cast<double>(kMaxQp);

inline double normalize_qp(int qp) {
  if (qp < 0 || qp > kMaxQp) throw Error(ErrorKind::Range, "qp " + std::to_string(qp) + " outside [0, 63]");
  return static_cast<double>(qp) / kQpNormalizer;
}

inline QpMapPlane build_qp_map(const CuLayout& layout, int width, int height) {
  if (layout.width != width || layout.height != height) {
    throw Error(ErrorKind::Tiling, "layout covers " + std::to_string(layout.width) + "x" +
                                       std::to_string(layout.height) + ", frame is " + std::to_string(width) +
                                       "x" + std::to_string(height));
  }
  validate_layout(layout);
  std::vector<double> values(static_cast<std::size_t>(width) * height);
  for (const auto& cu : layout.units) {
    const double v = normalize_qp(cu.qp);
    const Rect& r = cu.rect;
    for (int y = r.y; y < r.y + r.h; ++y) {
      for (int x = r.x; x < r.x + r.w; ++x) values[static_cast<std::size_t>(y) * width + x] = v;
    }
  }
  return QpMapPlane(width, height, std::move(values));
}

inline QpMapPlane build_constant_qp_map(int qp, int width, int height) {
  const double v = normalize_qp(qp);
  if (width <= 0 || height <= 0) throw Error(ErrorKind::Shape, "qp map dimensions must be positive");
  return QpMapPlane(width, height, std::vector<double>(static_cast<std::size_t>(width) * height, v));
}

}  // namespace qe
