#pragma once

// CU layout sidecar: one coding unit per line, "x y w h qp mode" with mode I or P.
// Blank lines and lines starting with '#' are ignored.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "qe/error.hpp"
#include "qe/frame.hpp"

namespace qe {

inline constexpr int kMaxQp = 63;

struct CodingUnit {
  Rect rect;
  int qp = 0;
  CodingType mode = CodingType::Intra;

  friend bool operator==(const CodingUnit&, const CodingUnit&) = default;
};

struct CuLayout {
  int width = 0;
  int height = 0;
  std::vector<CodingUnit> units;

  // Index of the unit covering each pixel, row-major. Only valid for a validated layout.
  std::vector<std::size_t> owner_map() const {
    std::vector<std::size_t> owner(static_cast<std::size_t>(width) * height);
    for (std::size_t u = 0; u < units.size(); ++u) {
      const Rect& r = units[u].rect;
      for (int y = r.y; y < r.y + r.h; ++y) {
        for (int x = r.x; x < r.x + r.w; ++x) owner[static_cast<std::size_t>(y) * width + x] = u;
      }
    }
    return owner;
  }

  bool all_intra() const {
    for (const auto& cu : units) {
      if (cu.mode != CodingType::Intra) return false;
    }
    return true;
  }

  // Area-weighted mean QP, rounded to nearest.
  int mean_qp() const {
    long long weighted = 0;
    long long area = 0;
    for (const auto& cu : units) {
      weighted += cu.rect.area() * cu.qp;
      area += cu.rect.area();
    }
    return area == 0 ? 0 : static_cast<int>((weighted + area / 2) / area);
  }
};

// Throws Range for bad QP, Tiling for anything that is not an exact partition of the frame.
inline void validate_layout(const CuLayout& layout) {
  if (layout.width <= 0 || layout.height <= 0) throw Error(ErrorKind::Tiling, "layout has empty frame");
  for (std::size_t u = 0; u < layout.units.size(); ++u) {
    const auto& cu = layout.units[u];
    if (cu.qp < 0 || cu.qp > kMaxQp) {
      throw Error(ErrorKind::Range, "CU " + std::to_string(u) + " has qp " + std::to_string(cu.qp) +
                                        " outside [0, 63]");
    }
    const Rect& r = cu.rect;
    if (r.w <= 0 || r.h <= 0 || r.x < 0 || r.y < 0 || r.x + r.w > layout.width || r.y + r.h > layout.height) {
      throw Error(ErrorKind::Tiling, "CU " + std::to_string(u) + " at (" + std::to_string(r.x) + "," +
                                         std::to_string(r.y) + ") size " + std::to_string(r.w) + "x" +
                                         std::to_string(r.h) + " lies outside the frame");
    }
  }
  std::vector<int> coverage(static_cast<std::size_t>(layout.width) * layout.height, 0);
  for (const auto& cu : layout.units) {
    const Rect& r = cu.rect;
    for (int y = r.y; y < r.y + r.h; ++y) {
      for (int x = r.x; x < r.x + r.w; ++x) ++coverage[static_cast<std::size_t>(y) * layout.width + x];
    }
  }
  for (std::size_t i = 0; i < coverage.size(); ++i) {
    if (coverage[i] != 1) {
      const auto x = i % static_cast<std::size_t>(layout.width);
      const auto y = i / static_cast<std::size_t>(layout.width);
      throw Error(ErrorKind::Tiling, std::string(coverage[i] == 0 ? "uncovered" : "doubly-covered") +
                                         " pixel at (" + std::to_string(x) + "," + std::to_string(y) + ")");
    }
  }
}

inline CuLayout parse_cu_layout(std::istream& in, int width, int height) {
  CuLayout layout{width, height, {}};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    CodingUnit cu;
    std::string mode;
    if (!(fields >> cu.rect.x >> cu.rect.y >> cu.rect.w >> cu.rect.h >> cu.qp >> mode)) {
      throw Error(ErrorKind::Format, "line " + std::to_string(line_no) + ": expected 'x y w h qp mode'");
    }
    std::string rest;
    if (fields >> rest) throw Error(ErrorKind::Format, "line " + std::to_string(line_no) + ": trailing fields");
    if (mode == "I") {
      cu.mode = CodingType::Intra;
    } else if (mode == "P") {
      cu.mode = CodingType::Inter;
    } else {
      throw Error(ErrorKind::Format, "line " + std::to_string(line_no) + ": mode must be I or P, got '" + mode + "'");
    }
    layout.units.push_back(cu);
  }
  validate_layout(layout);
  return layout;
}

inline CuLayout load_cu_layout(const std::filesystem::path& path, int width, int height) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open CU layout " + path.string());
  return parse_cu_layout(in, width, height);
}

inline void save_cu_layout(const std::filesystem::path& path, const CuLayout& layout) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot create " + path.string());
  for (const auto& cu : layout.units) {
    out << cu.rect.x << ' ' << cu.rect.y << ' ' << cu.rect.w << ' ' << cu.rect.h << ' ' << cu.qp << ' '
        << to_char(cu.mode) << '\n';
  }
}

// Concatenates per-CU prediction blocks into a frame-sized prediction plane.
inline Plane assemble_prediction(const CuLayout& layout, const std::map<std::size_t, Plane>& blocks) {
  validate_layout(layout);
  Plane out(layout.width, layout.height);
  for (std::size_t u = 0; u < layout.units.size(); ++u) {
    const Rect& r = layout.units[u].rect;
    const auto it = blocks.find(u);
    if (it == blocks.end()) throw Error(ErrorKind::Assembly, "no prediction block for CU " + std::to_string(u));
    const Plane& block = it->second;
    if (block.width() != r.w || block.height() != r.h) {
      throw Error(ErrorKind::Assembly, "prediction block for CU " + std::to_string(u) + " is " +
                                           std::to_string(block.width()) + "x" + std::to_string(block.height()) +
                                           ", CU is " + std::to_string(r.w) + "x" + std::to_string(r.h));
    }
    for (int y = 0; y < r.h; ++y) {
      for (int x = 0; x < r.w; ++x) out.set(r.x + x, r.y + y, block.at(x, y));
    }
  }
  return out;
}

}  // namespace qe
