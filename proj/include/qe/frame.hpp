#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qe/error.hpp"

namespace qe {

inline constexpr int kBitDepth = 10;
inline constexpr int kMaxSample = (1 << kBitDepth) - 1;

using Sample = std::uint16_t;

enum class CodingType { Intra, Inter };

inline char to_char(CodingType t) { return t == CodingType::Intra ? 'I' : 'P'; }

struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  long long area() const { return static_cast<long long>(w) * h; }
  bool contains(int px, int py) const { return px >= x && px < x + w && py >= y && py < y + h; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

// Single 10-bit luma component, row-major.
class Plane {
 public:
  Plane() = default;

  Plane(int width, int height, Sample fill = 0)
      : width_(width), height_(height), samples_(checked_size(width, height), fill) {
    if (fill > kMaxSample) throw Error(ErrorKind::Range, "fill value " + std::to_string(fill) + " exceeds 1023");
  }

  Plane(int width, int height, std::vector<Sample> samples)
      : width_(width), height_(height), samples_(std::move(samples)) {
    if (samples_.size() != checked_size(width, height)) {
      throw Error(ErrorKind::Shape, "plane " + std::to_string(width) + "x" + std::to_string(height) +
                                        " given " + std::to_string(samples_.size()) + " samples");
    }
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      if (samples_[i] > kMaxSample) {
        throw Error(ErrorKind::Range,
                    "sample " + std::to_string(samples_[i]) + " at index " + std::to_string(i) + " exceeds 1023");
      }
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  static constexpr int bit_depth() { return kBitDepth; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }

  Sample at(int x, int y) const { return samples_[index(x, y)]; }

  void set(int x, int y, Sample v) {
    if (v > kMaxSample) throw Error(ErrorKind::Range, "sample " + std::to_string(v) + " exceeds 1023");
    samples_[index(x, y)] = v;
  }

  const std::vector<Sample>& samples() const { return samples_; }

  bool same_size(const Plane& other) const { return width_ == other.width_ && height_ == other.height_; }

  friend bool operator==(const Plane&, const Plane&) = default;

 private:
  static std::size_t checked_size(int width, int height) {
    if (width <= 0 || height <= 0) {
      throw Error(ErrorKind::Shape,
                  "plane dimensions must be positive, got " + std::to_string(width) + "x" + std::to_string(height));
    }
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<Sample> samples_;
};

// Normalized QP values in [0, 1] at frame resolution.
class QpMapPlane {
 public:
  QpMapPlane() = default;

  QpMapPlane(int width, int height, std::vector<double> values)
      : width_(width), height_(height), values_(std::move(values)) {
    if (width <= 0 || height <= 0 ||
        values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw Error(ErrorKind::Shape, "qp map size does not match " + std::to_string(width) + "x" +
                                        std::to_string(height));
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!(values_[i] >= 0.0 && values_[i] <= 1.0)) {
        throw Error(ErrorKind::Range, "qp map value at index " + std::to_string(i) + " outside [0, 1]");
      }
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  double at(int x, int y) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  const std::vector<double>& values() const { return values_; }

  friend bool operator==(const QpMapPlane&, const QpMapPlane&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

// Raster-scan CTB partition; boundary CTBs are clipped to the frame.
class CtbGrid {
 public:
  static constexpr int kDefaultCtbSize = 128;

  CtbGrid(int width, int height, int ctb_size = kDefaultCtbSize)
      : width_(width), height_(height), ctb_size_(ctb_size) {
    if (width <= 0 || height <= 0 || ctb_size <= 0) {
      throw Error(ErrorKind::Config, "ctb grid needs positive frame and ctb sizes");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int ctb_size() const { return ctb_size_; }
  int columns() const { return (width_ + ctb_size_ - 1) / ctb_size_; }
  int rows() const { return (height_ + ctb_size_ - 1) / ctb_size_; }
  std::size_t count() const { return static_cast<std::size_t>(columns()) * static_cast<std::size_t>(rows()); }

  Rect rect(std::size_t index) const {
    const int col = static_cast<int>(index % static_cast<std::size_t>(columns()));
    const int row = static_cast<int>(index / static_cast<std::size_t>(columns()));
    const int x = col * ctb_size_;
    const int y = row * ctb_size_;
    return Rect{x, y, std::min(ctb_size_, width_ - x), std::min(ctb_size_, height_ - y)};
  }

 private:
  int width_;
  int height_;
  int ctb_size_;
};

// Everything the enhancement network sees for one picture, plus the original on the encoder side.
struct FrameBundle {
  Plane reconstruction;
  Plane prediction;
  QpMapPlane qp_map;
  std::optional<Plane> original;
  CodingType coding_type = CodingType::Intra;
  int poc = 0;

  int width() const { return reconstruction.width(); }
  int height() const { return reconstruction.height(); }

  void validate() const {
    const auto mismatch = [&](const std::string& what) {
      return Error(ErrorKind::Shape, what + " size differs from reconstruction " +
                                         std::to_string(width()) + "x" + std::to_string(height()));
    };
    if (!prediction.same_size(reconstruction)) throw mismatch("prediction");
    if (qp_map.width() != width() || qp_map.height() != height()) throw mismatch("qp map");
    if (original && !original->same_size(reconstruction)) throw mismatch("original");
  }
};

}  // namespace qe
