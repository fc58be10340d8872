#pragma once

// Raw planar YUV 4:2:0, 10-bit samples in 16-bit little-endian words, luma first.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "qe/error.hpp"
#include "qe/frame.hpp"

namespace qe {

struct YuvGeometry {
  int width = 0;
  int height = 0;

  std::uint64_t luma_bytes() const { return 2ull * width * height; }
  std::uint64_t chroma_bytes() const {
    const std::uint64_t cw = (static_cast<std::uint64_t>(width) + 1) / 2;
    const std::uint64_t ch = (static_cast<std::uint64_t>(height) + 1) / 2;
    return 2ull * 2ull * cw * ch;
  }
  std::uint64_t frame_bytes() const { return luma_bytes() + chroma_bytes(); }
};

// Luma plane plus the untouched chroma bytes of the same frame.
struct RawFrame {
  Plane luma;
  std::vector<char> chroma;
};

namespace detail {

inline Plane decode_luma(const std::vector<unsigned char>& bytes, int width, int height) {
  std::vector<Sample> samples(static_cast<std::size_t>(width) * height);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample v = static_cast<Sample>(bytes[2 * i] | (bytes[2 * i + 1] << 8));
    if (v > kMaxSample) {
      throw Error(ErrorKind::Range,
                  "luma sample " + std::to_string(v) + " at index " + std::to_string(i) + " exceeds 1023");
    }
    samples[i] = v;
  }
  return Plane(width, height, std::move(samples));
}

inline void encode_luma(std::ostream& out, const Plane& plane) {
  std::vector<unsigned char> bytes(plane.size() * 2);
  for (std::size_t i = 0; i < plane.size(); ++i) {
    const Sample v = plane.samples()[i];
    bytes[2 * i] = static_cast<unsigned char>(v & 0xff);
    bytes[2 * i + 1] = static_cast<unsigned char>(v >> 8);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return in;
}

inline std::uint64_t checked_file_size(const std::filesystem::path& path) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot stat " + path.string() + ": " + ec.message());
  return size;
}

inline void require_bytes(const std::filesystem::path& path, std::uint64_t end) {
  const std::uint64_t size = checked_file_size(path);
  if (size < end) {
    throw Error(ErrorKind::Truncation, path.string() + " ends at byte offset " + std::to_string(size) +
                                           ", frame data needs bytes up to offset " + std::to_string(end));
  }
}

}  // namespace detail

inline std::size_t count_yuv_frames(const std::filesystem::path& path, int width, int height) {
  return static_cast<std::size_t>(detail::checked_file_size(path) / YuvGeometry{width, height}.frame_bytes());
}

inline Plane load_yuv_luma(const std::filesystem::path& path, int width, int height, std::size_t frame_index) {
  const YuvGeometry geo{width, height};
  const std::uint64_t offset = geo.frame_bytes() * frame_index;
  detail::require_bytes(path, offset + geo.luma_bytes());
  auto in = detail::open_input(path);
  in.seekg(static_cast<std::streamoff>(offset));
  std::vector<unsigned char> bytes(geo.luma_bytes());
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw Error(ErrorKind::Truncation, "short read at byte offset " + std::to_string(offset));
  return detail::decode_luma(bytes, width, height);
}

inline RawFrame load_yuv_frame(const std::filesystem::path& path, int width, int height, std::size_t frame_index) {
  const YuvGeometry geo{width, height};
  const std::uint64_t offset = geo.frame_bytes() * frame_index;
  detail::require_bytes(path, offset + geo.frame_bytes());
  RawFrame frame{load_yuv_luma(path, width, height, frame_index), std::vector<char>(geo.chroma_bytes())};
  auto in = detail::open_input(path);
  in.seekg(static_cast<std::streamoff>(offset + geo.luma_bytes()));
  in.read(frame.chroma.data(), static_cast<std::streamsize>(frame.chroma.size()));
  if (!in) throw Error(ErrorKind::Truncation, "short chroma read at byte offset " + std::to_string(offset));
  return frame;
}

// Writes full 4:2:0 frames; chroma is copied from each RawFrame.
inline void write_yuv_frames(const std::filesystem::path& path, std::span<const RawFrame> frames) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot create " + path.string());
  for (const auto& frame : frames) {
    const YuvGeometry geo{frame.luma.width(), frame.luma.height()};
    if (frame.chroma.size() != geo.chroma_bytes()) {
      throw Error(ErrorKind::Shape, "chroma payload does not match luma geometry");
    }
    detail::encode_luma(out, frame.luma);
    out.write(frame.chroma.data(), static_cast<std::streamsize>(frame.chroma.size()));
  }
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

// Luma-only convenience writer; chroma is filled with mid-grey (512).
inline void write_yuv_luma(const std::filesystem::path& path, std::span<const Plane> planes) {
  std::vector<RawFrame> frames;
  frames.reserve(planes.size());
  for (const auto& p : planes) {
    const YuvGeometry geo{p.width(), p.height()};
    std::vector<char> chroma(geo.chroma_bytes());
    for (std::size_t i = 0; i < chroma.size(); i += 2) {
      chroma[i] = 0x00;
      chroma[i + 1] = 0x02;
    }
    frames.push_back(RawFrame{p, std::move(chroma)});
  }
  write_yuv_frames(path, frames);
}

}  // namespace qe
