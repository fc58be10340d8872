#pragma once

// Model-selection side channel.
//
// Per frame: f1 (1 bit). When f1 = 1, for every CTB in raster order: f2 then f3,
// where f2 is the coding mode (0 intra, 1 inter) and f3 the input set (0 CQ, 1 CQP).
// Bits are packed MSB first, frames are concatenated and the last byte is zero padded.
// CTB counts per frame are known to both sides from the frame size and CTB size.
//
// Signal file: magic "QESIGNAL", one version byte, then the packed bits.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qe/error.hpp"
#include "qe/model_registry.hpp"
#include "qe/selection.hpp"

namespace qe {

struct FrameSignal {
  bool f1 = false;
  std::vector<ModelId> ctb_models;

  friend bool operator==(const FrameSignal&, const FrameSignal&) = default;
};

inline FrameSignal to_signal(const SelectionResult& result) {
  FrameSignal s{result.f1, {}};
  if (result.f1) {
    s.ctb_models.reserve(result.decisions.size());
    for (const auto& d : result.decisions) s.ctb_models.push_back(d.model);
  }
  return s;
}

// Decoder-side selection result (no distortions or costs).
inline SelectionResult to_selection(const FrameSignal& signal, CodingType frame_type,
                                    InputSet default_input = InputSet::CQP) {
  SelectionResult r;
  r.f1 = signal.f1;
  r.default_model = default_model(frame_type, default_input);
  if (signal.f1) {
    for (std::size_t i = 0; i < signal.ctb_models.size(); ++i) r.decisions.push_back(CtbDecision{i, signal.ctb_models[i], 0.0, 0});
  }
  return r;
}

// Side-channel bits for one frame; identical to the rate difference used by the RD decision.
inline std::size_t signal_bits(bool f1, std::size_t ctb_count) { return 1 + (f1 ? 2 * ctb_count : 0); }

class BitWriter {
 public:
  void put(bool bit) {
    if (bits_ % 8 == 0) bytes_.push_back(0);
    if (bit) bytes_.back() = static_cast<std::uint8_t>(bytes_.back() | (0x80u >> (bits_ % 8)));
    ++bits_;
  }
  std::size_t bit_count() const { return bits_; }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t bits_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  bool get() {
    if (pos_ >= bytes_.size() * 8) {
      throw Error(ErrorKind::Truncation, "signal stream ends after " + std::to_string(bytes_.size()) + " bytes");
    }
    const bool bit = (bytes_[pos_ / 8] >> (7 - pos_ % 8)) & 1u;
    ++pos_;
    return bit;
  }

  std::size_t position() const { return pos_; }

  // Remaining bits of the current byte must be zero and no bytes may follow.
  void finish() const {
    const std::size_t used_bytes = (pos_ + 7) / 8;
    if (used_bytes != bytes_.size()) {
      throw Error(ErrorKind::Corruption, std::to_string(bytes_.size() - used_bytes) + " trailing bytes in signal stream");
    }
    for (std::size_t p = pos_; p < used_bytes * 8; ++p) {
      if ((bytes_[p / 8] >> (7 - p % 8)) & 1u) throw Error(ErrorKind::Corruption, "nonzero padding bits in signal stream");
    }
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> encode_signals(std::span<const FrameSignal> frames,
                                                std::span<const std::size_t> ctb_counts) {
  if (frames.size() != ctb_counts.size()) {
    throw Error(ErrorKind::Consistency, "signal frames and CTB geometry differ in length");
  }
  BitWriter w;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto& frame = frames[f];
    if (frame.f1 && frame.ctb_models.size() != ctb_counts[f]) {
      throw Error(ErrorKind::Consistency, "frame " + std::to_string(f) + " has " +
                                              std::to_string(frame.ctb_models.size()) + " CTB models, geometry says " +
                                              std::to_string(ctb_counts[f]));
    }
    w.put(frame.f1);
    if (!frame.f1) continue;
    for (const ModelId id : frame.ctb_models) {
      w.put(id.mode == CodingType::Inter);
      w.put(id.input_set == InputSet::CQP);
    }
  }
  return w.bytes();
}

inline std::vector<std::uint8_t> encode_signals(std::span<const SelectionResult> results,
                                                std::span<const std::size_t> ctb_counts) {
  std::vector<FrameSignal> frames;
  frames.reserve(results.size());
  for (const auto& r : results) frames.push_back(to_signal(r));
  return encode_signals(frames, ctb_counts);
}

inline std::vector<FrameSignal> decode_signals(std::span<const std::uint8_t> stream,
                                               std::span<const std::size_t> ctb_counts) {
  BitReader r(stream);
  std::vector<FrameSignal> frames;
  frames.reserve(ctb_counts.size());
  for (const std::size_t count : ctb_counts) {
    FrameSignal frame;
    frame.f1 = r.get();
    if (frame.f1) {
      frame.ctb_models.reserve(count);
      for (std::size_t i = 0; i < count; ++i) {
        const bool inter = r.get();
        const bool cqp = r.get();
        frame.ctb_models.push_back(ModelId{inter ? CodingType::Inter : CodingType::Intra,
                                           cqp ? InputSet::CQP : InputSet::CQ});
      }
    }
    frames.push_back(std::move(frame));
  }
  r.finish();
  return frames;
}

inline constexpr std::string_view kSignalMagic = "QESIGNAL";
inline constexpr std::uint8_t kSignalVersion = 1;

inline void write_signal_file(const std::filesystem::path& path, std::span<const std::uint8_t> stream) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot create " + path.string());
  out.write(kSignalMagic.data(), static_cast<std::streamsize>(kSignalMagic.size()));
  out.put(static_cast<char>(kSignalVersion));
  out.write(reinterpret_cast<const char*>(stream.data()), static_cast<std::streamsize>(stream.size()));
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

// Returns the packed bits. A file without the magic header is taken as raw packed bits.
inline std::vector<std::uint8_t> read_signal_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open signal file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t header = kSignalMagic.size() + 1;
  if (bytes.size() >= kSignalMagic.size() &&
      std::equal(kSignalMagic.begin(), kSignalMagic.end(), bytes.begin(),
                 [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; })) {
    if (bytes.size() < header) throw Error(ErrorKind::Truncation, path.string() + ": missing version byte");
    if (bytes[kSignalMagic.size()] != kSignalVersion) {
      throw Error(ErrorKind::Format, path.string() + ": unsupported signal version " +
                                         std::to_string(bytes[kSignalMagic.size()]));
    }
    bytes.erase(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(header));
  }
  return bytes;
}

}  // namespace qe
