#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "qe/error.hpp"
#include "qe/frame.hpp"
#include "qe/nn.hpp"

namespace qe {

enum class InputSet { CQ, CQP };

inline int input_channel_count(InputSet set) { return set == InputSet::CQ ? 2 : 3; }

struct ModelId {
  CodingType mode = CodingType::Intra;
  InputSet input_set = InputSet::CQP;

  // Position in the fixed order (Intra,CQ) < (Intra,CQP) < (Inter,CQ) < (Inter,CQP).
  // The two bits are also the signaled (f2, f3) pair.
  constexpr std::size_t index() const {
    return (mode == CodingType::Inter ? 2u : 0u) + (input_set == InputSet::CQP ? 1u : 0u);
  }

  static constexpr ModelId from_index(std::size_t i) {
    return ModelId{(i & 2u) ? CodingType::Inter : CodingType::Intra, (i & 1u) ? InputSet::CQP : InputSet::CQ};
  }

  std::string name() const {
    return std::string(mode == CodingType::Intra ? "intra" : "inter") + "_" +
           (input_set == InputSet::CQ ? "cq" : "cqp");
  }

  friend constexpr bool operator==(const ModelId&, const ModelId&) = default;
  friend constexpr auto operator<=>(const ModelId& a, const ModelId& b) { return a.index() <=> b.index(); }
};

inline constexpr std::size_t kModelCount = 4;

inline constexpr std::array<ModelId, kModelCount> kAllModels = {
    ModelId::from_index(0), ModelId::from_index(1), ModelId::from_index(2), ModelId::from_index(3)};

// Model used when no per-CTB selection is signaled.
inline ModelId default_model(CodingType frame_type, InputSet input_set = InputSet::CQP) {
  return ModelId{frame_type, input_set};
}

// Channels in order: reconstruction/1023, qp map, prediction/1023 (CQP only).
inline Tensor assemble_input(const FrameBundle& bundle, InputSet input_set) {
  bundle.validate();
  const int W = bundle.width();
  const int H = bundle.height();
  Tensor t(input_channel_count(input_set), H, W);
  const auto& recon = bundle.reconstruction.samples();
  const auto& qp = bundle.qp_map.values();
  auto c0 = t.channel(0);
  auto c1 = t.channel(1);
  for (std::size_t i = 0; i < c0.size(); ++i) {
    c0[i] = static_cast<double>(recon[i]) / kMaxSample;
    c1[i] = qp[i];
  }
  if (input_set == InputSet::CQP) {
    const auto& pred = bundle.prediction.samples();
    auto c2 = t.channel(2);
    for (std::size_t i = 0; i < c2.size(); ++i) c2[i] = static_cast<double>(pred[i]) / kMaxSample;
  }
  return t;
}

class ModelRegistry {
 public:
  // Networks indexed by ModelId::index().
  explicit ModelRegistry(std::array<QeNetwork, kModelCount> networks) : networks_(std::move(networks)) {
    for (const ModelId id : kAllModels) {
      const QeNetwork& net = networks_[id.index()];
      net.validate();
      if (net.input_channels != input_channel_count(id.input_set)) {
        throw Error(ErrorKind::Shape, "model " + id.name() + " needs " +
                                          std::to_string(input_channel_count(id.input_set)) +
                                          " input channels, network has " + std::to_string(net.input_channels));
      }
    }
  }

  const QeNetwork& operator[](ModelId id) const { return networks_[id.index()]; }

 private:
  std::array<QeNetwork, kModelCount> networks_;
};

inline Plane enhance_frame(const FrameBundle& bundle, ModelId id, const ModelRegistry& registry, unsigned threads = 1) {
  return forward_qe(assemble_input(bundle, id.input_set), registry[id], threads);
}

// ---------------------------------------------------------------------------
// Weight file format, all integers uint32 little-endian, all arrays float32 little-endian:
//
//   magic "QENETWTS" (8 bytes), version
//   input_channels, num_blocks, channels, layer_count
//   manifest: layer_count x {kind (0 conv, 1 batch norm), in, out, activation (0 none, 1 relu)}
//   payload in network order:
//     conv:       weights[out][in][3][3], bias[out]
//     batch norm: scale[C], shift[C], mean[C], variance[C], epsilon
//
// Network order: head, block{i}.conv_a, block{i}.conv_b ..., body_conv, body_norm,
// tail_a, tail_b, output.
// ---------------------------------------------------------------------------

inline constexpr std::string_view kWeightMagic = "QENETWTS";
inline constexpr std::uint32_t kWeightVersion = 1;

namespace detail {

template <typename Conv, typename Norm>
struct LayerRef {
  std::string name;
  Conv* conv = nullptr;
  Norm* norm = nullptr;
};

template <typename Net>
auto layer_list(Net& n) {
  constexpr bool kConst = std::is_const_v<Net>;
  using Conv = std::conditional_t<kConst, const ConvLayer, ConvLayer>;
  using Norm = std::conditional_t<kConst, const BatchNormLayer, BatchNormLayer>;
  std::vector<LayerRef<Conv, Norm>> layers;
  layers.push_back({"head", &n.head, nullptr});
  for (std::size_t i = 0; i < n.blocks.size(); ++i) {
    layers.push_back({"block" + std::to_string(i) + ".conv_a", &n.blocks[i].conv_a, nullptr});
    layers.push_back({"block" + std::to_string(i) + ".conv_b", &n.blocks[i].conv_b, nullptr});
  }
  layers.push_back({"body_conv", &n.body_conv, nullptr});
  layers.push_back({"body_norm", nullptr, &n.body_norm});
  layers.push_back({"tail_a", &n.tail_a, nullptr});
  layers.push_back({"tail_b", &n.tail_b, nullptr});
  layers.push_back({"output", &n.output, nullptr});
  return layers;
}

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void floats(const std::vector<float>& v) {
    for (float f : v) f32(f);
  }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::vector<float> floats(std::size_t n) {
    need(4 * n);
    std::vector<float> out(n);
    for (auto& f : out) f = f32();
    return out;
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorKind::Truncation, "weight file truncated at byte offset " + std::to_string(bytes_.size()) +
                                             ", needed " + std::to_string(pos_ + n));
    }
  }

  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

inline void require_finite(const std::vector<float>& values, const std::string& layer) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorKind::Format, "non-finite weight in layer " + layer + " at element " + std::to_string(i));
    }
  }
}

}  // namespace detail

inline std::vector<char> serialize_weights(const QeNetwork& net) {
  net.validate();
  detail::ByteWriter w;
  w.raw(kWeightMagic);
  w.u32(kWeightVersion);
  w.u32(static_cast<std::uint32_t>(net.input_channels));
  w.u32(static_cast<std::uint32_t>(net.num_blocks()));
  w.u32(static_cast<std::uint32_t>(net.channels));
  const auto layers = detail::layer_list(net);
  w.u32(static_cast<std::uint32_t>(layers.size()));
  for (const auto& l : layers) {
    if (l.conv) {
      w.u32(0);
      w.u32(static_cast<std::uint32_t>(l.conv->in_channels));
      w.u32(static_cast<std::uint32_t>(l.conv->out_channels));
      w.u32(l.conv->activation == Activation::ReLU ? 1 : 0);
    } else {
      w.u32(1);
      w.u32(static_cast<std::uint32_t>(l.norm->channels()));
      w.u32(static_cast<std::uint32_t>(l.norm->channels()));
      w.u32(0);
    }
  }
  for (const auto& l : layers) {
    if (l.conv) {
      w.floats(l.conv->weights);
      w.floats(l.conv->bias);
    } else {
      w.floats(l.norm->scale);
      w.floats(l.norm->shift);
      w.floats(l.norm->mean);
      w.floats(l.norm->variance);
      w.f32(l.norm->epsilon);
    }
  }
  return w.bytes();
}

inline QeNetwork deserialize_weights(std::vector<char> bytes) {
  detail::ByteReader r(std::move(bytes));
  if (r.raw(kWeightMagic.size()) != kWeightMagic) throw Error(ErrorKind::Format, "bad weight file magic");
  const std::uint32_t version = r.u32();
  if (version != kWeightVersion) {
    throw Error(ErrorKind::Format, "unsupported weight file version " + std::to_string(version));
  }
  const std::uint32_t input_channels = r.u32();
  const std::uint32_t num_blocks = r.u32();
  const std::uint32_t channels = r.u32();
  if ((input_channels != 2 && input_channels != 3) || channels == 0 || channels > 4096 || num_blocks > 1024) {
    throw Error(ErrorKind::Format, "implausible network header (in=" + std::to_string(input_channels) +
                                       ", blocks=" + std::to_string(num_blocks) +
                                       ", channels=" + std::to_string(channels) + ")");
  }
  QeNetwork net = QeNetwork::zeros(static_cast<int>(input_channels), static_cast<int>(channels),
                                   static_cast<int>(num_blocks));
  const auto layers = detail::layer_list(net);
  const std::uint32_t layer_count = r.u32();
  if (layer_count != layers.size()) {
    throw Error(ErrorKind::Format, "manifest lists " + std::to_string(layer_count) + " layers, expected " +
                                       std::to_string(layers.size()));
  }
  for (const auto& l : layers) {
    const std::uint32_t kind = r.u32();
    const std::uint32_t in = r.u32();
    const std::uint32_t out = r.u32();
    const std::uint32_t act = r.u32();
    const bool ok = l.conv ? (kind == 0 && in == static_cast<std::uint32_t>(l.conv->in_channels) &&
                              out == static_cast<std::uint32_t>(l.conv->out_channels) &&
                              act == (l.conv->activation == Activation::ReLU ? 1u : 0u))
                           : (kind == 1 && in == channels && out == channels && act == 0);
    if (!ok) throw Error(ErrorKind::Format, "manifest entry for layer " + l.name + " breaks the shape chain");
  }
  for (const auto& l : layers) {
    if (l.conv) {
      l.conv->weights = r.floats(l.conv->weights.size());
      l.conv->bias = r.floats(l.conv->bias.size());
      detail::require_finite(l.conv->weights, l.name);
      detail::require_finite(l.conv->bias, l.name);
    } else {
      l.norm->scale = r.floats(channels);
      l.norm->shift = r.floats(channels);
      l.norm->mean = r.floats(channels);
      l.norm->variance = r.floats(channels);
      l.norm->epsilon = r.f32();
      for (const auto* v : {&l.norm->scale, &l.norm->shift, &l.norm->mean, &l.norm->variance}) {
        detail::require_finite(*v, l.name);
      }
      detail::require_finite({l.norm->epsilon}, l.name);
    }
  }
  if (r.remaining() != 0) {
    throw Error(ErrorKind::Format, std::to_string(r.remaining()) + " trailing bytes after weight payload");
  }
  try {
    net.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Format, "invalid network: " + e.detail());
  }
  return net;
}

inline void save_weights(const QeNetwork& net, const std::filesystem::path& path) {
  const auto bytes = serialize_weights(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot create " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

inline QeNetwork load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open weight file " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return deserialize_weights(std::move(bytes));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.detail());
  }
}

}  // namespace qe
