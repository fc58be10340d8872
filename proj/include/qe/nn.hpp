#pragma once

// Small deterministic inference kernel for the enhancement network: 3x3 convolution
// (stride 1, zero padding 1), ReLU, inference-mode batch norm, residual blocks,
// channel concatenation and elementwise addition. Arithmetic is double precision;
// every output element accumulates bias first, then input channels, then kernel
// rows and columns, in that fixed order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "qe/error.hpp"
#include "qe/frame.hpp"
#include "qe/parallel.hpp"

namespace qe {

class Tensor {
 public:
  Tensor() = default;

  Tensor(int channels, int height, int width, double fill = 0.0)
      : channels_(channels), height_(height), width_(width), data_(checked_size(channels, height, width), fill) {}

  Tensor(int channels, int height, int width, std::vector<double> data)
      : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
    if (data_.size() != checked_size(channels, height, width)) {
      throw Error(ErrorKind::Shape, "tensor data length " + std::to_string(data_.size()) + " does not match " +
                                        shape_string());
    }
  }

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t plane_size() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const { return data_.size(); }

  double& at(int c, int y, int x) { return data_[offset(c, y, x)]; }
  double at(int c, int y, int x) const { return data_[offset(c, y, x)]; }

  std::span<double> channel(int c) { return {data_.data() + c * plane_size(), plane_size()}; }
  std::span<const double> channel(int c) const { return {data_.data() + c * plane_size(), plane_size()}; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool same_shape(const Tensor& o) const {
    return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  std::string shape_string() const {
    return std::to_string(channels_) + "x" + std::to_string(height_) + "x" + std::to_string(width_);
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  static std::size_t checked_size(int c, int h, int w) {
    if (c <= 0 || h <= 0 || w <= 0) throw Error(ErrorKind::Shape, "tensor dimensions must be positive");
    return static_cast<std::size_t>(c) * h * w;
  }

  std::size_t offset(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

enum class Activation { None, ReLU };

struct ConvLayer {
  static constexpr int kTaps = 9;

  int in_channels = 0;
  int out_channels = 0;
  // [out][in][ky][kx], 3x3 kernels
  std::vector<float> weights;
  std::vector<float> bias;
  Activation activation = Activation::None;

  static ConvLayer zeros(int in, int out, Activation act) {
    return ConvLayer{in, out, std::vector<float>(static_cast<std::size_t>(in) * out * kTaps, 0.0f),
                     std::vector<float>(static_cast<std::size_t>(out), 0.0f), act};
  }

  float& weight(int o, int i, int ky, int kx) {
    return weights[((static_cast<std::size_t>(o) * in_channels + i) * 3 + ky) * 3 + kx];
  }
  float weight(int o, int i, int ky, int kx) const {
    return weights[((static_cast<std::size_t>(o) * in_channels + i) * 3 + ky) * 3 + kx];
  }

  void validate(const std::string& name) const {
    if (in_channels <= 0 || out_channels <= 0) throw Error(ErrorKind::Shape, name + ": empty channel count");
    if (weights.size() != static_cast<std::size_t>(in_channels) * out_channels * kTaps ||
        bias.size() != static_cast<std::size_t>(out_channels)) {
      throw Error(ErrorKind::Shape, name + ": weight array length does not match " + std::to_string(out_channels) +
                                        "x" + std::to_string(in_channels) + "x3x3");
    }
  }

  friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

struct BatchNormLayer {
  std::vector<float> scale;  // gamma
  std::vector<float> shift;  // beta
  std::vector<float> mean;
  std::vector<float> variance;
  float epsilon = 1e-5f;

  static BatchNormLayer identity(int channels, float epsilon = 1e-5f) {
    const auto n = static_cast<std::size_t>(channels);
    return BatchNormLayer{std::vector<float>(n, 1.0f), std::vector<float>(n, 0.0f), std::vector<float>(n, 0.0f),
                          std::vector<float>(n, 1.0f), epsilon};
  }

  int channels() const { return static_cast<int>(scale.size()); }

  void validate(const std::string& name) const {
    const auto n = scale.size();
    if (n == 0 || shift.size() != n || mean.size() != n || variance.size() != n) {
      throw Error(ErrorKind::Shape, name + ": batch norm parameter lengths disagree");
    }
    if (!(epsilon >= 0.0f)) throw Error(ErrorKind::Range, name + ": epsilon must be non-negative");
    for (float v : variance) {
      if (!(v >= 0.0f)) throw Error(ErrorKind::Range, name + ": negative running variance");
    }
  }

  friend bool operator==(const BatchNormLayer&, const BatchNormLayer&) = default;
};

// conv(ReLU) -> conv -> add skip, no normalization inside the block.
struct ResidualBlock {
  ConvLayer conv_a;
  ConvLayer conv_b;

  friend bool operator==(const ResidualBlock&, const ResidualBlock&) = default;
};

inline Tensor conv2d(const Tensor& input, const ConvLayer& layer, unsigned threads = 1) {
  if (input.channels() != layer.in_channels) {
    throw Error(ErrorKind::Shape, "conv2d expects " + std::to_string(layer.in_channels) + " input channels, got " +
                                      std::to_string(input.channels()));
  }
  layer.validate("conv2d");
  const int H = input.height();
  const int W = input.width();
  Tensor out(layer.out_channels, H, W);

  // Partitioned by output channel only; the per-element reduction order never changes.
  parallel_for(static_cast<std::size_t>(layer.out_channels), threads, [&](std::size_t oi) {
    const int o = static_cast<int>(oi);
    auto dst = out.channel(o);
    std::fill(dst.begin(), dst.end(), static_cast<double>(layer.bias[oi]));
    for (int c = 0; c < layer.in_channels; ++c) {
      const auto src = input.channel(c);
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const int y0 = std::max(0, -dy);
        const int y1 = std::min(H, H - dy);
        for (int kx = 0; kx < 3; ++kx) {
          const int dx = kx - 1;
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(W, W - dx);
          const double w = layer.weight(o, c, ky, kx);
          for (int y = y0; y < y1; ++y) {
            double* d = dst.data() + static_cast<std::size_t>(y) * W;
            const double* s = src.data() + static_cast<std::size_t>(y + dy) * W + dx;
            for (int x = x0; x < x1; ++x) d[x] += w * s[x];
          }
        }
      }
    }
    if (layer.activation == Activation::ReLU) {
      for (double& v : dst) v = std::max(v, 0.0);
    }
  });
  return out;
}

inline Tensor batch_norm_infer(const Tensor& input, const BatchNormLayer& layer) {
  layer.validate("batch_norm");
  if (input.channels() != layer.channels()) {
    throw Error(ErrorKind::Shape, "batch norm has " + std::to_string(layer.channels()) + " channels, input has " +
                                      std::to_string(input.channels()));
  }
  Tensor out = input;
  for (int c = 0; c < input.channels(); ++c) {
    const double gamma = layer.scale[c];
    const double beta = layer.shift[c];
    const double mu = layer.mean[c];
    const double denom = std::sqrt(static_cast<double>(layer.variance[c]) + static_cast<double>(layer.epsilon));
    for (double& v : out.channel(c)) v = gamma * (v - mu) / denom + beta;
  }
  return out;
}

inline Tensor concat_channels(std::span<const Tensor> parts) {
  if (parts.empty()) throw Error(ErrorKind::Shape, "concat of zero tensors");
  const int H = parts.front().height();
  const int W = parts.front().width();
  int channels = 0;
  for (const auto& p : parts) {
    if (p.height() != H || p.width() != W) {
      throw Error(ErrorKind::Shape, "concat spatial mismatch: " + parts.front().shape_string() + " vs " +
                                        p.shape_string());
    }
    channels += p.channels();
  }
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(channels) * H * W);
  for (const auto& p : parts) data.insert(data.end(), p.data().begin(), p.data().end());
  return Tensor(channels, H, W, std::move(data));
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw Error(ErrorKind::Shape, "add shape mismatch: " + a.shape_string() + " vs " + b.shape_string());
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b.data()[i];
  return out;
}

inline Tensor residual_block(const Tensor& input, const ResidualBlock& block, unsigned threads = 1) {
  return add(conv2d(conv2d(input, block.conv_a, threads), block.conv_b, threads), input);
}

// Enhancement network:
//   head = F1(I); t = Res^N(head); t = Bn(F2(t)) + head; t = F1(F1(t)); out = F3(t)
// F1 convs use ReLU, F2 has no activation, F3 maps to one channel with ReLU.
struct QeNetwork {
  static constexpr int kDefaultChannels = 256;
  static constexpr int kDefaultBlocks = 16;

  int input_channels = 0;
  int channels = 0;
  ConvLayer head;
  std::vector<ResidualBlock> blocks;
  ConvLayer body_conv;
  BatchNormLayer body_norm;
  ConvLayer tail_a;
  ConvLayer tail_b;
  ConvLayer output;

  // All weights zero, batch norm identity.
  static QeNetwork zeros(int input_channels, int channels = kDefaultChannels, int num_blocks = kDefaultBlocks) {
    QeNetwork net;
    net.input_channels = input_channels;
    net.channels = channels;
    net.head = ConvLayer::zeros(input_channels, channels, Activation::ReLU);
    for (int i = 0; i < num_blocks; ++i) {
      net.blocks.push_back(ResidualBlock{ConvLayer::zeros(channels, channels, Activation::ReLU),
                                         ConvLayer::zeros(channels, channels, Activation::None)});
    }
    net.body_conv = ConvLayer::zeros(channels, channels, Activation::None);
    net.body_norm = BatchNormLayer::identity(channels);
    net.tail_a = ConvLayer::zeros(channels, channels, Activation::ReLU);
    net.tail_b = ConvLayer::zeros(channels, channels, Activation::ReLU);
    net.output = ConvLayer::zeros(channels, 1, Activation::ReLU);
    return net;
  }

  int num_blocks() const { return static_cast<int>(blocks.size()); }

  void validate() const {
    const auto check = [](const ConvLayer& l, const std::string& name, int in, int out, Activation act) {
      l.validate(name);
      if (l.in_channels != in || l.out_channels != out) {
        throw Error(ErrorKind::Shape, name + " is " + std::to_string(l.in_channels) + "->" +
                                          std::to_string(l.out_channels) + ", expected " + std::to_string(in) +
                                          "->" + std::to_string(out));
      }
      if (l.activation != act) throw Error(ErrorKind::Shape, name + " has the wrong activation");
    };
    if (input_channels != 2 && input_channels != 3) {
      throw Error(ErrorKind::Shape, "network input channels must be 2 or 3, got " + std::to_string(input_channels));
    }
    check(head, "head", input_channels, channels, Activation::ReLU);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      check(blocks[i].conv_a, "block " + std::to_string(i) + " conv_a", channels, channels, Activation::ReLU);
      check(blocks[i].conv_b, "block " + std::to_string(i) + " conv_b", channels, channels, Activation::None);
    }
    check(body_conv, "body_conv", channels, channels, Activation::None);
    body_norm.validate("body_norm");
    if (body_norm.channels() != channels) throw Error(ErrorKind::Shape, "body_norm channel count mismatch");
    check(tail_a, "tail_a", channels, channels, Activation::ReLU);
    check(tail_b, "tail_b", channels, channels, Activation::ReLU);
    check(output, "output", channels, 1, Activation::ReLU);
  }

  friend bool operator==(const QeNetwork&, const QeNetwork&) = default;
};

// Network output in normalized units (1 channel), before quantization.
inline Tensor forward_qe_normalized(const Tensor& input, const QeNetwork& net, unsigned threads = 1) {
  if (input.channels() != net.input_channels) {
    throw Error(ErrorKind::Shape, "network expects " + std::to_string(net.input_channels) +
                                      " input channels, got " + std::to_string(input.channels()));
  }
  net.validate();
  const Tensor head = conv2d(input, net.head, threads);
  Tensor t = head;
  for (const auto& block : net.blocks) t = residual_block(t, block, threads);
  t = add(batch_norm_infer(conv2d(t, net.body_conv, threads), net.body_norm), head);
  t = conv2d(conv2d(t, net.tail_a, threads), net.tail_b, threads);
  return conv2d(t, net.output, threads);
}

// Maps a normalized value back to a 10-bit sample: scale by 1023, round half up, clamp.
inline Sample quantize_sample(double normalized) {
  const double scaled = std::floor(normalized * kMaxSample + 0.5);
  if (!(scaled > 0.0)) return 0;
  if (scaled >= kMaxSample) return kMaxSample;
  return static_cast<Sample>(scaled);
}

inline Plane to_plane(const Tensor& single_channel) {
  if (single_channel.channels() != 1) throw Error(ErrorKind::Shape, "expected a 1-channel tensor");
  std::vector<Sample> samples(single_channel.plane_size());
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = quantize_sample(single_channel.data()[i]);
  return Plane(single_channel.width(), single_channel.height(), std::move(samples));
}

inline Plane forward_qe(const Tensor& input, const QeNetwork& net, unsigned threads = 1) {
  return to_plane(forward_qe_normalized(input, net, threads));
}

}  // namespace qe
