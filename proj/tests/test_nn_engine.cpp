#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "synthetic.hpp"

using namespace qe;

namespace {

double max_abs_diff(const Tensor& a, const Tensor& b) {
  EXPECT_TRUE(a.same_shape(b));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
  return m;
}

Tensor constant(int c, int h, int w, double v) {
  Tensor t(c, h, w);
  for (auto& x : t.data()) x = v;
  return t;
}

FrameBundle bundle_from(const Plane& recon, const Plane& pred, int qp) {
  return FrameBundle{recon, pred, build_constant_qp_map(qp, recon.width(), recon.height()), std::nullopt,
                     CodingType::Intra, 0};
}

}  // namespace

TEST(Conv2d, IdentityKernelCopiesInput) {
  synth::Rng rng(1);
  const Tensor in = synth::random_tensor(1, 5, 7, rng);
  ConvLayer l = ConvLayer::zeros(1, 1, Activation::None);
  l.weight(0, 0, 1, 1) = 1.0f;
  EXPECT_EQ(conv2d(in, l), in);
}

TEST(Conv2d, AllOnesKernelCountsNeighboursWithZeroPadding) {
  ConvLayer l = ConvLayer::zeros(1, 1, Activation::None);
  for (auto& w : l.weights) w = 1.0f;
  const Tensor out = conv2d(constant(1, 4, 4, 1.0), l);
  EXPECT_EQ(out.at(0, 0, 0), 4.0);
  EXPECT_EQ(out.at(0, 0, 3), 4.0);
  EXPECT_EQ(out.at(0, 3, 0), 4.0);
  EXPECT_EQ(out.at(0, 3, 3), 4.0);
  EXPECT_EQ(out.at(0, 0, 1), 6.0);
  EXPECT_EQ(out.at(0, 2, 0), 6.0);
  EXPECT_EQ(out.at(0, 1, 1), 9.0);
  EXPECT_EQ(out.at(0, 2, 2), 9.0);
}

TEST(Conv2d, ReluClampsNegatives) {
  ConvLayer l = ConvLayer::zeros(1, 1, Activation::ReLU);
  l.weight(0, 0, 1, 1) = -1.0f;
  l.bias[0] = 0.25f;
  const Tensor out = conv2d(constant(1, 2, 2, 1.0), l);
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(Conv2d, RandomLayersMatchOracle) {
  synth::Rng rng(2);
  for (int trial = 0; trial < 40; ++trial) {
    const int in_c = synth::uniform_int(rng, 1, 4);
    const int out_c = synth::uniform_int(rng, 1, 4);
    const Tensor in = synth::random_tensor(in_c, synth::uniform_int(rng, 1, 9), synth::uniform_int(rng, 1, 9), rng);
    const ConvLayer l = synth::random_conv(in_c, out_c, trial % 2 ? Activation::ReLU : Activation::None, rng);
    EXPECT_LE(max_abs_diff(conv2d(in, l), oracle::conv(in, l)), 1e-12);
  }
}

TEST(Conv2d, ChannelMismatchIsShapeError) {
  synth::Rng rng(3);
  try {
    conv2d(synth::random_tensor(2, 3, 3, rng), ConvLayer::zeros(3, 1, Activation::None));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Shape);
  }
}

TEST(BatchNorm, IdentityWithZeroEpsilon) {
  synth::Rng rng(4);
  const Tensor in = synth::random_tensor(3, 4, 4, rng);
  EXPECT_EQ(batch_norm_infer(in, BatchNormLayer::identity(3, 0.0f)), in);
}

TEST(BatchNorm, HandComputedValue) {
  BatchNormLayer bn = BatchNormLayer::identity(1, 0.0f);
  bn.scale[0] = 2.0f;
  bn.shift[0] = 1.0f;
  bn.mean[0] = 3.0f;
  bn.variance[0] = 4.0f;
  const Tensor out = batch_norm_infer(constant(1, 2, 3, 5.0), bn);
  for (double v : out.data()) EXPECT_EQ(v, 3.0);
}

TEST(BatchNorm, RandomMatchesOracle) {
  synth::Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int c = synth::uniform_int(rng, 1, 6);
    const Tensor in = synth::random_tensor(c, 5, 6, rng, -3.0, 3.0);
    const BatchNormLayer bn = synth::random_bn(c, rng);
    EXPECT_LE(max_abs_diff(batch_norm_infer(in, bn), oracle::batch_norm(in, bn)), 1e-12);
  }
}

TEST(BatchNorm, NegativeVarianceRejected) {
  BatchNormLayer bn = BatchNormLayer::identity(1);
  bn.variance[0] = -1.0f;
  EXPECT_THROW(batch_norm_infer(constant(1, 1, 1, 0.0), bn), Error);
}

TEST(Concat, StacksChannelsInOrder) {
  const std::vector<Tensor> parts{constant(1, 2, 2, 1.0), constant(2, 2, 2, 2.0), constant(1, 2, 2, 3.0)};
  const Tensor t = concat_channels(parts);
  ASSERT_EQ(t.channels(), 4);
  EXPECT_EQ(t.at(0, 1, 1), 1.0);
  EXPECT_EQ(t.at(1, 0, 0), 2.0);
  EXPECT_EQ(t.at(2, 1, 0), 2.0);
  EXPECT_EQ(t.at(3, 0, 1), 3.0);
  const std::vector<Tensor> single{parts[1]};
  EXPECT_EQ(concat_channels(single), parts[1]);
}

TEST(Concat, SpatialMismatchIsShapeError) {
  const std::vector<Tensor> parts{constant(1, 2, 2, 1.0), constant(1, 2, 3, 1.0)};
  try {
    concat_channels(parts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Shape);
  }
}

TEST(QuantizeSample, RoundsHalfUpAndClamps) {
  EXPECT_EQ(quantize_sample(0.0), 0);
  EXPECT_EQ(quantize_sample(-0.3), 0);
  EXPECT_EQ(quantize_sample(1.0), 1023);
  EXPECT_EQ(quantize_sample(2.0), 1023);
  EXPECT_EQ(quantize_sample(10.5 / 1023.0), 11);
  EXPECT_EQ(quantize_sample(10.49 / 1023.0), 10);
  for (int s = 0; s <= 1023; ++s) EXPECT_EQ(quantize_sample(s / 1023.0), s);
}

TEST(ForwardQe, ZeroNetworkOutputsZeros) {
  synth::Rng rng(6);
  const FrameBundle b = bundle_from(synth::random_plane(9, 7, rng), synth::random_plane(9, 7, rng), 30);
  const Plane out = forward_qe(assemble_input(b, InputSet::CQP), QeNetwork::zeros(3, 8, 2));
  EXPECT_EQ(out, Plane(9, 7, 0));
}

TEST(ForwardQe, IdentityNetworkReproducesReconstruction) {
  synth::Rng rng(7);
  for (const InputSet set : {InputSet::CQ, InputSet::CQP}) {
    const FrameBundle b = bundle_from(synth::random_plane(16, 12, rng), synth::random_plane(16, 12, rng), 37);
    const Plane out = forward_qe(assemble_input(b, set), synth::identity_network(input_channel_count(set)));
    EXPECT_EQ(out, b.reconstruction);
  }
}

TEST(ForwardQe, ReducedRandomNetworkMatchesInterpreter) {
  synth::Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const QeNetwork net = synth::random_network(3, 8, 2, rng);
    const Tensor in = synth::random_tensor(3, 12, 10, rng, 0.0, 1.0);
    EXPECT_LE(max_abs_diff(forward_qe_normalized(in, net), oracle::forward(in, net)), 1e-9);
  }
}

TEST(ForwardQe, ZeroedTrunkReducesToHandComposition) {
  synth::Rng rng(9);
  QeNetwork net = synth::random_network(2, 6, 3, rng);
  for (auto& b : net.blocks) {
    b.conv_b = ConvLayer::zeros(6, 6, Activation::None);
  }
  net.body_conv = ConvLayer::zeros(6, 6, Activation::None);
  net.body_norm = BatchNormLayer::identity(6, 0.0f);
  const Tensor in = synth::random_tensor(2, 8, 8, rng, 0.0, 1.0);
  // Blocks add zero and Bn(0) = 0, so the trunk output equals the head output.
  const Tensor expected =
      oracle::conv(oracle::conv(oracle::conv(oracle::conv(in, net.head), net.tail_a), net.tail_b), net.output);
  EXPECT_LE(max_abs_diff(forward_qe_normalized(in, net), expected), 1e-12);
}

TEST(ForwardQe, ZeroedResidualBlockIsIdentity) {
  synth::Rng rng(10);
  const Tensor in = synth::random_tensor(5, 6, 6, rng);
  ResidualBlock block{synth::random_conv(5, 5, Activation::ReLU, rng), ConvLayer::zeros(5, 5, Activation::None)};
  EXPECT_EQ(residual_block(in, block), in);
}

TEST(ForwardQe, LinearWithoutActivations) {
  // A linear-only conv respects superposition.
  synth::Rng rng(11);
  const ConvLayer l = synth::random_conv(3, 2, Activation::None, rng);
  ConvLayer nobias = l;
  for (auto& b : nobias.bias) b = 0.0f;
  const Tensor a = synth::random_tensor(3, 6, 5, rng);
  const Tensor b = synth::random_tensor(3, 6, 5, rng);
  Tensor combo = a;
  for (std::size_t i = 0; i < combo.size(); ++i) combo.data()[i] = 2.0 * a.data()[i] - 0.5 * b.data()[i];
  const Tensor fa = conv2d(a, nobias);
  const Tensor fb = conv2d(b, nobias);
  Tensor expected = fa;
  for (std::size_t i = 0; i < expected.size(); ++i) expected.data()[i] = 2.0 * fa.data()[i] - 0.5 * fb.data()[i];
  EXPECT_LE(max_abs_diff(conv2d(combo, nobias), expected), 1e-12);
}

TEST(ForwardQe, TranslationEquivariantAwayFromBorders) {
  synth::Rng rng(12);
  const ConvLayer l = synth::random_conv(2, 2, Activation::ReLU, rng);
  const Tensor in = synth::random_tensor(2, 10, 10, rng);
  Tensor shifted(2, 10, 10);
  for (int c = 0; c < 2; ++c) {
    for (int y = 0; y < 10; ++y) {
      for (int x = 1; x < 10; ++x) shifted.at(c, y, x) = in.at(c, y, x - 1);
    }
  }
  const Tensor a = conv2d(in, l);
  const Tensor b = conv2d(shifted, l);
  for (int c = 0; c < 2; ++c) {
    for (int y = 0; y < 10; ++y) {
      for (int x = 2; x < 9; ++x) EXPECT_EQ(b.at(c, y, x), a.at(c, y, x - 1));
    }
  }
}

TEST(ForwardQe, BitIdenticalAcrossThreadCounts) {
  synth::Rng rng(13);
  const QeNetwork net = synth::random_network(3, 8, 2, rng);
  const Tensor in = synth::random_tensor(3, 17, 13, rng, 0.0, 1.0);
  const Tensor one = forward_qe_normalized(in, net, 1);
  for (unsigned threads : {2u, 3u, 8u}) EXPECT_EQ(forward_qe_normalized(in, net, threads), one);
}

TEST(ForwardQe, InputChannelMismatchIsShapeError) {
  synth::Rng rng(14);
  try {
    forward_qe(synth::random_tensor(2, 4, 4, rng), QeNetwork::zeros(3, 4, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Shape);
  }
}

TEST(Tensor, NonPositiveShapeRejected) {
  EXPECT_THROW(Tensor(0, 2, 2), Error);
  EXPECT_THROW(Tensor(1, -1, 2), Error);
}
