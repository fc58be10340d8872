#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "synthetic.hpp"

namespace fs = std::filesystem;
using namespace qe;

namespace {

FrameBundle random_bundle(int w, int h, synth::Rng& rng) {
  const CuLayout layout = synth::random_layout(w, h, rng);
  return FrameBundle{synth::random_plane(w, h, rng), synth::random_plane(w, h, rng), build_qp_map(layout, w, h),
                     std::nullopt, CodingType::Inter, 3};
}

std::array<QeNetwork, kModelCount> random_networks(synth::Rng& rng) {
  std::array<QeNetwork, kModelCount> nets;
  for (const ModelId id : kAllModels) nets[id.index()] = synth::random_network(input_channel_count(id.input_set), 4, 1, rng);
  return nets;
}

void expect_error(ErrorKind kind, const std::string& fragment, const std::function<void()>& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected error containing '" << fragment << "'";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

}  // namespace

TEST(ModelId, IndexOrderAndNames) {
  EXPECT_EQ((ModelId{CodingType::Intra, InputSet::CQ}).index(), 0u);
  EXPECT_EQ((ModelId{CodingType::Intra, InputSet::CQP}).index(), 1u);
  EXPECT_EQ((ModelId{CodingType::Inter, InputSet::CQ}).index(), 2u);
  EXPECT_EQ((ModelId{CodingType::Inter, InputSet::CQP}).index(), 3u);
  for (std::size_t i = 0; i < kModelCount; ++i) EXPECT_EQ(ModelId::from_index(i).index(), i);
  EXPECT_EQ(kAllModels[3].name(), "inter_cqp");
  EXPECT_EQ(default_model(CodingType::Intra), (ModelId{CodingType::Intra, InputSet::CQP}));
  EXPECT_EQ(default_model(CodingType::Inter, InputSet::CQ), (ModelId{CodingType::Inter, InputSet::CQ}));
}

TEST(AssembleInput, ChannelsInOrder) {
  synth::Rng rng(1);
  const FrameBundle b = random_bundle(11, 7, rng);
  const Tensor cqp = assemble_input(b, InputSet::CQP);
  const Tensor cq = assemble_input(b, InputSet::CQ);
  ASSERT_EQ(cqp.channels(), 3);
  ASSERT_EQ(cq.channels(), 2);
  for (int y = 0; y < 7; ++y) {
    for (int x = 0; x < 11; ++x) {
      EXPECT_EQ(cqp.at(0, y, x), b.reconstruction.at(x, y) / 1023.0);
      EXPECT_EQ(cqp.at(1, y, x), b.qp_map.at(x, y));
      EXPECT_EQ(cqp.at(2, y, x), b.prediction.at(x, y) / 1023.0);
      EXPECT_EQ(cq.at(0, y, x), cqp.at(0, y, x));
      EXPECT_EQ(cq.at(1, y, x), cqp.at(1, y, x));
    }
  }
}

TEST(EnhanceFrame, CqModelsIgnoreThePrediction) {
  synth::Rng rng(2);
  const ModelRegistry registry(random_networks(rng));
  FrameBundle b = random_bundle(12, 10, rng);
  const Plane intra = enhance_frame(b, {CodingType::Intra, InputSet::CQ}, registry);
  const Plane inter = enhance_frame(b, {CodingType::Inter, InputSet::CQ}, registry);
  b.prediction = synth::random_plane(12, 10, rng);
  EXPECT_EQ(enhance_frame(b, {CodingType::Intra, InputSet::CQ}, registry), intra);
  EXPECT_EQ(enhance_frame(b, {CodingType::Inter, InputSet::CQ}, registry), inter);
}

TEST(ModelRegistry, RejectsWrongInputChannelCount) {
  synth::Rng rng(3);
  auto nets = random_networks(rng);
  nets[1] = synth::random_network(2, 4, 1, rng);  // intra_cqp needs 3 inputs
  expect_error(ErrorKind::Shape, "intra_cqp", [&] { ModelRegistry r(nets); });
}

TEST(WeightFile, RoundTripIsBitExact) {
  synth::Rng rng(4);
  const auto dir = fs::temp_directory_path() / "qe_registry_roundtrip";
  fs::create_directories(dir);
  for (int trial = 0; trial < 5; ++trial) {
    const QeNetwork net = synth::random_network(trial % 2 ? 2 : 3, 3 + trial, trial, rng);
    save_weights(net, dir / "n.qew");
    const QeNetwork back = load_weights(dir / "n.qew");
    EXPECT_EQ(back, net);
    EXPECT_EQ(serialize_weights(back), serialize_weights(net));
  }
}

TEST(WeightFile, SizeMatchesLayout) {
  const QeNetwork net = QeNetwork::zeros(3, 4, 2);
  // header 8 + 5*4, manifest 4 words x (1 head + 4 block convs + body conv + norm + 2 tail + output)
  const std::size_t layers = 10;
  const std::size_t convs = (3 * 4 * 9 + 4) + 4 * (4 * 4 * 9 + 4) + 3 * (4 * 4 * 9 + 4) + (4 * 9 + 1);
  const std::size_t norm = 4 * 4 + 1;
  EXPECT_EQ(serialize_weights(net).size(), 28 + layers * 16 + (convs + norm) * 4);
}

TEST(WeightFile, TruncationIsReported) {
  synth::Rng rng(5);
  auto bytes = serialize_weights(synth::random_network(3, 4, 1, rng));
  for (std::size_t cut : {std::size_t{4}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
    std::vector<char> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    try {
      deserialize_weights(part);
      FAIL() << "cut at " << cut;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Truncation) << e.what();
    }
  }
}

TEST(WeightFile, TrailingBytesRejected) {
  auto bytes = serialize_weights(QeNetwork::zeros(2, 2, 0));
  bytes.push_back(0);
  expect_error(ErrorKind::Format, "trailing", [&] { deserialize_weights(bytes); });
}

TEST(WeightFile, NonFiniteWeightNamesLayer) {
  synth::Rng rng(6);
  QeNetwork net = synth::random_network(3, 4, 2, rng);
  net.tail_a.weights[5] = std::numeric_limits<float>::quiet_NaN();
  expect_error(ErrorKind::Format, "tail_a", [&] { deserialize_weights(serialize_weights(net)); });
  net = synth::random_network(3, 4, 2, rng);
  net.blocks[1].conv_b.bias[0] = std::numeric_limits<float>::infinity();
  expect_error(ErrorKind::Format, "block1.conv_b", [&] { deserialize_weights(serialize_weights(net)); });
}

TEST(WeightFile, BadMagicOrVersion) {
  auto bytes = serialize_weights(QeNetwork::zeros(2, 2, 1));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  expect_error(ErrorKind::Format, "magic", [&] { deserialize_weights(bad_magic); });
  auto bad_version = bytes;
  bad_version[8] = 2;
  expect_error(ErrorKind::Format, "version 2", [&] { deserialize_weights(bad_version); });
}

TEST(WeightFile, BrokenManifestRejected) {
  auto bytes = serialize_weights(QeNetwork::zeros(3, 4, 1));
  // First manifest entry (head) starts after 28 header bytes; corrupt its output channel count.
  bytes[28 + 8] = 5;
  expect_error(ErrorKind::Format, "head", [&] { deserialize_weights(bytes); });
}

TEST(WeightFile, MissingFileIsIoError) {
  expect_error(ErrorKind::Io, "cannot open", [] { load_weights("/nonexistent/model.qew"); });
}

TEST(WeightFile, ProductionShapeRoundTripAndForward) {
  synth::Rng rng(7);
  QeNetwork net = QeNetwork::zeros(3);
  ASSERT_EQ(net.channels, 256);
  ASSERT_EQ(net.num_blocks(), 16);
  net = synth::affine_network(3, 2, 1.0f, 0.0f, 256, 16);
  const QeNetwork back = deserialize_weights(serialize_weights(net));
  EXPECT_EQ(back, net);
  const FrameBundle b = random_bundle(6, 5, rng);
  EXPECT_EQ(forward_qe(assemble_input(b, InputSet::CQP), back, 4), b.prediction);
}
