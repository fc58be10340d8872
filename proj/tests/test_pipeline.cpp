#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "synthetic.hpp"

namespace fs = std::filesystem;
using namespace qe;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("qe_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<char> read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void use_weights(JobConfig& c, const fs::path& dir, const std::function<QeNetwork(ModelId)>& make) {
  for (const ModelId id : kAllModels) {
    const auto p = dir / ("override_" + id.name() + ".qew");
    save_weights(make(id), p);
    c.weights[id.index()] = p;
  }
}

std::string report_value(const std::string& report, const std::string& key) {
  const auto at = report.find(key + "=");
  if (at == std::string::npos) return {};
  const auto start = at + key.size() + 1;
  return report.substr(start, report.find('\n', start) - start);
}

}  // namespace

TEST(Enhance, IdentityWeightsKeepLumaAndPassChroma) {
  const auto dir = fresh_dir("identity");
  JobConfig c = synth::write_sequence(dir, {48, 32, 3, 16, false, 11});
  use_weights(c, dir, [](ModelId id) { return synth::identity_network(input_channel_count(id.input_set)); });
  cmd_enhance(c);
  EXPECT_EQ(read_all(c.output), read_all(c.recon));
}

TEST(Enhance, ZeroWeightsGiveBlackLuma) {
  const auto dir = fresh_dir("zeros");
  JobConfig c = synth::write_sequence(dir, {32, 16, 2, 16, false, 12});
  use_weights(c, dir, [](ModelId id) { return QeNetwork::zeros(input_channel_count(id.input_set), 2, 1); });
  c.original.clear();
  cmd_enhance(c);
  for (std::size_t poc = 0; poc < 2; ++poc) {
    const RawFrame out = load_yuv_frame(c.output, 32, 16, poc);
    EXPECT_EQ(out.luma, Plane(32, 16, 0));
    EXPECT_EQ(out.chroma, load_yuv_frame(c.recon, 32, 16, poc).chroma);
  }
}

TEST(Enhance, ReportPsnrMatchesFiles) {
  const auto dir = fresh_dir("report");
  const JobConfig c = synth::write_sequence(dir, {40, 24, 2, 8, false, 13});
  const std::string report = cmd_enhance(c).str();
  for (std::size_t poc = 0; poc < 2; ++poc) {
    const Plane orig = load_yuv_luma(c.original, 40, 24, poc);
    const double before = psnr(load_yuv_luma(c.recon, 40, 24, poc), orig);
    const double after = psnr(load_yuv_luma(c.output, 40, 24, poc), orig);
    const std::string row_prefix = std::to_string(poc) + ",";
    const auto at = report.find("\n" + row_prefix);
    ASSERT_NE(at, std::string::npos);
    const std::string row = report.substr(at + 1, report.find('\n', at + 1) - at - 1);
    EXPECT_NE(row.find(detail::fmt(before)), std::string::npos) << row;
    EXPECT_NE(row.find(detail::fmt(after)), std::string::npos) << row;
  }
  EXPECT_EQ(fs::exists(c.report), true);
}

TEST(Enhance, ExplicitModelOverridesFrameType) {
  const auto dir = fresh_dir("model");
  JobConfig c = synth::write_sequence(dir, {24, 16, 2, 8, false, 14});
  c.model = ModelId::from_index(0);
  const std::string report = cmd_enhance(c).str();
  EXPECT_NE(report.find("1,P,intra_cq"), std::string::npos) << report;
}

TEST(Select, ZeroLambdaChoosesCtbLevelWhenBetter) {
  const auto dir = fresh_dir("lambda0");
  JobConfig c = synth::write_sequence(dir, {64, 48, 3, 16, false, 15});
  c.lambda = 0.0;
  const std::string report = cmd_select(c).str();
  for (std::size_t poc = 0; poc < 3; ++poc) {
    EXPECT_EQ(report_value(report, "frame." + std::to_string(poc) + ".f1"), "1") << report;
  }
  EXPECT_EQ(report_value(report, "signal_bits"), std::to_string(3 * (1 + 2 * 12)));
}

TEST(Select, HugeLambdaSignalsOneBitPerFrame) {
  const auto dir = fresh_dir("lambdabig");
  JobConfig c = synth::write_sequence(dir, {64, 48, 3, 16, false, 16});
  c.lambda = 1e12;
  const std::string report = cmd_select(c).str();
  EXPECT_EQ(report_value(report, "frames_f1"), "0");
  EXPECT_EQ(report_value(report, "signal_bits"), "3");
  EXPECT_EQ(read_signal_file(c.signal), (std::vector<std::uint8_t>{0x00}));
}

TEST(SelectApply, DecoderOutputIsByteIdentical) {
  for (const std::uint64_t seed : {21u, 22u}) {
    const auto dir = fresh_dir("roundtrip" + std::to_string(seed));
    JobConfig c = synth::write_sequence(dir, {56, 40, 3, 16, seed == 22, seed});
    cmd_select(c);
    JobConfig d = c;
    d.original.clear();
    d.output = dir / "decoded.yuv";
    cmd_apply(d);
    EXPECT_EQ(read_all(d.output), read_all(c.output));
  }
}

TEST(SelectApply, FrameLevelBranchEqualsDefaultEnhance) {
  const auto dir = fresh_dir("default");
  JobConfig c = synth::write_sequence(dir, {40, 32, 2, 16, false, 23});
  c.lambda = 1e12;
  cmd_select(c);
  JobConfig e = c;
  e.output = dir / "enhanced_default.yuv";
  cmd_enhance(e);
  JobConfig d = c;
  d.output = dir / "decoded.yuv";
  cmd_apply(d);
  EXPECT_EQ(read_all(d.output), read_all(e.output));
}

TEST(SelectApply, TruncatedSignalFileFails) {
  const auto dir = fresh_dir("truncated");
  JobConfig c = synth::write_sequence(dir, {32, 32, 2, 16, false, 24});
  c.lambda = 0.0;
  cmd_select(c);
  auto bytes = read_all(c.signal);
  bytes.pop_back();
  {
    std::ofstream out(c.signal, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  try {
    cmd_apply(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Truncation);
  }
}

TEST(SelectApply, ThreadCountDoesNotChangeOutput) {
  const auto dir = fresh_dir("threads");
  JobConfig c = synth::write_sequence(dir, {48, 48, 3, 16, true, 25});
  cmd_select(c);
  const auto single = read_all(c.output);
  const auto single_signal = read_all(c.signal);
  c.threads = 4;
  cmd_select(c);
  EXPECT_EQ(read_all(c.output), single);
  EXPECT_EQ(read_all(c.signal), single_signal);
}

TEST(Select, ConstantQpWithoutLayout) {
  const auto dir = fresh_dir("constqp");
  JobConfig c = synth::write_sequence(dir, {32, 32, 2, 16, false, 26});
  c.cu_layout.clear();
  c.qp = 37;
  const std::string report = cmd_select(c).str();
  EXPECT_NE(report.find(detail::fmt(compute_lambda(37), 9)), std::string::npos) << report;
}

TEST(Select, MissingOriginalIsConfigError) {
  const auto dir = fresh_dir("noorig");
  JobConfig c = synth::write_sequence(dir, {16, 16, 1, 16, false, 27});
  c.original.clear();
  try {
    cmd_select(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
  }
}

TEST(Select, TooManyFramesIsTruncation) {
  const auto dir = fresh_dir("frames");
  JobConfig c = synth::write_sequence(dir, {16, 16, 1, 16, false, 28});
  c.frames = 5;
  try {
    cmd_select(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Truncation);
  }
}

TEST(ConfigHash, ChangesWithConfig) {
  JobConfig a;
  a.width = 16;
  JobConfig b = a;
  EXPECT_EQ(config_hash("select", a), config_hash("select", b));
  b.ctb_size = 64;
  EXPECT_NE(config_hash("select", a), config_hash("select", b));
  EXPECT_NE(config_hash("select", a), config_hash("apply", a));
}

TEST(Eval, SameFileGivesZeroAndHalvedRateGivesMinusFifty) {
  const auto dir = fresh_dir("eval");
  synth::Rng rng(29);
  std::vector<Plane> orig{synth::natural_plane(32, 16, rng), synth::natural_plane(32, 16, rng)};
  write_yuv_luma(dir / "orig.yuv", orig);
  EvalConfig e;
  e.original = dir / "orig.yuv";
  e.width = 32;
  e.height = 16;
  for (int k = 0; k < 4; ++k) {
    std::vector<Plane> decoded;
    for (const auto& p : orig) {
      std::vector<Sample> s(p.samples());
      for (auto& v : s) v = synth::clamp_sample(v + synth::uniform_int(rng, -(16 >> k), 16 >> k));
      decoded.emplace_back(32, 16, std::move(s));
    }
    const auto path = dir / ("rd" + std::to_string(k) + ".yuv");
    write_yuv_luma(path, decoded);
    const double rate = 1000.0 * (1 << k);
    e.anchor.push_back({path, rate});
    e.test.push_back({path, rate});
  }
  e.plot_csv = dir / "plot.csv";
  e.anchor_csv = dir / "anchor.csv";
  EXPECT_NEAR(cmd_eval(e).bd_rate, 0.0, 1e-9);
  for (auto& p : e.test) p.rate /= 2.0;
  EXPECT_NEAR(cmd_eval(e).bd_rate, -50.0, 1e-9);
  EXPECT_TRUE(fs::exists(e.plot_csv));
  EXPECT_EQ(read_rd_csv(e.anchor_csv).size(), 4u);
}
