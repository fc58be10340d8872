#pragma once

// Command implementations behind the `qe` tool. Each command is a pure function of
// its config and input files; reports are key=value lines plus CSV blocks.

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qe/cu_layout.hpp"
#include "qe/error.hpp"
#include "qe/frame.hpp"
#include "qe/metrics.hpp"
#include "qe/model_registry.hpp"
#include "qe/parallel.hpp"
#include "qe/qp_map.hpp"
#include "qe/selection.hpp"
#include "qe/signaling.hpp"
#include "qe/yuv.hpp"

namespace qe {

struct JobConfig {
  std::filesystem::path recon;
  int width = 0;
  int height = 0;
  std::size_t frames = 0;  // 0: every frame in the reconstruction file
  // CU layout sidecar; "{poc}" in the path is replaced by the frame index.
  std::filesystem::path cu_layout;
  std::optional<int> qp;  // constant-QP mode when no layout is given
  std::filesystem::path prediction;
  std::filesystem::path original;
  std::array<std::filesystem::path, kModelCount> weights;  // by ModelId::index()
  std::optional<ModelId> model;                            // enhance only; default from frame type
  InputSet default_input = InputSet::CQP;
  std::string frame_types;  // one of I/P/B per frame, or a single letter for all
  int ctb_size = CtbGrid::kDefaultCtbSize;
  std::optional<double> lambda;
  std::uint64_t frame_bits = 0;  // rate of each frame before selection signaling
  std::filesystem::path output;
  std::filesystem::path signal;
  std::filesystem::path report;
  unsigned threads = 1;
};

struct EvalPoint {
  std::filesystem::path yuv;
  double rate = 0.0;
};

struct EvalConfig {
  std::filesystem::path original;
  int width = 0;
  int height = 0;
  std::size_t frames = 0;
  std::vector<EvalPoint> anchor;
  std::vector<EvalPoint> test;
  std::filesystem::path anchor_csv;  // optional rate,psnr outputs
  std::filesystem::path test_csv;
  std::filesystem::path plot_csv;  // curve,rate,psnr
  std::filesystem::path report;
};

inline std::optional<ModelId> parse_model_id(const std::string& name) {
  for (const ModelId id : kAllModels) {
    if (id.name() == name) return id;
  }
  return std::nullopt;
}

inline InputSet parse_input_set(const std::string& name) {
  if (name == "cq") return InputSet::CQ;
  if (name == "cqp") return InputSet::CQP;
  throw Error(ErrorKind::Config, "default model policy must be cq or cqp, got '" + name + "'");
}

// Key=value report with CSV blocks delimited by "[csv:<name>]" and "[/csv]".
class Report {
 public:
  template <typename T>
  void set(const std::string& key, const T& value) {
    std::ostringstream v;
    v << std::setprecision(17) << value;
    out_ << key << '=' << v.str() << '\n';
  }

  void csv(const std::string& name, const std::string& header, const std::vector<std::string>& rows) {
    out_ << "[csv:" << name << "]\n" << header << '\n';
    for (const auto& r : rows) out_ << r << '\n';
    out_ << "[/csv]\n";
  }

  std::string str() const { return out_.str(); }

  void write(const std::filesystem::path& path) const {
    if (path.empty()) return;
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw Error(ErrorKind::Io, "cannot create report " + path.string());
    f << out_.str();
  }

 private:
  std::ostringstream out_;
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream o;
  o << std::hex << std::setw(16) << std::setfill('0') << v;
  return o.str();
}

inline std::string fmt(double v, int precision = 6) {
  std::ostringstream o;
  if (std::isinf(v)) {
    o << (v > 0 ? "inf" : "-inf");
  } else {
    o << std::fixed << std::setprecision(precision) << v;
  }
  return o.str();
}

// Output-affecting settings only; thread count is deliberately absent.
inline std::string canonical(const std::string& command, const JobConfig& c) {
  std::ostringstream o;
  o << "command=" << command << "\nrecon=" << c.recon.string() << "\nwidth=" << c.width << "\nheight=" << c.height
    << "\nframes=" << c.frames << "\ncu_layout=" << c.cu_layout.string()
    << "\nqp=" << (c.qp ? std::to_string(*c.qp) : "") << "\nprediction=" << c.prediction.string()
    << "\noriginal=" << c.original.string();
  for (const ModelId id : kAllModels) o << "\nweights." << id.name() << '=' << c.weights[id.index()].string();
  o << "\nmodel=" << (c.model ? c.model->name() : "") << "\ndefault_input="
    << (c.default_input == InputSet::CQ ? "cq" : "cqp") << "\nframe_types=" << c.frame_types
    << "\nctb_size=" << c.ctb_size << "\nlambda=" << (c.lambda ? fmt(*c.lambda, 17) : "")
    << "\nframe_bits=" << c.frame_bits << '\n';
  return o.str();
}

inline std::filesystem::path layout_path(const JobConfig& c, std::size_t poc) {
  std::string p = c.cu_layout.string();
  const std::string token = "{poc}";
  const auto at = p.find(token);
  if (at != std::string::npos) p.replace(at, token.size(), std::to_string(poc));
  return p;
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::Config, what);
}

inline std::size_t resolve_frame_count(const JobConfig& c) {
  require(!c.recon.empty(), "reconstruction yuv is required");
  require(c.width > 0 && c.height > 0, "frame width and height are required");
  require(c.ctb_size > 0, "ctb size must be positive");
  require(!c.prediction.empty(), "prediction yuv is required");
  require(!c.cu_layout.empty() || c.qp.has_value(), "either a CU layout or a constant qp is required");
  if (!std::filesystem::exists(c.recon)) throw Error(ErrorKind::Io, "reconstruction " + c.recon.string() + " not found");
  const std::size_t available = count_yuv_frames(c.recon, c.width, c.height);
  const std::size_t frames = c.frames == 0 ? available : c.frames;
  if (frames == 0) throw Error(ErrorKind::Truncation, c.recon.string() + " holds no complete frame");
  if (frames > available) {
    throw Error(ErrorKind::Truncation, c.recon.string() + " holds " + std::to_string(available) + " frames, " +
                                           std::to_string(frames) + " requested");
  }
  return frames;
}

inline ModelRegistry load_registry(const JobConfig& c) {
  std::array<QeNetwork, kModelCount> nets;
  for (const ModelId id : kAllModels) {
    require(!c.weights[id.index()].empty(), "weights for model " + id.name() + " are required");
    nets[id.index()] = load_weights(c.weights[id.index()]);
  }
  return ModelRegistry(std::move(nets));
}

struct LoadedFrame {
  RawFrame recon;  // luma + chroma bytes for passthrough
  FrameBundle bundle;
  int frame_qp = 0;
};

// The original is read only when with_original is set.
inline LoadedFrame load_frame(const JobConfig& c, std::size_t poc, bool with_original) {
  LoadedFrame f;
  f.recon = load_yuv_frame(c.recon, c.width, c.height, poc);
  f.bundle.reconstruction = f.recon.luma;
  f.bundle.prediction = load_yuv_luma(c.prediction, c.width, c.height, poc);
  f.bundle.poc = static_cast<int>(poc);

  std::optional<CuLayout> layout;
  if (!c.cu_layout.empty()) {
    layout = load_cu_layout(layout_path(c, poc), c.width, c.height);
    f.bundle.qp_map = build_qp_map(*layout, c.width, c.height);
    f.frame_qp = layout->mean_qp();
  } else {
    f.bundle.qp_map = build_constant_qp_map(*c.qp, c.width, c.height);
    f.frame_qp = *c.qp;
  }

  if (!c.frame_types.empty()) {
    const char t = c.frame_types.size() == 1 ? c.frame_types[0]
                   : poc < c.frame_types.size() ? c.frame_types[poc]
                                                : '\0';
    if (t == 'I') {
      f.bundle.coding_type = CodingType::Intra;
    } else if (t == 'P' || t == 'B') {
      f.bundle.coding_type = CodingType::Inter;
    } else {
      throw Error(ErrorKind::Config, "frame types must give I, P or B for frame " + std::to_string(poc));
    }
  } else {
    f.bundle.coding_type = layout && !layout->all_intra() ? CodingType::Inter : CodingType::Intra;
  }

  if (with_original) {
    require(!c.original.empty(), "original yuv is required");
    f.bundle.original = load_yuv_luma(c.original, c.width, c.height, poc);
  }
  f.bundle.validate();
  return f;
}

inline std::vector<std::size_t> ctb_counts(const JobConfig& c, std::size_t frames) {
  return std::vector<std::size_t>(frames, CtbGrid(c.width, c.height, c.ctb_size).count());
}

inline void write_output(const JobConfig& c, const std::vector<RawFrame>& frames) {
  require(!c.output.empty(), "output yuv path is required");
  write_yuv_frames(c.output, frames);
}

}  // namespace detail

inline std::string config_hash(const std::string& command, const JobConfig& c) {
  return detail::hex64(detail::fnv1a(detail::canonical(command, c)));
}

// Enhances every frame with one model. The original, when given, is used for the report only.
inline Report cmd_enhance(const JobConfig& c) {
  const std::size_t frames = detail::resolve_frame_count(c);
  const ModelRegistry registry = detail::load_registry(c);
  const bool with_original = !c.original.empty();

  std::vector<RawFrame> out(frames);
  std::vector<std::string> rows(frames);
  parallel_for(frames, c.threads, [&](std::size_t poc) {
    auto f = detail::load_frame(c, poc, with_original);
    const ModelId id = c.model.value_or(default_model(f.bundle.coding_type, c.default_input));
    Plane enhanced = enhance_frame(f.bundle, id, registry);
    std::ostringstream row;
    row << poc << ',' << to_char(f.bundle.coding_type) << ',' << id.name();
    if (with_original) {
      const double before = psnr(f.bundle.reconstruction, *f.bundle.original);
      const double after = psnr(enhanced, *f.bundle.original);
      row << ',' << detail::fmt(before) << ',' << detail::fmt(after) << ','
          << detail::fmt(std::isinf(before) && std::isinf(after) ? 0.0 : after - before);
    } else {
      row << ",,,";
    }
    rows[poc] = row.str();
    out[poc] = RawFrame{std::move(enhanced), std::move(f.recon.chroma)};
  });
  detail::write_output(c, out);

  Report report;
  report.set("command", "enhance");
  report.set("config_hash", config_hash("enhance", c));
  report.set("frames", frames);
  report.csv("frames", "poc,type,model,psnr_before,psnr_after,delta_psnr", rows);
  report.write(c.report);
  return report;
}

// Encoder side: per-frame model selection, signal file, and the enhanced output.
inline Report cmd_select(const JobConfig& c) {
  const std::size_t frames = detail::resolve_frame_count(c);
  detail::require(!c.original.empty(), "select needs the original yuv");
  detail::require(!c.signal.empty(), "select needs a signal output path");
  const ModelRegistry registry = detail::load_registry(c);
  const CtbGrid grid(c.width, c.height, c.ctb_size);

  std::vector<RawFrame> out(frames);
  std::vector<SelectionResult> results(frames);
  std::vector<std::string> rows(frames);
  parallel_for(frames, c.threads, [&](std::size_t poc) {
    auto f = detail::load_frame(c, poc, true);
    const EnhancedSet enhanced = enhance_all(f.bundle, registry);
    const ModelId def = default_model(f.bundle.coding_type, c.default_input);
    const double lambda = c.lambda.value_or(compute_lambda(f.frame_qp));
    const RdInput rd = make_rd_input(f.bundle, enhanced, def, c.frame_bits, lambda);
    SelectionResult r = select_frame(f.bundle, enhanced, grid, rd, c.default_input);
    Plane composed = compose_selection(r, enhanced, grid);

    std::ostringstream row;
    row << poc << ',' << to_char(f.bundle.coding_type) << ',' << (r.f1 ? 1 : 0) << ',' << detail::fmt(r.lambda, 9)
        << ',' << detail::fmt(r.d_f1_0, 1) << ',' << detail::fmt(r.d_f1_1, 1) << ',' << r.r_f1_0
        << ',' << r.r_f1_1 << ',' << detail::fmt(r.j_f1_0, 6) << ',' << detail::fmt(r.j_f1_1, 6)
        << ',' << detail::fmt(psnr(f.bundle.reconstruction, *f.bundle.original)) << ','
        << detail::fmt(psnr(composed, *f.bundle.original));
    rows[poc] = row.str();
    results[poc] = std::move(r);
    out[poc] = RawFrame{std::move(composed), std::move(f.recon.chroma)};
  });

  const auto counts = detail::ctb_counts(c, frames);
  const auto stream = encode_signals(std::span<const SelectionResult>(results), counts);
  write_signal_file(c.signal, stream);
  detail::write_output(c, out);

  std::array<std::size_t, kModelCount> histogram{};
  std::size_t signal_bit_total = 0;
  std::size_t frames_with_ctb = 0;
  for (std::size_t poc = 0; poc < frames; ++poc) {
    const auto& r = results[poc];
    signal_bit_total += signal_bits(r.f1, counts[poc]);
    if (r.f1) {
      ++frames_with_ctb;
      for (const auto& d : r.decisions) ++histogram[d.model.index()];
    } else {
      histogram[r.default_model.index()] += counts[poc];
    }
  }

  Report report;
  report.set("command", "select");
  report.set("config_hash", config_hash("select", c));
  report.set("frames", frames);
  report.set("ctb_size", c.ctb_size);
  report.set("ctbs_per_frame", counts.empty() ? 0 : counts.front());
  report.set("frames_f1", frames_with_ctb);
  report.set("signal_bits", signal_bit_total);
  report.set("signal_bytes", stream.size());
  for (const ModelId id : kAllModels) report.set("histogram." + id.name(), histogram[id.index()]);
  for (std::size_t poc = 0; poc < frames; ++poc) report.set("frame." + std::to_string(poc) + ".f1", results[poc].f1 ? 1 : 0);
  report.csv("frames", "poc,type,f1,lambda,d_f1_0,d_f1_1,r_f1_0,r_f1_1,j_f1_0,j_f1_1,psnr_before,psnr_after", rows);
  report.write(c.report);
  return report;
}

// Decoder side: parses the signal file and applies the signaled models. Never reads the original.
inline Report cmd_apply(const JobConfig& c) {
  JobConfig decoder = c;
  decoder.original.clear();
  const std::size_t frames = detail::resolve_frame_count(decoder);
  detail::require(!decoder.signal.empty(), "apply needs a signal file");
  const ModelRegistry registry = detail::load_registry(decoder);
  const CtbGrid grid(decoder.width, decoder.height, decoder.ctb_size);

  const auto stream = read_signal_file(decoder.signal);
  const auto counts = detail::ctb_counts(decoder, frames);
  const auto signals = decode_signals(stream, counts);

  std::vector<RawFrame> out(frames);
  parallel_for(frames, decoder.threads, [&](std::size_t poc) {
    auto f = detail::load_frame(decoder, poc, false);
    const SelectionResult r = to_selection(signals[poc], f.bundle.coding_type, decoder.default_input);
    out[poc] = RawFrame{apply_selection(f.bundle, r, registry, grid), std::move(f.recon.chroma)};
  });
  detail::write_output(decoder, out);

  Report report;
  report.set("command", "apply");
  report.set("config_hash", config_hash("apply", decoder));
  report.set("frames", frames);
  for (std::size_t poc = 0; poc < frames; ++poc) report.set("frame." + std::to_string(poc) + ".f1", signals[poc].f1 ? 1 : 0);
  report.write(decoder.report);
  return report;
}

// Mean of per-frame luma PSNR against the original; +inf if any frame is lossless.
inline double sequence_psnr(const std::filesystem::path& yuv, const std::filesystem::path& original, int width,
                            int height, std::size_t frames) {
  double total = 0.0;
  for (std::size_t poc = 0; poc < frames; ++poc) {
    total += psnr(load_yuv_luma(yuv, width, height, poc), load_yuv_luma(original, width, height, poc));
  }
  return total / static_cast<double>(frames);
}

struct EvalResult {
  std::vector<RdPoint> anchor;
  std::vector<RdPoint> test;
  double bd_rate = 0.0;
  Report report;
};

inline EvalResult cmd_eval(const EvalConfig& c) {
  detail::require(!c.original.empty(), "eval needs the original yuv");
  detail::require(c.width > 0 && c.height > 0, "frame width and height are required");
  const std::size_t frames = c.frames == 0 ? count_yuv_frames(c.original, c.width, c.height) : c.frames;
  if (frames == 0) throw Error(ErrorKind::Truncation, c.original.string() + " holds no complete frame");

  EvalResult result;
  std::vector<std::string> rows;
  const auto build = [&](const std::vector<EvalPoint>& points, const char* name, std::vector<RdPoint>& curve) {
    for (const auto& p : points) {
      const double q = sequence_psnr(p.yuv, c.original, c.width, c.height, frames);
      rows.push_back(std::string(name) + ',' + detail::fmt(p.rate, 6) + ',' + detail::fmt(q, 6));
      // Lossless points have no finite PSNR and are left out of the curve.
      if (std::isfinite(q)) curve.push_back(RdPoint{p.rate, q});
    }
    std::sort(curve.begin(), curve.end(), [](const RdPoint& a, const RdPoint& b) { return a.rate < b.rate; });
  };
  build(c.anchor, "anchor", result.anchor);
  build(c.test, "test", result.test);
  result.bd_rate = bd_rate(result.anchor, result.test);

  if (!c.anchor_csv.empty()) write_rd_csv(c.anchor_csv, result.anchor);
  if (!c.test_csv.empty()) write_rd_csv(c.test_csv, result.test);
  if (!c.plot_csv.empty()) {
    std::ofstream plot(c.plot_csv, std::ios::trunc);
    if (!plot) throw Error(ErrorKind::Io, "cannot create " + c.plot_csv.string());
    plot << "curve,rate,psnr\n";
    for (const auto& r : rows) plot << r << '\n';
  }

  result.report.set("command", "eval");
  result.report.set("frames", frames);
  result.report.set("bd_rate_percent", detail::fmt(result.bd_rate, 4));
  result.report.csv("rd_points", "curve,rate,psnr", rows);
  result.report.write(c.report);
  return result;
}

inline double cmd_bdrate(const std::filesystem::path& anchor_csv, const std::filesystem::path& test_csv) {
  return bd_rate(read_rd_csv(anchor_csv), read_rd_csv(test_csv));
}

}  // namespace qe
