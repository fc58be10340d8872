// qe: command-line front end for the quality-enhancement toolkit.
//
//   qe enhance  run one enhancement model over a sequence
//   qe select   encoder-side model selection, writes the signal file
//   qe apply    decoder-side: parse the signal file and apply the models
//   qe eval     RD points and BD-rate from decoded sequences
//   qe bdrate   BD-rate between two rate,psnr CSV curves

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "qe/qe.hpp"

namespace {

constexpr const char* kBdRateNote =
    "BD-rate interpolates log10(rate) over PSNR with a monotone piecewise cubic Hermite (PCHIP) "
    "curve and integrates it exactly over the overlapping PSNR range.";

struct JobFlags {
  qe::JobConfig config;
  std::string model;
  std::string default_input = "cqp";
  double lambda = 0.0;
  int qp = -1;
};

void add_job_options(CLI::App& cmd, JobFlags& f, bool needs_original, bool needs_signal) {
  auto& c = f.config;
  cmd.add_option("--recon", c.recon, "reconstructed 4:2:0 10-bit yuv")->required();
  cmd.add_option("--width", c.width, "luma width")->required();
  cmd.add_option("--height", c.height, "luma height")->required();
  cmd.add_option("--frames", c.frames, "frames to process (0 = all)");
  cmd.add_option("--cu-layout", c.cu_layout, "CU layout sidecar, '{poc}' expands to the frame index");
  cmd.add_option("--qp", f.qp, "constant QP when no CU layout is given");
  cmd.add_option("--prediction", c.prediction, "prediction 4:2:0 10-bit yuv")->required();
  if (needs_original) {
    cmd.add_option("--original", c.original, "original 4:2:0 10-bit yuv")->required();
  }
  for (const qe::ModelId id : qe::kAllModels) {
    std::string flag = "--weights-" + id.name();
    std::replace(flag.begin(), flag.end(), '_', '-');
    cmd.add_option(flag, c.weights[id.index()], "weights for model " + id.name())->required();
  }
  cmd.add_option("--default-model", f.default_input, "default model input set for f1 = 0 frames (cq|cqp)");
  cmd.add_option("--frame-types", c.frame_types, "I/P/B per frame, or one letter for all frames");
  cmd.add_option("--ctb-size", c.ctb_size, "CTB size in luma samples");
  cmd.add_option("--frame-bits", c.frame_bits, "coded bits per frame before selection signaling");
  cmd.add_option("--output", c.output, "enhanced yuv output")->required();
  if (needs_signal) cmd.add_option("--signal", c.signal, "model-selection signal file")->required();
  cmd.add_option("--report", c.report, "report file (key=value + CSV blocks)");
  cmd.add_option("--threads", c.threads, "worker threads (default: QE_THREADS or 1)");
}

void finish_job_flags(CLI::App& cmd, JobFlags& f) {
  auto& c = f.config;
  if (f.qp >= 0) c.qp = f.qp;
  if (const auto* opt = cmd.get_option_no_throw("--lambda"); opt && opt->count() > 0) c.lambda = f.lambda;
  if (!f.model.empty()) {
    c.model = qe::parse_model_id(f.model);
    if (!c.model) throw qe::Error(qe::ErrorKind::Config, "unknown model '" + f.model + "'");
  }
  c.default_input = qe::parse_input_set(f.default_input);
}

// Moves "--config FILE" to the front so it is accepted after the subcommand name too.
std::vector<std::string> hoist_config(int argc, char** argv) {
  std::vector<std::string> front, rest;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) {
      front.push_back(a);
      front.push_back(argv[++i]);
    } else if (a.rfind("--config=", 0) == 0) {
      front.push_back(a);
    } else {
      rest.push_back(a);
    }
  }
  front.insert(front.end(), rest.begin(), rest.end());
  std::reverse(front.begin(), front.end());  // CLI11 consumes the vector from the back
  return front;
}

bool parse_point(const std::string& text, std::vector<qe::EvalPoint>& out) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) return false;
  try {
    out.push_back(qe::EvalPoint{text.substr(0, colon), std::stod(text.substr(colon + 1))});
  } catch (const std::exception&) {
    return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prediction-aware CNN post-filter with RD-driven model selection"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "INI/TOML config file; a [enhance], [select], [apply] or [eval] section supplies that "
                 "subcommand's flags, command-line flags take precedence");

  JobFlags enhance_flags, select_flags, apply_flags;
  for (auto* f : {&enhance_flags, &select_flags, &apply_flags}) f->config.threads = qe::thread_count_from_env();

  auto* enhance = app.add_subcommand("enhance", "enhance every frame with one model");
  add_job_options(*enhance, enhance_flags, false, false);
  enhance->add_option("--original", enhance_flags.config.original, "original yuv, only used for report PSNR");
  enhance->add_option("--model", enhance_flags.model, "intra_cq|intra_cqp|inter_cq|inter_cqp (default: by frame type)");

  auto* select = app.add_subcommand("select", "encoder-side model selection");
  add_job_options(*select, select_flags, true, true);
  select->add_option("--lambda", select_flags.lambda, "Lagrangian override (default: derived from QP)");

  auto* apply = app.add_subcommand("apply", "decoder-side model application");
  add_job_options(*apply, apply_flags, false, true);

  qe::EvalConfig eval_config;
  std::vector<std::string> anchor_points, test_points;
  auto* eval = app.add_subcommand("eval", std::string("RD points and BD-rate. ") + kBdRateNote);
  eval->add_option("--original", eval_config.original, "original yuv")->required();
  eval->add_option("--width", eval_config.width, "luma width")->required();
  eval->add_option("--height", eval_config.height, "luma height")->required();
  eval->add_option("--frames", eval_config.frames, "frames to compare (0 = all)");
  eval->add_option("--anchor", anchor_points, "anchor point as YUV:RATE (repeat)")->required();
  eval->add_option("--test", test_points, "test point as YUV:RATE (repeat)")->required();
  eval->add_option("--anchor-csv", eval_config.anchor_csv, "write anchor rate,psnr CSV");
  eval->add_option("--test-csv", eval_config.test_csv, "write test rate,psnr CSV");
  eval->add_option("--plot-csv", eval_config.plot_csv, "write curve,rate,psnr CSV for plotting");
  eval->add_option("--report", eval_config.report, "report file");

  std::string anchor_csv, test_csv;
  auto* bdrate = app.add_subcommand("bdrate", std::string("BD-rate between two rate,psnr CSV files. ") + kBdRateNote);
  bdrate->add_option("anchor", anchor_csv, "anchor curve CSV")->required();
  bdrate->add_option("test", test_csv, "test curve CSV")->required();

  try {
    auto args = hoist_config(argc, argv);
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : qe::exit_code(qe::ErrorKind::Config);
  }

  try {
    if (*enhance) {
      finish_job_flags(*enhance, enhance_flags);
      std::cout << qe::cmd_enhance(enhance_flags.config).str();
    } else if (*select) {
      finish_job_flags(*select, select_flags);
      std::cout << qe::cmd_select(select_flags.config).str();
    } else if (*apply) {
      finish_job_flags(*apply, apply_flags);
      std::cout << qe::cmd_apply(apply_flags.config).str();
    } else if (*eval) {
      for (const auto& p : anchor_points) {
        if (!parse_point(p, eval_config.anchor)) throw qe::Error(qe::ErrorKind::Config, "bad anchor point '" + p + "'");
      }
      for (const auto& p : test_points) {
        if (!parse_point(p, eval_config.test)) throw qe::Error(qe::ErrorKind::Config, "bad test point '" + p + "'");
      }
      std::cout << qe::cmd_eval(eval_config).report.str();
    } else if (*bdrate) {
      std::cout << std::fixed << std::setprecision(2) << qe::cmd_bdrate(anchor_csv, test_csv) << "%\n";
    }
  } catch (const qe::Error& e) {
    std::cerr << "qe: " << e.what() << '\n';
    return qe::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "qe: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
