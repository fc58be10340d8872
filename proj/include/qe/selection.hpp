#pragma once

// Encoder-side model selection. Every CTB picks the model whose full-frame
// enhancement has the smallest squared error against the original inside the CTB;
// the frame then decides, by Lagrangian cost, whether to signal those per-CTB
// choices (f1 = 1) or to fall back to the default model for the whole frame (f1 = 0).

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qe/error.hpp"
#include "qe/frame.hpp"
#include "qe/metrics.hpp"
#include "qe/model_registry.hpp"
#include "qe/parallel.hpp"
#include "qe/qp_map.hpp"

namespace qe {

// Full-frame enhanced planes indexed by ModelId::index().
using EnhancedSet = std::array<Plane, kModelCount>;

struct CtbDecision {
  std::size_t ctb_index = 0;
  ModelId model;
  double mse = 0.0;
  std::int64_t sse = 0;

  friend bool operator==(const CtbDecision&, const CtbDecision&) = default;
};

struct RdInput {
  std::uint64_t r_def = 0;  // bits of the frame before selection signaling
  double d_def = 0.0;  // SSE of the frame enhanced by the default model
  double lambda = 0.0;

  void validate() const {
    if (!(d_def >= 0.0) || !(lambda >= 0.0)) {
      throw Error(ErrorKind::Precondition, "distortion and lambda must be non-negative");
    }
  }
};

struct SelectionResult {
  bool f1 = false;
  std::vector<CtbDecision> decisions;  // one per CTB in raster order when f1 is set
  ModelId default_model;
  std::uint64_t r_f1_0 = 0;
  std::uint64_t r_f1_1 = 0;
  double d_f1_0 = 0.0;
  double d_f1_1 = 0.0;
  double j_f1_0 = 0.0;
  double j_f1_1 = 0.0;
  double lambda = 0.0;
};

// Lambda = 0.0324 * 2^((qp - 12) / 3).
inline double compute_lambda(int qp) {
  if (qp < 0 || qp > kMaxQp) throw Error(ErrorKind::Range, "qp " + std::to_string(qp) + " outside [0, 63]");
  return 0.0324 * std::exp2((qp - 12) / 3.0);
}

namespace detail {

inline const Plane& require_original(const FrameBundle& bundle) {
  if (!bundle.original) throw Error(ErrorKind::Precondition, "model selection needs the original frame");
  return *bundle.original;
}

inline void require_enhanced(const FrameBundle& bundle, const EnhancedSet& enhanced) {
  for (const auto& p : enhanced) {
    if (p.width() != bundle.width() || p.height() != bundle.height()) {
      throw Error(ErrorKind::Shape, "enhanced plane does not match the frame size");
    }
  }
}

}  // namespace detail

// Ties go to the earliest model in ModelId order.
inline CtbDecision select_ctb_model(const FrameBundle& bundle, std::size_t ctb_index, const Rect& ctb,
                                    const EnhancedSet& enhanced) {
  const Plane& original = detail::require_original(bundle);
  detail::require_enhanced(bundle, enhanced);
  CtbDecision best;
  best.ctb_index = ctb_index;
  bool first = true;
  for (const ModelId id : kAllModels) {
    const std::int64_t err = sse_exact(enhanced[id.index()], original, ctb);
    if (first || err < best.sse) {
      best.model = id;
      best.sse = err;
      first = false;
    }
  }
  best.mse = static_cast<double>(best.sse) / static_cast<double>(ctb.area());
  return best;
}

inline EnhancedSet enhance_all(const FrameBundle& bundle, const ModelRegistry& registry, unsigned threads = 1) {
  EnhancedSet out;
  for (const ModelId id : kAllModels) out[id.index()] = enhance_frame(bundle, id, registry, threads);
  return out;
}

// RD input for a frame whose default-model distortion is measured from the enhanced set.
inline RdInput make_rd_input(const FrameBundle& bundle, const EnhancedSet& enhanced, ModelId default_id,
                             std::uint64_t r_def, double lambda) {
  return RdInput{r_def, sse(enhanced[default_id.index()], detail::require_original(bundle)), lambda};
}

inline SelectionResult select_frame(const FrameBundle& bundle, const EnhancedSet& enhanced, const CtbGrid& grid,
                                    const RdInput& rd, InputSet default_input = InputSet::CQP,
                                    unsigned threads = 1) {
  bundle.validate();
  rd.validate();
  detail::require_original(bundle);
  detail::require_enhanced(bundle, enhanced);
  if (grid.width() != bundle.width() || grid.height() != bundle.height()) {
    throw Error(ErrorKind::Consistency, "CTB grid does not match the frame size");
  }

  SelectionResult result;
  result.default_model = default_model(bundle.coding_type, default_input);
  result.lambda = rd.lambda;
  result.r_f1_0 = rd.r_def + 1;
  result.r_f1_1 = rd.r_def + 1 + 2 * static_cast<std::uint64_t>(grid.count());
  result.d_f1_0 = rd.d_def;

  std::vector<CtbDecision> decisions(grid.count());
  parallel_for(grid.count(), threads, [&](std::size_t i) {
    decisions[i] = select_ctb_model(bundle, i, grid.rect(i), enhanced);
  });
  std::int64_t total = 0;
  for (const auto& d : decisions) total += d.sse;
  result.d_f1_1 = static_cast<double>(total);

  result.j_f1_0 = result.d_f1_0 + rd.lambda * static_cast<double>(result.r_f1_0);
  result.j_f1_1 = result.d_f1_1 + rd.lambda * static_cast<double>(result.r_f1_1);
  result.f1 = result.j_f1_1 < result.j_f1_0;
  if (result.f1) result.decisions = std::move(decisions);
  return result;
}

inline SelectionResult select_frame(const FrameBundle& bundle, const ModelRegistry& registry, const CtbGrid& grid,
                                    const RdInput& rd, InputSet default_input = InputSet::CQP,
                                    unsigned threads = 1) {
  return select_frame(bundle, enhance_all(bundle, registry, threads), grid, rd, default_input, threads);
}

// Models a decoder needs for this result.
inline std::array<bool, kModelCount> models_used(const SelectionResult& result) {
  std::array<bool, kModelCount> used{};
  if (!result.f1) {
    used[result.default_model.index()] = true;
  } else {
    for (const auto& d : result.decisions) used[d.model.index()] = true;
  }
  return used;
}

// Tiles the output from the enhanced planes. Entries of `enhanced` that the result
// does not reference may be empty planes.
inline Plane compose_selection(const SelectionResult& result, const EnhancedSet& enhanced, const CtbGrid& grid) {
  if (!result.f1) return enhanced[result.default_model.index()];
  if (result.decisions.size() != grid.count()) {
    throw Error(ErrorKind::Consistency, "selection has " + std::to_string(result.decisions.size()) +
                                            " CTB decisions, grid has " + std::to_string(grid.count()));
  }
  Plane out(grid.width(), grid.height());
  for (std::size_t i = 0; i < result.decisions.size(); ++i) {
    const auto& d = result.decisions[i];
    if (d.ctb_index != i) throw Error(ErrorKind::Consistency, "CTB decisions are not in raster order");
    const Plane& src = enhanced[d.model.index()];
    if (src.width() != grid.width() || src.height() != grid.height()) {
      throw Error(ErrorKind::Consistency, "no enhanced plane for model " + d.model.name());
    }
    const Rect r = grid.rect(i);
    for (int y = r.y; y < r.y + r.h; ++y) {
      for (int x = r.x; x < r.x + r.w; ++x) out.set(x, y, src.at(x, y));
    }
  }
  return out;
}

// Decoder-side reconstruction: runs only the models the result references, never reads the original.
inline Plane apply_selection(const FrameBundle& bundle, const SelectionResult& result, const ModelRegistry& registry,
                             const CtbGrid& grid, unsigned threads = 1) {
  if (grid.width() != bundle.width() || grid.height() != bundle.height()) {
    throw Error(ErrorKind::Consistency, "CTB grid does not match the frame size");
  }
  if (result.f1 && result.decisions.size() != grid.count()) {
    throw Error(ErrorKind::Consistency, "selection has " + std::to_string(result.decisions.size()) +
                                            " CTB decisions, grid has " + std::to_string(grid.count()));
  }
  FrameBundle decoder_view{bundle.reconstruction, bundle.prediction, bundle.qp_map, std::nullopt,
                           bundle.coding_type, bundle.poc};
  EnhancedSet enhanced;
  const auto used = models_used(result);
  for (const ModelId id : kAllModels) {
    if (used[id.index()]) enhanced[id.index()] = enhance_frame(decoder_view, id, registry, threads);
  }
  return compose_selection(result, enhanced, grid);
}

}  // namespace qe
