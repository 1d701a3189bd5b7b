#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "tubeground/graph.hpp"
#include "tubeground/metrics.hpp"
#include "tubeground/types.hpp"

namespace testutil {

using tubeground::BoundingBox;
using tubeground::FrameInterval;
using tubeground::GroundingPrediction;
using tubeground::GroundTruth;
using tubeground::Parameter;
using tubeground::Tensor;
using tubeground::Tubelet;

/// Max relative gradient error against central finite differences.
/// loss_fn(true) must run backward and accumulate into the parameters'
/// gradients; loss_fn(false) is forward-only. The denominator is
/// max(1, |analytic|, |numeric|) so near-zero gradients stay meaningful.
struct GradCheck {
  double max_rel_err = 0.0;
  std::string worst_param;
};

inline GradCheck grad_check(const std::vector<Parameter*>& params,
                            const std::function<double(bool)>& loss_fn,
                            double h = 1e-5) {
  for (Parameter* p : params) p->zero_grad();
  loss_fn(true);
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->gradient);

  GradCheck result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter* p = params[pi];
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      const double lp = loss_fn(false);
      p->value[i] = saved - h;
      const double lm = loss_fn(false);
      p->value[i] = saved;
      const double numeric = (lp - lm) / (2.0 * h);
      const double a = analytic[pi][i];
      const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst_param = p->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  for (Parameter* p : params) p->zero_grad();
  return result;
}

inline Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng,
                            double scale = 1.0) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> g(0.0, scale);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = g(rng);
  return t;
}

// ---- Independent metric oracles (scalar loops, no shared code paths) ----

/// Rasterizes both boxes onto a unit pixel grid and counts cells. Exact for
/// integer coordinates.
inline double box_iou_raster_oracle(const BoundingBox& a, const BoundingBox& b) {
  const auto lo_x = static_cast<std::int64_t>(std::floor(std::min(a.x1, b.x1)));
  const auto hi_x = static_cast<std::int64_t>(std::ceil(std::max(a.x2, b.x2)));
  const auto lo_y = static_cast<std::int64_t>(std::floor(std::min(a.y1, b.y1)));
  const auto hi_y = static_cast<std::int64_t>(std::ceil(std::max(a.y2, b.y2)));
  std::int64_t inter = 0;
  std::int64_t uni = 0;
  for (std::int64_t x = lo_x; x < hi_x; ++x) {
    for (std::int64_t y = lo_y; y < hi_y; ++y) {
      const double cx = static_cast<double>(x) + 0.5;
      const double cy = static_cast<double>(y) + 0.5;
      const bool in_a = cx > a.x1 && cx < a.x2 && cy > a.y1 && cy < a.y2;
      const bool in_b = cx > b.x1 && cx < b.x2 && cy > b.y1 && cy < b.y2;
      if (in_a && in_b) ++inter;
      if (in_a || in_b) ++uni;
    }
  }
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

/// Per-frame membership counting for tIoU.
inline double tiou_enumeration_oracle(const FrameInterval& a, const FrameInterval& b) {
  std::set<std::int64_t> inter;
  std::set<std::int64_t> uni;
  for (std::int64_t f = std::min(a.start, b.start); f < std::max(a.end, b.end); ++f) {
    const bool in_a = f >= a.start && f < a.end;
    const bool in_b = f >= b.start && f < b.end;
    if (in_a && in_b) inter.insert(f);
    if (in_a || in_b) uni.insert(f);
  }
  return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

/// Analytic per-frame box IoU, used only inside the vIoU oracle below.
inline double box_iou_analytic(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter;
  return uni <= 0.0 ? 0.0 : inter / uni;
}

/// Single-pass frame-enumeration vIoU oracle.
inline double viou_enumeration_oracle(const GroundingPrediction& pred,
                                      const Tubelet& tubelet, const GroundTruth& gt) {
  double sum = 0.0;
  std::int64_t uni = 0;
  const std::int64_t lo = std::min(pred.t_start, gt.t_start);
  const std::int64_t hi = std::max(pred.t_end, gt.t_end);
  for (std::int64_t f = lo; f < hi; ++f) {
    const bool in_p = f >= pred.t_start && f < pred.t_end;
    const bool in_g = f >= gt.t_start && f < gt.t_end;
    if (in_p || in_g) ++uni;
    if (in_p && in_g) {
      sum += box_iou_analytic(tubelet.boxes.at(f), gt.target_boxes.at(f));
    }
  }
  return sum / static_cast<double>(uni);
}

/// Random valid box with positive area inside a width x height canvas.
inline BoundingBox random_box(std::mt19937_64& rng, double width = 100.0,
                              double height = 100.0) {
  std::uniform_real_distribution<double> ux(0.0, width - 2.0);
  std::uniform_real_distribution<double> uy(0.0, height - 2.0);
  std::uniform_real_distribution<double> us(1.0, 30.0);
  BoundingBox b;
  b.x1 = ux(rng);
  b.y1 = uy(rng);
  b.x2 = std::min(width, b.x1 + us(rng));
  b.y2 = std::min(height, b.y1 + us(rng));
  return b;
}

}  // namespace testutil
