#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "mixerforge/numerics/tensor.hpp"

namespace mixerforge {

/// A (cost, quality) point: lower flops and higher score are better.
struct ParetoPoint {
  double flops = 0.0;
  double score = 0.0;
  std::string label;

  friend bool operator==(const ParetoPoint&, const ParetoPoint&) = default;
};

/// True if `a` is at least as good as `b` on both axes and strictly better
/// on one.
inline bool dominates(const ParetoPoint& a, const ParetoPoint& b) {
  return a.flops <= b.flops && a.score >= b.score && (a.flops < b.flops || a.score > b.score);
}

/// Indices of the non-dominated points, ordered by flops, then by score
/// (descending), then by input position.
inline std::vector<std::size_t> pareto_indices(const std::vector<ParetoPoint>& points) {
  for (const auto& p : points)
    if (!std::isfinite(p.flops) || !std::isfinite(p.score)) throw InputError("pareto: non-finite point '" + p.label + "'");
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].flops != points[b].flops) return points[a].flops < points[b].flops;
    return points[a].score > points[b].score;
  });
  // Sweep in cost order keeping points that beat the best score seen at any
  // strictly lower cost; equal points never dominate each other.
  std::vector<std::size_t> out;
  double best_lower = -INFINITY;  // best score at strictly lower flops
  double group_best = -INFINITY;  // best score within the current flops group
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& p = points[order[i]];
    if (i > 0 && p.flops != points[order[i - 1]].flops) {
      best_lower = std::max(best_lower, group_best);
      group_best = -INFINITY;
    }
    if (group_best == -INFINITY) group_best = p.score;
    if (p.score > best_lower && p.score == group_best) out.push_back(order[i]);
  }
  return out;
}

inline std::vector<ParetoPoint> pareto(const std::vector<ParetoPoint>& points) {
  std::vector<ParetoPoint> out;
  for (auto i : pareto_indices(points)) out.push_back(points[i]);
  return out;
}

}  // namespace mixerforge
