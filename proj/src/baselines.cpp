// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

#include "sbr/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "sbr/error.hpp"

namespace sbr {

ExitAssignment mor_assign(const std::vector<double>& scores, std::int64_t budget, int depth) {
  const auto n = static_cast<std::int64_t>(scores.size());
  if (depth < 1 || n < 1) throw ParameterError("mor_assign: need N >= 1 and depth >= 1");
  if (budget < n || budget > n * depth) {
    throw ParameterError("mor_assign: budget " + std::to_string(budget) + " outside [" +
                         std::to_string(n) + ", " + std::to_string(n * depth) + "]");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) {
      throw DataError("mor_assign: scores must be finite");
    }
  }

  const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / n;
  double var = 0.0;
  for (double s : scores) var += (s - mean) * (s - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> z(scores.size(), 0.0);
  if (sd > 0.0) {
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = (scores[i] - mean) / sd;
  }

  auto depth_of = [&](double level, std::size_t i) {
    return std::clamp(level + z[i], 1.0, static_cast<double>(depth));
  };
  auto total = [&](double level) {
    double t = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) t += depth_of(level, i);
    return t;
  };

  // total(level) is continuous and non-decreasing, N at lo and N * L at hi.
  const auto [zmin, zmax] = std::minmax_element(z.begin(), z.end());
  double lo = 1.0 - *zmax;
  double hi = static_cast<double>(depth) - *zmin;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (total(mid) < static_cast<double>(budget) ? lo : hi) = mid;
  }
  const double level = hi;

  // Rank order: descending score, ascending index.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  ExitAssignment out;
  out.depth = depth;
  out.exit_layer.resize(scores.size());
  std::vector<double> frac(scores.size());
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double e = depth_of(level, i);
    const double fl = std::floor(e);
    out.exit_layer[i] = static_cast<int>(fl);
    frac[i] = e - fl;
    assigned += out.exit_layer[i];
  }

  // Largest remainder. The real-valued total sits just above the budget, so
  // the decrement pass below only guards against rounding.
  std::vector<std::size_t> by_frac = order;
  std::stable_sort(by_frac.begin(), by_frac.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t j = 0; assigned < budget; j = (j + 1) % by_frac.size()) {
    const std::size_t i = by_frac[j];
    if (out.exit_layer[i] < depth) {
      ++out.exit_layer[i];
      ++assigned;
    }
  }
  for (auto it = by_frac.rbegin(); assigned > budget && it != by_frac.rend(); ++it) {
    if (out.exit_layer[*it] > 1) {
      --out.exit_layer[*it];
      --assigned;
    }
  }
  return out;
}

LayerRoutes mor_plan(const ExitAssignment& a) {
  LayerRoutes routes(static_cast<std::size_t>(a.depth));
  for (std::size_t i = 0; i < a.exit_layer.size(); ++i) {
    const int e = a.exit_layer[i];
    if (e < 1 || e > a.depth) throw ParameterError("mor_plan: exit layer outside [1, L]");
    for (int l = 0; l < e; ++l) routes[l].push_back(static_cast<Index>(i));
  }
  return routes;
}

LayerRoutes random_plan(Index n_tokens, const std::vector<Index>& counts, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LayerRoutes routes;
  routes.reserve(counts.size());
  IndexList pool(static_cast<std::size_t>(n_tokens));
  for (Index k : counts) {
    if (k < 1 || k > n_tokens) throw ParameterError("random_plan: count outside [1, N]");
    std::iota(pool.begin(), pool.end(), 0);
    // Partial Fisher-Yates: the first k slots are a uniform k-subset.
    for (Index j = 0; j < k; ++j) {
      std::uniform_int_distribution<Index> pick(j, n_tokens - 1);
      std::swap(pool[j], pool[pick(rng)]);
    }
    IndexList chosen(pool.begin(), pool.begin() + k);
    std::sort(chosen.begin(), chosen.end());
    routes.push_back(std::move(chosen));
  }
  return routes;
}

LoadProfile profile_load(const std::vector<std::vector<Index>>& per_sample_counts) {
  if (per_sample_counts.empty()) throw ParameterError("profile_load: need at least one sample");
  const std::size_t depth = per_sample_counts.front().size();
  for (const auto& c : per_sample_counts) {
    if (c.size() != depth) throw ParameterError("profile_load: samples differ in depth");
  }
  LoadProfile p;
  p.per_layer_counts = per_sample_counts;
  p.mean_counts.assign(depth, 0.0);
  p.variance.assign(depth, 0.0);
  const double ns = static_cast<double>(per_sample_counts.size());
  for (std::size_t l = 0; l < depth; ++l) {
    double sum = 0.0;
    for (const auto& c : per_sample_counts) sum += c[l];
    const double mean = sum / ns;
    double sq = 0.0;
    for (const auto& c : per_sample_counts) sq += (c[l] - mean) * (c[l] - mean);
    p.mean_counts[l] = mean;
    p.variance[l] = sq / ns;
  }
  p.avg_variance = depth == 0 ? 0.0
                              : std::accumulate(p.variance.begin(), p.variance.end(), 0.0) /
                                    static_cast<double>(depth);
  return p;
}

std::vector<Index> route_counts(const LayerRoutes& routes) {
  std::vector<Index> c;
  c.reserve(routes.size());
  for (const auto& r : routes) c.push_back(static_cast<Index>(r.size()));
  return c;
}

}  // namespace sbr
