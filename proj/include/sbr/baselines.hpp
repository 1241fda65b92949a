// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "sbr/tensor.hpp"

namespace sbr {

/// Exit-layer routing: token i takes part in layers 1..exit_layer[i].
struct ExitAssignment {
  std::vector<int> exit_layer;
  int depth = 0;
};

/// Per-layer active sets in packing order (ascending token index).
using LayerRoutes = std::vector<IndexList>;

struct LoadProfile {
  std::vector<std::vector<Index>> per_layer_counts;  // [sample][layer]
  std::vector<double> mean_counts;
  std::vector<double> variance;  // population variance across samples
  double avg_variance = 0.0;
};

/// Budget-exact exit assignment driven by score values. Scores are
/// standardized per call to z_i, and each token gets a real-valued depth
/// clamp(t + z_i, 1, L), one layer per standard deviation, with the level t
/// chosen so the depths sum to `budget`. Depths are then floored and the
/// leftover layers go to the largest fractional parts (ties to the
/// higher-ranked token). Where the layer cuts fall in rank terms depends on
/// the shape of the score distribution. Higher scores never exit earlier.
/// Layers past the deepest exit may be empty. Requires N <= budget <= N * L.
ExitAssignment mor_assign(const std::vector<double>& scores, std::int64_t budget, int depth);

/// Active set of layer l is { i : exit_layer[i] >= l }.
LayerRoutes mor_plan(const ExitAssignment& assignment);

/// Independent uniform k_l-subsets per layer, deterministic in `seed`.
LayerRoutes random_plan(Index n_tokens, const std::vector<Index>& counts, std::uint64_t seed);

LoadProfile profile_load(const std::vector<std::vector<Index>>& per_sample_counts);

std::vector<Index> route_counts(const LayerRoutes& routes);

}  // namespace sbr
