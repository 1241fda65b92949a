// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sbr/tensor.hpp"

namespace sbr {

/// Tokens ordered from most to least important. `scores` are indexed by the
/// original token index; `order[j]` is the token with the j-th highest score
/// (ties resolved by ascending token index).
struct ImportanceRanking {
  std::vector<double> scores;
  IndexList order;

  Index size() const { return static_cast<Index>(order.size()); }
};

enum class ScheduleShape { kDecremental, kConstant, kIncremental, kMidHeavy, kCustom };

std::string_view shape_name(ScheduleShape shape);
ScheduleShape parse_shape(std::string_view name);

/// Per-layer keep ratios, each in (0, 1].
class SparsitySchedule {
 public:
  SparsitySchedule(std::vector<double> ratios, ScheduleShape shape = ScheduleShape::kCustom);

  /// r_l = 1 at every layer.
  static SparsitySchedule dense(int depth);

  const std::vector<double>& ratios() const noexcept { return ratios_; }
  ScheduleShape shape() const noexcept { return shape_; }
  int depth() const noexcept { return static_cast<int>(ratios_.size()); }
  double total() const;

 private:
  std::vector<double> ratios_;
  ScheduleShape shape_;
};

/// Parses either a shape name or an explicit list such as "[1.0, 0.75, 0.5]".
SparsitySchedule parse_schedule(std::string_view spec, int depth, double lo, double hi);

/// Static per-forward-pass routing: the global ranking plus per-layer active
/// counts. Layer l processes the first counts[l] entries of ranking.order.
class RoutingPlan {
 public:
  RoutingPlan(ImportanceRanking ranking, std::vector<Index> counts);

  const ImportanceRanking& ranking() const noexcept { return ranking_; }
  const std::vector<Index>& counts() const noexcept { return counts_; }
  int depth() const noexcept { return static_cast<int>(counts_.size()); }

  /// The k_l-prefix of the ranking, in ranking order.
  std::span<const Index> active_set(int layer) const;

  /// The same set sorted by token index; this is the row order used when the
  /// backbone packs tokens.
  const IndexList& packed_indices(int layer) const { return packed_[layer]; }

  /// FNV-1a digest over ranking and counts.
  std::uint64_t fingerprint() const;

 private:
  ImportanceRanking ranking_;
  std::vector<Index> counts_;
  std::vector<IndexList> packed_;
};

/// sigmoid(features * w) per row.
std::vector<double> score_tokens(const MatD& features, const ColVecD& w);

/// Stable descending sort of scores. Throws DataError on NaN.
ImportanceRanking rank_tokens(std::vector<double> scores);

/// Builds one of the named schedule shapes. Decremental steps down from `hi`
/// through the midpoint to `lo`; incremental is its reverse; mid-heavy holds
/// the same ratios arranged largest-in-the-middle; constant spreads the same
/// total evenly.
SparsitySchedule make_schedule(ScheduleShape shape, int depth, double lo, double hi);

/// k_l = ceil(N * r_l), clamped to [1, N].
std::vector<Index> active_counts(const SparsitySchedule& schedule, Index n_tokens);

RoutingPlan build_plan(ImportanceRanking ranking, std::vector<Index> counts);

}  // namespace sbr
