// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

#include "sbr/router.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numeric>

#include "sbr/error.hpp"

namespace sbr {

std::string_view shape_name(ScheduleShape shape) {
  switch (shape) {
    case ScheduleShape::kDecremental: return "decremental";
    case ScheduleShape::kConstant: return "constant";
    case ScheduleShape::kIncremental: return "incremental";
    case ScheduleShape::kMidHeavy: return "mid_heavy";
    case ScheduleShape::kCustom: return "custom";
  }
  return "custom";
}

ScheduleShape parse_shape(std::string_view name) {
  std::string n(name);
  std::replace(n.begin(), n.end(), '-', '_');
  for (char& c : n) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (n == "decremental") return ScheduleShape::kDecremental;
  if (n == "constant") return ScheduleShape::kConstant;
  if (n == "incremental") return ScheduleShape::kIncremental;
  if (n == "mid_heavy" || n == "midheavy") return ScheduleShape::kMidHeavy;
  if (n == "custom") return ScheduleShape::kCustom;
  throw ParameterError("unknown schedule shape '" + std::string(name) + "'");
}

SparsitySchedule::SparsitySchedule(std::vector<double> ratios, ScheduleShape shape)
    : ratios_(std::move(ratios)), shape_(shape) {
  if (ratios_.empty()) throw ParameterError("schedule must have at least one layer");
  for (double r : ratios_) {
    if (!(r > 0.0 && r <= 1.0)) {
      throw ParameterError("schedule ratio " + std::to_string(r) + " outside (0, 1]");
    }
  }
}

SparsitySchedule SparsitySchedule::dense(int depth) {
  if (depth < 1) throw ParameterError("depth must be >= 1");
  return SparsitySchedule(std::vector<double>(depth, 1.0), ScheduleShape::kCustom);
}

double SparsitySchedule::total() const {
  return std::accumulate(ratios_.begin(), ratios_.end(), 0.0);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

SparsitySchedule parse_schedule(std::string_view spec, int depth, double lo, double hi) {
  spec = trim(spec);
  const bool is_list = !spec.empty() &&
                       (spec.front() == '[' || spec.find(',') != std::string_view::npos ||
                        std::isdigit(static_cast<unsigned char>(spec.front())) || spec.front() == '.');
  if (!is_list) return make_schedule(parse_shape(spec), depth, lo, hi);

  if (spec.front() == '[') spec.remove_prefix(1);
  if (!spec.empty() && spec.back() == ']') spec.remove_suffix(1);
  std::vector<double> ratios;
  while (!spec.empty()) {
    const auto comma = spec.find_first_of(", ");
    auto tok = trim(spec.substr(0, comma));
    spec = comma == std::string_view::npos ? std::string_view{} : spec.substr(comma + 1);
    if (tok.empty()) continue;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
      throw ParameterError("bad schedule ratio '" + std::string(tok) + "'");
    }
    ratios.push_back(v);
  }
  if (static_cast<int>(ratios.size()) != depth) {
    throw ParameterError("schedule has " + std::to_string(ratios.size()) +
                         " ratios but depth is " + std::to_string(depth));
  }
  return SparsitySchedule(std::move(ratios), ScheduleShape::kCustom);
}

RoutingPlan::RoutingPlan(ImportanceRanking ranking, std::vector<Index> counts)
    : ranking_(std::move(ranking)), counts_(std::move(counts)) {
  const Index n = ranking_.size();
  packed_.reserve(counts_.size());
  for (Index k : counts_) {
    if (k < 1 || k > n) {
      throw ParameterError("active count " + std::to_string(k) + " outside [1, " +
                           std::to_string(n) + "]");
    }
    IndexList idx(ranking_.order.begin(), ranking_.order.begin() + k);
    std::sort(idx.begin(), idx.end());
    packed_.push_back(std::move(idx));
  }
}

std::span<const Index> RoutingPlan::active_set(int layer) const {
  return {ranking_.order.data(), static_cast<std::size_t>(counts_.at(layer))};
}

std::uint64_t RoutingPlan::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  mix(ranking_.order.data(), ranking_.order.size() * sizeof(Index));
  mix(ranking_.scores.data(), ranking_.scores.size() * sizeof(double));
  mix(counts_.data(), counts_.size() * sizeof(Index));
  return h;
}

std::vector<double> score_tokens(const MatD& features, const ColVecD& w) {
  if (features.cols() != w.size()) {
    throw ParameterError("score_tokens: feature width " + std::to_string(features.cols()) +
                         " does not match router length " + std::to_string(w.size()));
  }
  const ColVecD logits = features * w;
  std::vector<double> s(static_cast<std::size_t>(logits.size()));
  for (Index i = 0; i < logits.size(); ++i) s[i] = 1.0 / (1.0 + std::exp(-logits[i]));
  return s;
}

ImportanceRanking rank_tokens(std::vector<double> scores) {
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) {
      throw DataError("rank_tokens: score " + std::to_string(i) + " is NaN");
    }
  }
  IndexList order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return scores[a] > scores[b]; });
  return {std::move(scores), std::move(order)};
}

SparsitySchedule make_schedule(ScheduleShape shape, int depth, double lo, double hi) {
  if (depth < 1) throw ParameterError("make_schedule: depth must be >= 1");
  if (!(lo > 0.0 && lo <= hi && hi <= 1.0)) {
    throw ParameterError("make_schedule: need 0 < lo <= hi <= 1");
  }
  if (shape == ScheduleShape::kCustom) {
    throw ParameterError("make_schedule: 'custom' needs an explicit ratio list");
  }
  // Three capacity levels: hi, midpoint, lo. Layer l of the decremental ramp
  // sits at level ceil(2 t) with t = l / (L - 1).
  const double step = (hi - lo) / 2.0;
  std::vector<double> dec(depth);
  for (int l = 0; l < depth; ++l) {
    const double t = depth == 1 ? 0.0 : static_cast<double>(l) / (depth - 1);
    const double level = std::ceil(2.0 * t - 1e-12);
    dec[l] = hi - level * step;
  }

  switch (shape) {
    case ScheduleShape::kDecremental:
      return SparsitySchedule(dec, shape);
    case ScheduleShape::kIncremental:
      std::reverse(dec.begin(), dec.end());
      return SparsitySchedule(dec, shape);
    case ScheduleShape::kConstant: {
      const double total = std::accumulate(dec.begin(), dec.end(), 0.0);
      return SparsitySchedule(std::vector<double>(depth, total / depth), shape);
    }
    case ScheduleShape::kMidHeavy: {
      // Largest ratios go to the positions closest to the centre, left first.
      std::vector<int> pos(depth);
      std::iota(pos.begin(), pos.end(), 0);
      const double centre = (depth - 1) / 2.0;
      std::stable_sort(pos.begin(), pos.end(), [&](int a, int b) {
        return std::abs(a - centre) < std::abs(b - centre);
      });
      std::vector<double> out(depth);
      for (int j = 0; j < depth; ++j) out[pos[j]] = dec[j];
      return SparsitySchedule(out, shape);
    }
    case ScheduleShape::kCustom:
      break;
  }
  throw ParameterError("make_schedule: unsupported shape");
}

std::vector<Index> active_counts(const SparsitySchedule& schedule, Index n_tokens) {
  if (n_tokens < 1) throw ParameterError("active_counts: N must be >= 1");
  std::vector<Index> k;
  k.reserve(schedule.ratios().size());
  for (double r : schedule.ratios()) {
    // The relative slack absorbs products such as 10 * 0.7 landing one ulp
    // above an integer.
    const double prod = static_cast<double>(n_tokens) * r;
    const auto c = static_cast<Index>(std::ceil(prod - 1e-9 * prod));
    k.push_back(std::clamp<Index>(c, 1, n_tokens));
  }
  return k;
}

RoutingPlan build_plan(ImportanceRanking ranking, std::vector<Index> counts) {
  return RoutingPlan(std::move(ranking), std::move(counts));
}

}  // namespace sbr
