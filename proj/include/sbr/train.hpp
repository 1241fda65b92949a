// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sbr/backbone.hpp"
#include "sbr/config.hpp"
#include "sbr/field_data.hpp"
#include "sbr/model.hpp"
#include "sbr/router.hpp"

namespace sbr {

enum class RoutingMode { kSbr, kDense, kRandom, kMor };

std::string_view mode_name(RoutingMode mode);
RoutingMode parse_mode(std::string_view name);

struct TrainConfig {
  std::filesystem::path dataset;
  ModelConfig model;
  std::string schedule = "decremental";
  double schedule_lo = 0.25;
  double schedule_hi = 1.0;
  RoutingMode routing = RoutingMode::kSbr;
  int n_train = -1;  // -1 selects default_train_count
  double lr = 1e-3;
  int steps = 200;
  int batch_size = 4;
  double grad_clip = 1.0;  // global-norm clip; <= 0 disables
  int eval_every = 0;      // 0 picks steps / 10
  std::uint64_t seed = 0;
  bool gating = true;
  std::filesystem::path out_dir;

  /// Throws ParameterError naming the offending field.
  void validate() const;
  /// Resolves the schedule spec against model.depth.
  SparsitySchedule make_schedule() const;
  std::size_t train_count(std::size_t n_samples) const;
  /// Round-trips every field through Config keys, so hashes are stable.
  Config to_config() const;
  static TrainConfig from_config(const Config& config);
};

/// How one forward pass picks its active tokens.
struct RoutingSpec {
  RoutingMode mode = RoutingMode::kDense;
  SparsitySchedule schedule = SparsitySchedule::dense(1);
  bool gating = false;
  std::uint64_t seed = 0;
};

RoutingSpec routing_spec(const TrainConfig& config);

/// Per-layer active sets for one input. `draw` distinguishes independent
/// random draws under the same seed.
std::vector<IndexList> select_routes(const MatD& x_in, const OperatorModel& model,
                                     const RoutingSpec& spec, std::uint64_t draw);

/// One forward pass under `spec`.
std::pair<MatD, ForwardTrace> forward_sample(const MatD& x_in, const OperatorModel& model,
                                             const RoutingSpec& spec, std::uint64_t draw,
                                             bool train_mode);

struct LossPoint {
  int step = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  std::optional<double> val_loss;
};

struct TrainResult {
  OperatorModel model;       // best-validation checkpoint
  OperatorModel last_model;  // weights after the final step
  std::vector<LossPoint> curve;
  int best_step = 0;
  double best_val = 0.0;
};

struct DataSplit {
  std::vector<std::size_t> fit;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Train/test at n_train; the last 10% of the train part is held out for
/// validation.
DataSplit split_dataset(std::size_t n_samples, std::size_t n_train);

TrainResult train(const TrainConfig& config, const FieldDataset& data);
/// Reads config.dataset and trains; writes model.bin and loss.csv when
/// config.out_dir is set.
TrainResult train(const TrainConfig& config);

struct EvalResult {
  double mean_rel_l2 = 0.0;
  std::vector<double> per_sample;
  std::vector<MatD> predictions;  // physical units, in `indices` order
};

/// Mean relative L2 in physical units (targets de-normalized).
EvalResult evaluate(const OperatorModel& model, const FieldDataset& data,
                    const std::vector<std::size_t>& indices, const RoutingSpec& spec);

/// Mean normalized-space loss used for training and validation.
double mean_loss(const OperatorModel& model, const FieldDataset& data,
                 const std::vector<std::size_t>& indices, const RoutingSpec& spec,
                 std::uint64_t draw_base);

MatD denormalize_target(const MatD& target, const FieldDataset& data);

}  // namespace sbr
