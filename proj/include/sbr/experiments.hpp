// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sbr/baselines.hpp"
#include "sbr/field_data.hpp"
#include "sbr/train.hpp"

namespace sbr {

/// Header row plus string cells; to_csv() appends "# config_hash=<hash>".
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string config_hash;

  std::string to_csv() const;
  void write(const std::filesystem::path& path) const;
};

std::string format_number(double v);

struct ExperimentRow {
  std::string mode;
  std::string schedule;
  int depth = 0;
  std::uint64_t seed = 0;
  double rel_l2 = 0.0;
  double backbone_flops = 0.0;
  double ratio_vs_dense = 1.0;
  std::int64_t token_budget = 0;  // sum of active tokens over layers, per sample
  double throughput = 0.0;        // samples per second, single precision
  std::optional<double> speedup;
  double avg_load_variance = 0.0;
  std::optional<double> degradation_pct;
  std::string config_hash;
};

struct ExperimentReport {
  std::string experiment;
  std::vector<ExperimentRow> rows;
  std::string config_hash;

  CsvTable table() const;
};

struct ExperimentOptions {
  int bench_reps = 3;
  std::size_t bench_samples = 10;
  int threads = 1;
};

/// Trains `config` (routing mode included), evaluates it on the test split
/// and fills one report row.
ExperimentRow run_row(const TrainConfig& config, const FieldDataset& data,
                      const ExperimentOptions& options, TrainResult* trained = nullptr);

/// Decremental, constant, incremental and mid-heavy at equal total keep
/// ratio, preceded by a dense reference row.
ExperimentReport run_schedule_comparison(const TrainConfig& base, const FieldDataset& data,
                                         const ExperimentOptions& options = {});

/// Router-ranked versus uniformly random token selection at the same
/// schedule and seed. The random row carries the degradation percentage.
ExperimentReport run_ablation(const TrainConfig& base, const FieldDataset& data,
                              const ExperimentOptions& options = {});

/// Dense and routed rows for every depth; routed rows carry the measured
/// throughput ratio against dense execution of the same weights.
ExperimentReport run_depth_sweep(const TrainConfig& base, const FieldDataset& data,
                                 const std::vector<int>& depths,
                                 const ExperimentOptions& options = {});

struct MorComparison {
  ExperimentReport report;
  CsvTable load;  // layer, sbr_mean, sbr_var, mor_mean, mor_var
};

/// Budget-matched router-ranked versus exit-layer routing.
MorComparison run_mor_comparison(const TrainConfig& base, const FieldDataset& data,
                                 const ExperimentOptions& options = {});

/// Per-layer active-count statistics over `indices` for a routing mode.
LoadProfile route_load(const OperatorModel& model, const FieldDataset& data,
                       const std::vector<std::size_t>& indices, const RoutingSpec& spec);

}  // namespace sbr
