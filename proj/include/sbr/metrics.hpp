// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sbr/backbone.hpp"
#include "sbr/model.hpp"
#include "sbr/router.hpp"
#include "sbr/tensor.hpp"

namespace sbr {

/// ||pred - truth||_2 / ||truth||_2 over all entries. Throws DataError when
/// truth is zero.
double rel_l2(const MatD& pred, const MatD& truth);

/// Mean of rel_l2 over paired samples; a zero-norm truth is reported with
/// its sample index.
double mean_rel_l2(const std::vector<MatD>& preds, const std::vector<MatD>& truths);

struct FlopsConfig {
  int depth = 0;
  int dim = 0;
  int ffn_dim = 0;
  int n_heads = 1;
  Index n_tokens = 0;
  int in_dim = 3;
  int out_dim = 1;
};

/// Analytic operation counts. A multiply-accumulate is 2 FLOPs. For a layer
/// with k active tokens:
///   attention   2*(4 k d^2) + 2*(2 k^2 d)
///   MLP         2*(2 k d d_ff)
///   LN/softmax  10 k d + 6 k^2
/// The backbone total excludes encoder, decoder and router, which are
/// reported separately.
struct FlopsReport {
  std::vector<double> per_layer;
  double backbone_total = 0.0;
  double dense_backbone_total = 0.0;
  double encoder_decoder_total = 0.0;
  double router_total = 0.0;
  double ratio_vs_dense = 1.0;
};

double layer_flops(const FlopsConfig& config, Index active);
FlopsReport count_flops(const FlopsConfig& config, const std::vector<Index>& counts);
FlopsConfig flops_config(const ModelConfig& model, Index n_tokens);

/// Row 0 holds the per-token L2 norms of X_0; row l those after layer l.
struct ActivationNormMap {
  std::vector<std::vector<double>> per_layer;
};

ActivationNormMap activation_norms(const ForwardTrace& trace);

struct ThroughputStats {
  double samples_per_s = 0.0;
  double std = 0.0;
  std::vector<double> per_rep;
};

/// Times `run_sample(i)` over all samples per repetition, after `warmup`
/// untimed passes. With threads > 1 samples are split across workers.
ThroughputStats measure_throughput(const std::function<void(std::size_t)>& run_sample,
                                   std::size_t n_samples, int reps, int warmup = 1,
                                   int threads = 1);

struct BenchResult {
  ThroughputStats dense;
  ThroughputStats sbr;
  double speedup = 0.0;         // mean SBR throughput / mean dense throughput
  double median_speedup = 0.0;  // median of per-repetition ratios
};

/// Single-precision inference throughput of the dense model versus the same
/// weights under router-driven routing. Inputs are converted beforehand, so
/// data loading is outside the timed region. Dense and routed repetitions are
/// interleaved.
BenchResult bench_models(const OperatorModel& model, const SparsitySchedule& schedule,
                         bool gating, const std::vector<MatD>& inputs, int reps,
                         int threads = 1);

}  // namespace sbr
