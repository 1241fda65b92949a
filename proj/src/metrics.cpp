// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

#include "sbr/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>
#include <thread>

#include "sbr/error.hpp"

namespace sbr {

double rel_l2(const MatD& pred, const MatD& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
    throw ParameterError("rel_l2: shapes differ");
  }
  const double denom = truth.norm();
  if (!(denom > 0.0)) throw DataError("rel_l2: truth has zero norm");
  return (pred - truth).norm() / denom;
}

double mean_rel_l2(const std::vector<MatD>& preds, const std::vector<MatD>& truths) {
  if (preds.size() != truths.size() || preds.empty()) {
    throw ParameterError("mean_rel_l2: need equally many (>0) predictions and truths");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!(truths[i].norm() > 0.0)) {
      throw DataError("mean_rel_l2: sample " + std::to_string(i) + " has zero-norm truth");
    }
    sum += rel_l2(preds[i], truths[i]);
  }
  return sum / static_cast<double>(preds.size());
}

double layer_flops(const FlopsConfig& c, Index active) {
  const double k = active;
  const double d = c.dim;
  const double f = c.ffn_dim;
  const double attention = 2.0 * (4.0 * k * d * d) + 2.0 * (2.0 * k * k * d);
  const double mlp = 2.0 * (2.0 * k * d * f);
  const double norms = 10.0 * k * d + 6.0 * k * k;
  return attention + mlp + norms;
}

FlopsReport count_flops(const FlopsConfig& c, const std::vector<Index>& counts) {
  if (c.depth < 1 || c.dim < 1 || c.ffn_dim < 1 || c.n_tokens < 1) {
    throw ParameterError("count_flops: invalid configuration");
  }
  if (static_cast<int>(counts.size()) != c.depth) {
    throw ParameterError("count_flops: need one active count per layer");
  }
  FlopsReport r;
  const double dense_layer = layer_flops(c, c.n_tokens);
  for (Index k : counts) {
    if (k < 0 || k > c.n_tokens) throw ParameterError("count_flops: active count outside [0, N]");
    r.per_layer.push_back(layer_flops(c, k));
    r.backbone_total += r.per_layer.back();
    r.dense_backbone_total += dense_layer;
  }
  const double n = c.n_tokens;
  r.encoder_decoder_total = 2.0 * n * c.in_dim * c.dim + 2.0 * n * c.dim * c.out_dim;
  r.router_total = 2.0 * n * c.dim;
  r.ratio_vs_dense = r.backbone_total / r.dense_backbone_total;
  return r;
}

FlopsConfig flops_config(const ModelConfig& m, Index n_tokens) {
  return {m.depth, m.dim, m.ffn_dim, m.n_heads, n_tokens, m.in_dim, m.out_dim};
}

ActivationNormMap activation_norms(const ForwardTrace& trace) {
  ActivationNormMap map;
  auto norms = [](const MatD& x) {
    std::vector<double> v(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) v[i] = x.row(i).norm();
    return v;
  };
  if (trace.layer_inputs.empty()) {
    map.per_layer.push_back(norms(trace.final_state));
    return map;
  }
  for (const auto& x : trace.layer_inputs) map.per_layer.push_back(norms(x));
  map.per_layer.push_back(norms(trace.final_state));
  return map;
}

namespace {

ThroughputStats summarize(std::vector<double> per_rep) {
  ThroughputStats s;
  const double n = static_cast<double>(per_rep.size());
  s.samples_per_s = std::accumulate(per_rep.begin(), per_rep.end(), 0.0) / n;
  double sq = 0.0;
  for (double v : per_rep) sq += (v - s.samples_per_s) * (v - s.samples_per_s);
  s.std = per_rep.size() > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0;
  s.per_rep = std::move(per_rep);
  return s;
}

double timed_pass(const std::function<void(std::size_t)>& run, std::size_t n, int threads) {
  const auto start = std::chrono::steady_clock::now();
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
  } else {
    std::vector<std::thread> workers;
    for (int t = 0; t < threads; ++t) {
      workers.emplace_back([&, t] {
        for (std::size_t i = t; i < n; i += threads) run(i);
      });
    }
    for (auto& w : workers) w.join();
  }
  const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
  return static_cast<double>(n) / dt.count();
}

}  // namespace

ThroughputStats measure_throughput(const std::function<void(std::size_t)>& run_sample,
                                   std::size_t n_samples, int reps, int warmup, int threads) {
  if (n_samples == 0) throw ParameterError("measure_throughput: empty dataset");
  if (reps < 3) throw ParameterError("measure_throughput: need at least 3 repetitions");
  for (int w = 0; w < warmup; ++w) timed_pass(run_sample, n_samples, threads);
  std::vector<double> per_rep;
  for (int r = 0; r < reps; ++r) per_rep.push_back(timed_pass(run_sample, n_samples, threads));
  return summarize(std::move(per_rep));
}

BenchResult bench_models(const OperatorModel& model, const SparsitySchedule& schedule,
                         bool gating, const std::vector<MatD>& inputs, int reps, int threads) {
  if (inputs.empty()) throw ParameterError("bench: empty dataset");
  if (reps < 3) throw ParameterError("bench: need at least 3 repetitions");
  const ModelParams<float> fmodel = model.cast<float>();
  std::vector<MatF> finputs;
  finputs.reserve(inputs.size());
  for (const auto& x : inputs) finputs.push_back(x.cast<float>());

  auto run_dense = [&](std::size_t i) {
    volatile float sink = dense_forward(finputs[i], fmodel)(0, 0);
    (void)sink;
  };
  auto run_sbr = [&](std::size_t i) {
    volatile float sink = infer(finputs[i], fmodel, schedule, gating)(0, 0);
    (void)sink;
  };
  timed_pass(run_dense, finputs.size(), threads);
  timed_pass(run_sbr, finputs.size(), threads);
  std::vector<double> dense_reps;
  std::vector<double> sbr_reps;
  std::vector<double> ratios;
  for (int r = 0; r < reps; ++r) {
    dense_reps.push_back(timed_pass(run_dense, finputs.size(), threads));
    sbr_reps.push_back(timed_pass(run_sbr, finputs.size(), threads));
    ratios.push_back(sbr_reps.back() / dense_reps.back());
  }
  BenchResult b;
  b.dense = summarize(std::move(dense_reps));
  b.sbr = summarize(std::move(sbr_reps));
  b.speedup = b.sbr.samples_per_s / b.dense.samples_per_s;
  std::sort(ratios.begin(), ratios.end());
  const std::size_t mid = ratios.size() / 2;
  b.median_speedup = ratios.size() % 2 ? ratios[mid] : 0.5 * (ratios[mid - 1] + ratios[mid]);
  return b;
}

}  // namespace sbr
