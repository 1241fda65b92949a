// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Criteria numbers given on the command line
// restrict the run to those criteria.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "sbr/backbone.hpp"
#include "sbr/baselines.hpp"
#include "sbr/complexity.hpp"
#include "sbr/experiments.hpp"
#include "sbr/field_data.hpp"
#include "sbr/metrics.hpp"
#include "sbr/model.hpp"
#include "sbr/router.hpp"
#include "sbr/train.hpp"

namespace {

using namespace sbr;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

void log(const std::string& msg) { std::fprintf(stderr, "[acceptance] %s\n", msg.c_str()); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

MatD random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  MatD m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

// ---------------------------------------------------------------------------
// Shared trained models.

constexpr int kSeeds = 3;

struct SeedModels {
  TrainConfig sbr_cfg, dense_cfg, random_cfg, shallow_cfg;
  OperatorModel sbr, dense, random, shallow;
  double sbr_err = 0, dense_err = 0, random_err = 0;
};

const FieldDataset& heat_data() {
  static const FieldDataset data = [] {
    GenParams p;  // 32x32 grids, 250 samples, first 200 for training
    p.seed = 2026;
    log("generating Heat2D dataset");
    return generate_dataset(p);
  }();
  return data;
}

TrainConfig base_config(std::uint64_t seed) {
  TrainConfig c;
  c.model = ModelConfig{4, 16, 32, 1, 3, 1};
  c.schedule = "decremental";
  c.schedule_lo = 0.25;
  c.schedule_hi = 1.0;
  c.lr = 3e-3;
  c.steps = 300;
  c.batch_size = 4;
  c.seed = seed;
  return c;
}

std::vector<std::size_t> test_split(const TrainConfig& c) {
  const auto& data = heat_data();
  return split_dataset(data.size(), c.train_count(data.size())).test;
}

const std::vector<SeedModels>& trained() {
  static const std::vector<SeedModels> all = [] {
    std::vector<SeedModels> out;
    const auto& data = heat_data();
    for (int s = 0; s < kSeeds; ++s) {
      SeedModels m;
      m.sbr_cfg = base_config(s);
      m.dense_cfg = m.sbr_cfg;
      m.dense_cfg.routing = RoutingMode::kDense;
      m.random_cfg = m.sbr_cfg;
      m.random_cfg.routing = RoutingMode::kRandom;
      m.shallow_cfg = m.dense_cfg;
      m.shallow_cfg.model.depth = 2;
      const auto t0 = std::chrono::steady_clock::now();
      m.dense = train(m.dense_cfg, data).model;
      m.sbr = train(m.sbr_cfg, data).model;
      m.random = train(m.random_cfg, data).model;
      m.shallow = train(m.shallow_cfg, data).model;
      const auto test = test_split(m.sbr_cfg);
      m.dense_err = evaluate(m.dense, data, test, routing_spec(m.dense_cfg)).mean_rel_l2;
      m.sbr_err = evaluate(m.sbr, data, test, routing_spec(m.sbr_cfg)).mean_rel_l2;
      m.random_err = evaluate(m.random, data, test, routing_spec(m.random_cfg)).mean_rel_l2;
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      log("seed " + std::to_string(s) + ": dense " + fmt("%.4f", m.dense_err) + ", sbr " +
          fmt("%.4f", m.sbr_err) + ", random " + fmt("%.4f", m.random_err) + " (" +
          fmt("%.0f", secs) + " s)");
      out.push_back(std::move(m));
    }
    return out;
  }();
  return all;
}

// ---------------------------------------------------------------------------

Outcome dense_equivalence() {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> depth(1, 4);
  std::uniform_int_distribution<int> dim_pick(0, 3);
  std::uniform_int_distribution<int> tokens(1, 64);
  const int dims[] = {4, 8, 16, 32};
  int mismatches = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int d = dims[dim_pick(rng)];
    const int heads = d >= 8 ? 2 : 1;
    const ModelConfig c{depth(rng), d, 2 * d, heads, 3, 1};
    const OperatorModel m = init_model(c, 100 + trial);
    const MatD x = random_matrix(tokens(rng), 3, rng);
    const MatD routed = sbr_forward(x, m, SparsitySchedule::dense(c.depth), {false, false}).first;
    const MatD dense = dense_forward(x, m);
    if (!(routed.array() == dense.array()).all()) ++mismatches;
  }
  return {mismatches == 0, std::to_string(20 - mismatches) + "/20 models bit-identical"};
}

Outcome gradient_correctness() {
  const ModelConfig cfg{2, 8, 16, 2, 3, 1};
  const SparsitySchedule sched({0.75, 0.5});
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed + 50);
    OperatorModel model = init_model(cfg, seed);
    const MatD x = random_matrix(16, 3, rng);
    const MatD y = random_matrix(16, 1, rng);
    auto loss = [&](const MatD& p) { return (p - y).norm() / y.norm(); };
    auto [pred, trace] = sbr_forward(x, model, sched, {true, true});
    const MatD diff = pred - y;
    ModelGrads g = backward(trace, model, diff / (diff.norm() * y.norm()));
    auto params = parameters(model);
    auto gparams = parameters(g);
    constexpr double h = 1e-5;
    for (std::size_t t = 0; t < params.size(); ++t) {
      for (std::size_t i = 0; i < params[t].size; ++i) {
        const double orig = params[t].data[i];
        params[t].data[i] = orig + h;
        const double up = loss(sbr_forward(x, model, sched, {true, false}).first);
        params[t].data[i] = orig - h;
        const double down = loss(sbr_forward(x, model, sched, {true, false}).first);
        params[t].data[i] = orig;
        const double numeric = (up - down) / (2 * h);
        const double analytic = gparams[t].data[i];
        const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
        worst = std::max(worst, std::abs(numeric - analytic) / denom);
      }
    }
  }
  return {worst < 1e-4, "max relative error " + fmt("%.2e", worst) + " over 5 seeds"};
}

Outcome flops_reduction() {
  const std::vector<double> ratios{1.0, 0.75, 0.75, 0.5, 0.5, 0.5};
  const ModelConfig model{6, 64, 128, 4, 3, 1};
  const Index n = 1024;
  const auto counts = active_counts(SparsitySchedule(ratios), n);
  const FlopsReport r = count_flops(flops_config(model, n), counts);
  // Closed form, evaluated independently of the library.
  auto layer = [&](double k) {
    const double d = model.dim;
    const double f = model.ffn_dim;
    return 8 * k * d * d + 4 * k * k * d + 4 * k * d * f + 10 * k * d + 6 * k * k;
  };
  double routed = 0.0;
  for (double rr : ratios) routed += layer(std::ceil(rr * n));
  const double expected = routed / (6 * layer(n));
  const double gap = std::abs(r.ratio_vs_dense - expected);
  return {gap < 1e-12 && r.ratio_vs_dense < 0.70,
          "ratio_vs_dense " + fmt("%.6f", r.ratio_vs_dense) + ", closed-form gap " +
              fmt("%.1e", gap)};
}

Outcome accuracy_preservation() {
  const auto& models = trained();
  const Index n = heat_data().n_tokens();
  const auto counts = active_counts(models[0].sbr_cfg.make_schedule(), n);
  double tokens = 0.0;
  for (Index k : counts) tokens += static_cast<double>(k);
  const double budget = tokens / (static_cast<double>(n) * counts.size());
  const double flop_ratio =
      count_flops(flops_config(models[0].sbr_cfg.model, n), counts).ratio_vs_dense;
  std::vector<double> rel;
  for (const auto& m : models) rel.push_back(m.sbr_err / m.dense_err);
  const double med = median(rel);
  return {budget <= 0.60 && med <= 1.5,
          "token budget " + fmt("%.3f", budget) + " of dense (FLOPs " + fmt("%.3f", flop_ratio) +
              "), median SBR/dense rel-L2 " + fmt("%.3f", med)};
}

Outcome load_variance() {
  const auto& m = trained()[0];
  const auto test = test_split(m.sbr_cfg);
  RoutingSpec routed = routing_spec(m.sbr_cfg);
  RoutingSpec mor = routed;
  mor.mode = RoutingMode::kMor;
  mor.gating = false;
  const LoadProfile a = route_load(m.sbr, heat_data(), test, routed);
  const LoadProfile b = route_load(m.sbr, heat_data(), test, mor);
  bool parity = true;
  for (std::size_t i = 0; i < a.per_layer_counts.size(); ++i) {
    Index sa = 0;
    Index sb = 0;
    for (Index k : a.per_layer_counts[i]) sa += k;
    for (Index k : b.per_layer_counts[i]) sb += k;
    parity = parity && sa == sb;
  }
  return {a.avg_variance == 0.0 && b.avg_variance > 0.0 && parity,
          "SBR avg variance " + fmt("%.2e", a.avg_variance) + ", MoR " +
              fmt("%.2e", b.avg_variance) + (parity ? ", budgets equal" : ", budget mismatch")};
}

Outcome random_ablation() {
  // Per-seed degradation, as the ablation report computes it.
  std::vector<double> degradation;
  std::vector<double> routed;
  std::vector<double> random;
  for (const auto& m : trained()) {
    degradation.push_back(100.0 * (m.random_err - m.sbr_err) / m.sbr_err);
    routed.push_back(m.sbr_err);
    random.push_back(m.random_err);
  }
  const double d = median(degradation);
  return {d >= 0.0, "median degradation of random selection " + fmt("%+.2f", d) +
                        "% (per seed " + fmt("%+.1f", degradation[0]) + "/" +
                        fmt("%+.1f", degradation[1]) + "/" + fmt("%+.1f", degradation[2]) +
                        "%; unpaired medians random " + fmt("%.4f", median(random)) + " vs SBR " +
                        fmt("%.4f", median(routed)) + ")"};
}

Outcome complexity_pipeline() {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double affine_err = 0.0;
  for (int t = 0; t < 100; ++t) {
    const double a = 3 * u(rng);
    const double b = 3 * u(rng);
    const double c = u(rng);
    MatD nb(8, 3);
    for (int j = 0; j < 8; ++j) {
      nb(j, 0) = u(rng);
      nb(j, 1) = u(rng);
      nb(j, 2) = a * nb(j, 0) + b * nb(j, 1) + c;
    }
    const auto g = estimate_gradient({0.0, 0.0, c}, nb);
    affine_err = std::max({affine_err, std::abs(g.gradient[0] - a), std::abs(g.gradient[1] - b)});
  }

  int partition_ok = 0;
  std::uniform_int_distribution<int> size(4, 500);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> s(size(rng));
    for (double& v : s) v = t % 4 == 0 ? std::round(4 * u(rng)) : std::exp(u(rng));
    std::vector<double> sorted = s;
    std::sort(sorted.begin(), sorted.end());
    auto pct = [&](double p) {
      const double pos = p / 100.0 * (sorted.size() - 1);
      const auto i = static_cast<std::size_t>(pos);
      const double w = pos - static_cast<double>(i);
      return i + 1 < sorted.size() ? sorted[i] + w * (sorted[i + 1] - sorted[i]) : sorted[i];
    };
    const double lo = pct(25);
    const double hi = pct(75);
    std::array<std::size_t, 3> expected{0, 0, 0};
    for (double v : s) ++expected[v < lo ? 0 : (v > hi ? 2 : 1)];
    if (partition_regions(s).counts() == expected) ++partition_ok;
  }

  // Depth benefit of a deep dense model over a shallow one, by region.
  const auto& data = heat_data();
  std::vector<double> simple;
  std::vector<double> complex;
  for (const auto& m : trained()) {
    const auto test = test_split(m.dense_cfg);
    const auto deep = evaluate(m.dense, data, test, routing_spec(m.dense_cfg));
    const auto shallow = evaluate(m.shallow, data, test, routing_spec(m.shallow_cfg));
    std::array<double, 3> e_deep{0, 0, 0};
    std::array<double, 3> e_shallow{0, 0, 0};
    std::array<int, 3> n{0, 0, 0};
    for (std::size_t j = 0; j < test.size(); ++j) {
      const auto& s = data.samples[test[j]];
      const MatD truth = denormalize_target(s.target.features, data);
      std::vector<double> values(truth.rows());
      for (Eigen::Index i = 0; i < truth.rows(); ++i) values[i] = truth(i, 0);
      const auto map = partition_regions(complexity_scores(values, s.input.coords).scores);
      const RegionErrors d = region_errors(deep.predictions[j], truth, map);
      const RegionErrors h = region_errors(shallow.predictions[j], truth, map);
      const std::optional<double> dv[3] = {d.simple, d.moderate, d.complex};
      const std::optional<double> hv[3] = {h.simple, h.moderate, h.complex};
      for (int r = 0; r < 3; ++r) {
        if (dv[r] && hv[r]) {
          e_deep[r] += *dv[r];
          e_shallow[r] += *hv[r];
          ++n[r];
        }
      }
    }
    const RegionErrors mean_deep{e_deep[0] / n[0], e_deep[1] / n[1], e_deep[2] / n[2]};
    const RegionErrors mean_shallow{e_shallow[0] / n[0], e_shallow[1] / n[1], e_shallow[2] / n[2]};
    const RegionErrors b = depth_benefit(mean_shallow, mean_deep);
    simple.push_back(*b.simple);
    complex.push_back(*b.complex);
    log("depth benefit simple " + fmt("%.4f", *b.simple) + ", complex " + fmt("%.4f", *b.complex));
  }
  const double bs = median(simple);
  const double bc = median(complex);
  return {affine_err < 1e-10 && partition_ok == 100 && bc > bs,
          "affine error " + fmt("%.1e", affine_err) + ", partitions " +
              std::to_string(partition_ok) + "/100, median depth benefit complex " +
              fmt("%.4f", bc) + " vs simple " + fmt("%.4f", bs)};
}

Outcome baseline_oracles() {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int knn_bad = 0;
  for (int n : {10, 50, 120, 200}) {
    MatD c(n, 2);
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = u(rng);
    const auto fast = knn(c, 8);
    for (int i = 0; i < n; ++i) {
      std::vector<std::pair<double, Index>> all;
      for (int j = 0; j < n; ++j) {
        if (j != i) all.push_back({(c.row(i) - c.row(j)).squaredNorm(), j});
      }
      std::sort(all.begin(), all.end());
      for (int t = 0; t < 8; ++t) knn_bad += fast[i][t] != all[t].second;
    }
  }

  int roundtrip_bad = 0;
  for (int t = 0; t < 20; ++t) {
    const MatD x = random_matrix(40, 6, rng);
    IndexList all(40);
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    IndexList active(all.begin(), all.begin() + 1 + t);
    const MatD packed = pack(x, std::span<const Index>(active));
    const std::span<const Index> idx(active);
    const MatD y = random_matrix(packed.rows(), packed.cols(), rng);
    const MatD written = scatter_residual(x, y, idx);
    if (!(scatter_residual(x, packed, idx).array() == x.array()).all() ||
        !(pack(written, idx).array() == y.array()).all()) {
      ++roundtrip_bad;
    }
  }

  double worst_sum = 0.0;
  bool max_ok = true;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Grid2D g = sample_grf(32, 32, 3.0, seed);
    std::vector<double> shifted = g.values();
    for (double& v : shifted) v += 2.0;
    const Grid2D pos(32, 32, shifted);
    const Grid2D out = solve_heat2d(pos, 1.0, 0.8 * max_stable_dt(32, 32, 1.0), 50);
    double before = 0.0;
    double after = 0.0;
    for (double v : pos.values()) before += v;
    for (double v : out.values()) after += v;
    worst_sum = std::max(worst_sum, std::abs(after - before) / std::abs(before));
    const Grid2D raw = solve_heat2d(g, 1.0, 0.8 * max_stable_dt(32, 32, 1.0), 50);
    auto max_abs = [](const Grid2D& grid) {
      double m = 0.0;
      for (double v : grid.values()) m = std::max(m, std::abs(v));
      return m;
    };
    max_ok = max_ok && max_abs(raw) <= max_abs(g);
  }
  return {knn_bad == 0 && roundtrip_bad == 0 && worst_sum < 1e-10 && max_ok,
          "knn mismatches " + std::to_string(knn_bad) + ", round-trip failures " +
              std::to_string(roundtrip_bad) + ", heat sum drift " + fmt("%.1e", worst_sum) +
              (max_ok ? ", max principle holds" : ", max principle violated")};
}

Outcome depth_scaling() {
  const auto& data = heat_data();
  std::vector<MatD> inputs;
  for (std::size_t i = 200; i < 208; ++i) inputs.push_back(data.samples[i].input.features);
  std::vector<double> speedups;
  std::string detail = "median speedup";
  for (int depth : {4, 6, 8}) {
    const ModelConfig c{depth, 64, 128, 4, 3, 1};
    const OperatorModel m = init_model(c, 7);
    const auto sched = make_schedule(ScheduleShape::kDecremental, depth, 0.25, 1.0);
    const BenchResult b = bench_models(m, sched, true, inputs, 3);
    speedups.push_back(b.median_speedup);
    detail += " L" + std::to_string(depth) + "=" + fmt("%.3f", b.median_speedup);
  }
  const bool ok = std::is_sorted(speedups.begin(), speedups.end());
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"dense equivalence", dense_equivalence},
      {"gradient correctness", gradient_correctness},
      {"flops reduction", flops_reduction},
      {"accuracy preservation", accuracy_preservation},
      {"load variance", load_variance},
      {"random-routing ablation", random_ablation},
      {"complexity pipeline", complexity_pipeline},
      {"baseline oracles", baseline_oracles},
      {"depth scaling", depth_scaling},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("criterion %d %-24s %s  %s\n", id, criteria[i].first.c_str(),
                o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
