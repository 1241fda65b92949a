// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

#include "sbr/experiments.hpp"

#include <cstdio>
#include <fstream>
#include <numeric>

#include "sbr/error.hpp"
#include "sbr/metrics.hpp"

namespace sbr {

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string CsvTable::to_csv() const {
  auto join = [](const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) line += ',';
      line += cells[i];
    }
    return line + '\n';
  };
  std::string out = join(header);
  for (const auto& r : rows) out += join(r);
  out += "# config_hash=" + config_hash + '\n';
  return out;
}

void CsvTable::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_csv();
}

CsvTable ExperimentReport::table() const {
  CsvTable t;
  t.header = {"experiment", "mode",       "schedule",        "depth",      "seed",
              "rel_l2",     "backbone_flops", "ratio_vs_dense", "token_budget", "throughput",
              "speedup",    "avg_load_variance", "degradation_pct", "config_hash"};
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  for (const auto& r : rows) {
    t.rows.push_back({experiment, r.mode, r.schedule, std::to_string(r.depth),
                      std::to_string(r.seed), format_number(r.rel_l2),
                      format_number(r.backbone_flops), format_number(r.ratio_vs_dense),
                      std::to_string(r.token_budget), format_number(r.throughput), opt(r.speedup),
                      format_number(r.avg_load_variance), opt(r.degradation_pct), r.config_hash});
  }
  t.config_hash = config_hash;
  return t;
}

namespace {

std::vector<MatD> bench_inputs(const FieldDataset& data, const std::vector<std::size_t>& test,
                               std::size_t limit) {
  std::vector<MatD> xs;
  for (std::size_t j = 0; j < test.size() && j < limit; ++j) {
    xs.push_back(data.samples[test[j]].input.features);
  }
  return xs;
}

std::vector<std::size_t> test_indices(const TrainConfig& config, const FieldDataset& data) {
  auto split = split_dataset(data.size(), config.train_count(data.size()));
  if (split.test.empty()) throw DataError("dataset has no test samples");
  return split.test;
}

}  // namespace

LoadProfile route_load(const OperatorModel& model, const FieldDataset& data,
                       const std::vector<std::size_t>& indices, const RoutingSpec& spec) {
  std::vector<std::vector<Index>> counts;
  for (std::size_t i : indices) {
    counts.push_back(route_counts(select_routes(data.samples.at(i).input.features, model, spec, i)));
  }
  return profile_load(counts);
}

ExperimentRow run_row(const TrainConfig& config, const FieldDataset& data,
                      const ExperimentOptions& options, TrainResult* trained) {
  TrainResult result = train(config, data);
  const RoutingSpec spec = routing_spec(config);
  const auto test = test_indices(config, data);
  const EvalResult eval = evaluate(result.model, data, test, spec);
  const LoadProfile load = route_load(result.model, data, test, spec);

  ExperimentRow row;
  row.mode = std::string(mode_name(config.routing));
  row.schedule = config.routing == RoutingMode::kDense
                     ? "dense"
                     : std::string(shape_name(spec.schedule.shape()));
  row.depth = config.model.depth;
  row.seed = config.seed;
  row.rel_l2 = eval.mean_rel_l2;

  // Counts can vary per sample under exit-layer routing, so FLOPs are
  // averaged over the test samples.
  const auto n = data.n_tokens();
  const FlopsConfig fc = flops_config(config.model, n);
  double flops = 0.0;
  double dense_flops = 0.0;
  for (const auto& counts : load.per_layer_counts) {
    const FlopsReport f = count_flops(fc, counts);
    flops += f.backbone_total;
    dense_flops = f.dense_backbone_total;
    row.token_budget = std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
  }
  row.backbone_flops = flops / static_cast<double>(load.per_layer_counts.size());
  row.ratio_vs_dense = row.backbone_flops / dense_flops;
  row.avg_load_variance = load.avg_variance;

  const auto inputs = bench_inputs(data, test, options.bench_samples);
  const ModelParams<float> fmodel = result.model.cast<float>();
  std::vector<MatF> finputs;
  std::vector<std::vector<IndexList>> routes;
  for (std::size_t j = 0; j < inputs.size(); ++j) {
    finputs.push_back(inputs[j].cast<float>());
    routes.push_back(spec.mode == RoutingMode::kSbr
                         ? std::vector<IndexList>{}
                         : select_routes(inputs[j], result.model, spec, test[j]));
  }
  const auto stats = measure_throughput(
      [&](std::size_t i) {
        volatile float sink =
            infer(finputs[i], fmodel, spec.schedule, spec.gating, routes[i])(0, 0);
        (void)sink;
      },
      finputs.size(), options.bench_reps, 1, options.threads);
  row.throughput = stats.samples_per_s;
  row.config_hash = config.to_config().hash();
  if (trained) *trained = std::move(result);
  return row;
}

ExperimentReport run_schedule_comparison(const TrainConfig& base, const FieldDataset& data,
                                         const ExperimentOptions& options) {
  ExperimentReport report;
  report.experiment = "compare-schedules";
  report.config_hash = base.to_config().hash();
  TrainConfig dense = base;
  dense.routing = RoutingMode::kDense;
  report.rows.push_back(run_row(dense, data, options));
  for (auto shape : {ScheduleShape::kDecremental, ScheduleShape::kConstant,
                     ScheduleShape::kIncremental, ScheduleShape::kMidHeavy}) {
    TrainConfig c = base;
    c.routing = RoutingMode::kSbr;
    c.schedule = std::string(shape_name(shape));
    report.rows.push_back(run_row(c, data, options));
  }
  return report;
}

ExperimentReport run_ablation(const TrainConfig& base, const FieldDataset& data,
                              const ExperimentOptions& options) {
  ExperimentReport report;
  report.experiment = "ablate-random";
  report.config_hash = base.to_config().hash();
  TrainConfig routed = base;
  routed.routing = RoutingMode::kSbr;
  TrainConfig random = base;
  random.routing = RoutingMode::kRandom;
  ExperimentRow s = run_row(routed, data, options);
  ExperimentRow r = run_row(random, data, options);
  r.degradation_pct = 100.0 * (r.rel_l2 - s.rel_l2) / s.rel_l2;
  report.rows = {s, r};
  return report;
}

ExperimentReport run_depth_sweep(const TrainConfig& base, const FieldDataset& data,
                                 const std::vector<int>& depths,
                                 const ExperimentOptions& options) {
  if (depths.empty()) throw ParameterError("sweep-depth: no depths given");
  for (int d : depths) {
    if (d < 2) throw ParameterError("sweep-depth: depths must be >= 2");
  }
  ExperimentReport report;
  report.experiment = "sweep-depth";
  report.config_hash = base.to_config().hash();
  const auto test = test_indices(base, data);
  const auto inputs = bench_inputs(data, test, options.bench_samples);
  for (int depth : depths) {
    TrainConfig dense = base;
    dense.model.depth = depth;
    dense.routing = RoutingMode::kDense;
    TrainConfig routed = dense;
    routed.routing = RoutingMode::kSbr;
    ExperimentRow d = run_row(dense, data, options);
    TrainResult trained;
    ExperimentRow s = run_row(routed, data, options, &trained);
    const BenchResult b = bench_models(trained.model, routed.make_schedule(), routed.gating,
                                       inputs, options.bench_reps, options.threads);
    d.speedup = 1.0;
    s.speedup = b.median_speedup;
    report.rows.push_back(d);
    report.rows.push_back(s);
  }
  return report;
}

MorComparison run_mor_comparison(const TrainConfig& base, const FieldDataset& data,
                                 const ExperimentOptions& options) {
  MorComparison out;
  out.report.experiment = "compare-mor";
  out.report.config_hash = base.to_config().hash();
  TrainConfig routed = base;
  routed.routing = RoutingMode::kSbr;
  TrainConfig mor = base;
  mor.routing = RoutingMode::kMor;
  TrainResult routed_model;
  TrainResult mor_model;
  out.report.rows.push_back(run_row(routed, data, options, &routed_model));
  out.report.rows.push_back(run_row(mor, data, options, &mor_model));

  const auto test = test_indices(base, data);
  const LoadProfile a = route_load(routed_model.model, data, test, routing_spec(routed));
  const LoadProfile b = route_load(mor_model.model, data, test, routing_spec(mor));
  out.load.header = {"layer", "sbr_mean", "sbr_var", "mor_mean", "mor_var"};
  for (std::size_t l = 0; l < a.mean_counts.size(); ++l) {
    out.load.rows.push_back({std::to_string(l + 1), format_number(a.mean_counts[l]),
                             format_number(a.variance[l]), format_number(b.mean_counts[l]),
                             format_number(b.variance[l])});
  }
  out.load.config_hash = out.report.config_hash;
  return out;
}

}  // namespace sbr
