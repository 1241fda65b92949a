// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

#include "sbr/sbr.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "sbr/complexity.hpp"
#include "sbr/config.hpp"
#include "sbr/error.hpp"
#include "sbr/experiments.hpp"
#include "sbr/metrics.hpp"
#include "sbr/train.hpp"

struct sbr_config {
  sbr::Config value;
};
struct sbr_dataset {
  sbr::FieldDataset value;
};
struct sbr_model {
  sbr::OperatorModel value;
};
struct sbr_report {
  std::string csv;
};

namespace {

thread_local std::string g_last_error;

template <class F>
sbr_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return SBR_OK;
  } catch (const sbr::Error& e) {
    g_last_error = e.what();
    switch (e.kind()) {
      case sbr::ErrorKind::kParameter: return SBR_ERR_PARAM;
      case sbr::ErrorKind::kData: return SBR_ERR_DATA;
      case sbr::ErrorKind::kFormat: return SBR_ERR_FORMAT;
      case sbr::ErrorKind::kNumeric: return SBR_ERR_NUMERIC;
      case sbr::ErrorKind::kIo: return SBR_ERR_IO;
    }
    return SBR_ERR_INTERNAL;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SBR_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SBR_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return SBR_ERR_INTERNAL;
  }
}

template <class T>
const T& require(const T* p, const char* what) {
  if (!p) throw sbr::ParameterError(std::string(what) + " is NULL");
  return *p;
}

template <class T>
T** require_out(T** p) {
  if (!p) throw sbr::ParameterError("output pointer is NULL");
  *p = nullptr;
  return p;
}

sbr::Config config_or_empty(const sbr_config* c) { return c ? c->value : sbr::Config{}; }

sbr::ModelConfig model_config(const sbr::Config& c) {
  sbr::ModelConfig m;
  m.depth = static_cast<int>(c.get_int("depth", m.depth));
  m.dim = static_cast<int>(c.get_int("dim", m.dim));
  m.ffn_dim = static_cast<int>(c.get_int("ffn_dim", m.ffn_dim));
  m.n_heads = static_cast<int>(c.get_int("n_heads", m.n_heads));
  m.validate();
  return m;
}

sbr::TrainConfig train_config_for(const sbr::OperatorModel& model, const sbr::Config& c) {
  sbr::TrainConfig t = sbr::TrainConfig::from_config(c);
  t.model = model.config;
  return t;
}

std::vector<std::size_t> split_indices(const sbr::TrainConfig& t, const sbr::FieldDataset& data,
                                       const std::string& which) {
  const auto s = sbr::split_dataset(data.size(), t.train_count(data.size()));
  if (which == "test") return s.test;
  if (which == "all") {
    std::vector<std::size_t> all(data.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  if (which == "train") {
    auto out = s.fit;
    out.insert(out.end(), s.val.begin(), s.val.end());
    return out;
  }
  throw sbr::ParameterError("split must be train, test or all");
}

std::vector<std::size_t> nonempty(std::vector<std::size_t> v, const char* what) {
  if (v.empty()) throw sbr::DataError(std::string(what) + ": selected split is empty");
  return v;
}

sbr_report* make_report(std::string csv) { return new sbr_report{std::move(csv)}; }

}  // namespace

extern "C" {

const char* sbr_version(void) { return "0.1.0"; }

const char* sbr_last_error(void) { return g_last_error.c_str(); }

const char* sbr_status_name(sbr_status status) {
  switch (status) {
    case SBR_OK: return "ok";
    case SBR_ERR_PARAM: return "parameter error";
    case SBR_ERR_DATA: return "data error";
    case SBR_ERR_FORMAT: return "format error";
    case SBR_ERR_NUMERIC: return "numeric error";
    case SBR_ERR_IO: return "I/O error";
    case SBR_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

sbr_status sbr_config_new(sbr_config** out) {
  return guarded([&] { *require_out(out) = new sbr_config{}; });
}

sbr_status sbr_config_load(const char* path, sbr_config** out) {
  return guarded([&] {
    require_out(out);
    *out = new sbr_config{sbr::Config::load(&require(path, "path"))};
  });
}

sbr_status sbr_config_set(sbr_config* config, const char* key, const char* value) {
  return guarded([&] {
    if (!config) throw sbr::ParameterError("config is NULL");
    config->value.set(&require(key, "key"), &require(value, "value"));
  });
}

sbr_status sbr_config_get(const sbr_config* config, const char* key, const char** value) {
  return guarded([&] {
    const auto& c = require(config, "config").value;
    require_out(value);
    auto it = c.entries().find(sbr::Config::normalize_key(&require(key, "key")));
    if (it != c.entries().end()) *value = it->second.c_str();
  });
}

sbr_status sbr_config_hash(const sbr_config* config, char* buf, size_t size) {
  return guarded([&] {
    const auto h = require(config, "config").value.hash();
    if (!buf || size < h.size() + 1) throw sbr::ParameterError("hash buffer needs 17 bytes");
    std::memcpy(buf, h.c_str(), h.size() + 1);
  });
}

void sbr_config_free(sbr_config* config) { delete config; }

sbr_status sbr_dataset_generate(const sbr_config* config, sbr_dataset** out) {
  return guarded([&] {
    require_out(out);
    const sbr::Config c = config_or_empty(config);
    sbr::GenParams p;
    p.height = static_cast<int>(c.get_int("height", p.height));
    p.width = static_cast<int>(c.get_int("width", p.width));
    p.steps = static_cast<int>(c.get_int("steps", p.steps));
    p.diffusivity = c.get_double("diffusivity", p.diffusivity);
    p.dt = c.get_double("dt", p.dt);
    p.length_scale = c.get_double("length_scale", p.length_scale);
    p.n_samples = static_cast<int>(c.get_int("n_samples", p.n_samples));
    p.n_train = static_cast<int>(c.get_int("n_train", p.n_train));
    const auto seed = c.get_int("seed", 0);
    if (seed < 0) throw sbr::ParameterError("seed must be >= 0");
    p.seed = static_cast<std::uint64_t>(seed);
    *out = new sbr_dataset{sbr::generate_dataset(p)};
  });
}

sbr_status sbr_dataset_read(const char* path, sbr_dataset** out) {
  return guarded([&] {
    require_out(out);
    *out = new sbr_dataset{sbr::read_dataset(&require(path, "path"))};
  });
}

sbr_status sbr_dataset_write(const sbr_dataset* dataset, const char* path) {
  return guarded(
      [&] { sbr::write_dataset(require(dataset, "dataset").value, &require(path, "path")); });
}

sbr_status sbr_dataset_info_get(const sbr_dataset* dataset, sbr_dataset_info* out) {
  return guarded([&] {
    const auto& d = require(dataset, "dataset").value;
    if (!out) throw sbr::ParameterError("output pointer is NULL");
    out->n_samples = d.size();
    out->n_tokens = d.size() ? d.n_tokens() : 0;
    out->input_dim = d.size() ? d.input_dim() : 0;
    out->output_dim = d.size() ? d.output_dim() : 0;
  });
}

void sbr_dataset_free(sbr_dataset* dataset) { delete dataset; }

sbr_status sbr_model_init(const sbr_config* config, sbr_model** out) {
  return guarded([&] {
    require_out(out);
    const sbr::Config c = config_or_empty(config);
    const auto seed = c.get_int("seed", 0);
    if (seed < 0) throw sbr::ParameterError("seed must be >= 0");
    *out = new sbr_model{sbr::init_model(model_config(c), static_cast<std::uint64_t>(seed))};
  });
}

sbr_status sbr_model_load(const char* path, sbr_model** out) {
  return guarded([&] {
    require_out(out);
    *out = new sbr_model{sbr::load_model(&require(path, "path"))};
  });
}

sbr_status sbr_model_save(const sbr_model* model, const char* path) {
  return guarded([&] { sbr::save_model(require(model, "model").value, &require(path, "path")); });
}

sbr_status sbr_model_predict(const sbr_model* model, const sbr_config* config,
                             const double* input, int32_t n_tokens, int32_t in_dim,
                             double* output, size_t output_size) {
  return guarded([&] {
    const auto& m = require(model, "model").value;
    if (!input || !output) throw sbr::ParameterError("input and output must be non-NULL");
    if (n_tokens < 1 || in_dim != m.config.in_dim) {
      throw sbr::ParameterError("input shape does not match the model");
    }
    if (output_size < static_cast<size_t>(n_tokens) * m.config.out_dim) {
      throw sbr::ParameterError("output buffer too small");
    }
    const sbr::MatD x = Eigen::Map<const sbr::MatD>(input, n_tokens, in_dim);
    const auto spec = sbr::routing_spec(train_config_for(m, config_or_empty(config)));
    const auto [pred, trace] = sbr::forward_sample(x, m, spec, 0, false);
    Eigen::Map<sbr::MatD>(output, pred.rows(), pred.cols()) = pred;
  });
}

void sbr_model_free(sbr_model* model) { delete model; }

sbr_status sbr_train(const sbr_config* config, const sbr_dataset* dataset, sbr_model** model,
                     sbr_report** loss_curve) {
  return guarded([&] {
    require_out(model);
    if (loss_curve) *loss_curve = nullptr;
    const auto& data = require(dataset, "dataset").value;
    const sbr::Config c = config_or_empty(config);
    const auto tc = sbr::TrainConfig::from_config(c);
    sbr::TrainResult r = sbr::train(tc, data);
    if (loss_curve) {
      sbr::CsvTable t;
      t.header = {"step", "lr", "train_loss", "val_loss"};
      for (const auto& p : r.curve) {
        t.rows.push_back({std::to_string(p.step), sbr::format_number(p.lr),
                          sbr::format_number(p.train_loss),
                          p.val_loss ? sbr::format_number(*p.val_loss) : std::string()});
      }
      t.config_hash = c.hash();
      *loss_curve = make_report(t.to_csv());
    }
    *model = new sbr_model{std::move(r.model)};
  });
}

sbr_status sbr_evaluate(const sbr_model* model, const sbr_dataset* dataset,
                        const sbr_config* config, sbr_report** out) {
  return guarded([&] {
    require_out(out);
    const auto& m = require(model, "model").value;
    const auto& data = require(dataset, "dataset").value;
    const sbr::Config c = config_or_empty(config);
    const auto tc = train_config_for(m, c);
    const auto spec = sbr::routing_spec(tc);
    const auto idx = nonempty(split_indices(tc, data, c.get_string("split", "test")), "eval");
    const auto r = sbr::evaluate(m, data, idx, spec);
    const auto fc = sbr::flops_config(m.config, data.n_tokens());
    const auto load = sbr::route_load(m, data, idx, spec);
    double routed = 0.0;
    double dense = 0.0;
    for (const auto& counts : load.per_layer_counts) {
      const auto f = sbr::count_flops(fc, counts);
      routed += f.backbone_total;
      dense += f.dense_backbone_total;
    }
    sbr::CsvTable t;
    t.header = {"mode", "schedule", "n_samples", "rel_l2", "ratio_vs_dense"};
    t.rows.push_back({std::string(sbr::mode_name(spec.mode)),
                      std::string(sbr::shape_name(spec.schedule.shape())),
                      std::to_string(idx.size()), sbr::format_number(r.mean_rel_l2),
                      sbr::format_number(routed / dense)});
    t.config_hash = c.hash();
    *out = make_report(t.to_csv());
  });
}

sbr_status sbr_flops(const sbr_config* config, sbr_report** out) {
  return guarded([&] {
    require_out(out);
    const sbr::Config c = config_or_empty(config);
    const auto tc = sbr::TrainConfig::from_config(c);
    tc.model.validate();
    const auto n = static_cast<sbr::Index>(c.get_int("height", 32) * c.get_int("width", 32));
    const auto schedule = tc.make_schedule();
    const auto counts = sbr::active_counts(schedule, n);
    const auto f = sbr::count_flops(sbr::flops_config(tc.model, n), counts);
    sbr::CsvTable t;
    t.header = {"layer", "ratio", "active_tokens", "flops", "dense_flops"};
    const double dense_layer = f.dense_backbone_total / tc.model.depth;
    for (std::size_t l = 0; l < counts.size(); ++l) {
      t.rows.push_back({std::to_string(l + 1), sbr::format_number(schedule.ratios()[l]),
                        std::to_string(counts[l]), sbr::format_number(f.per_layer[l]),
                        sbr::format_number(dense_layer)});
    }
    t.rows.push_back({"backbone", "", "", sbr::format_number(f.backbone_total),
                      sbr::format_number(f.dense_backbone_total)});
    t.rows.push_back({"ratio_vs_dense", "", "", sbr::format_number(f.ratio_vs_dense), "1"});
    t.rows.push_back({"encoder_decoder", "", "", sbr::format_number(f.encoder_decoder_total), ""});
    t.rows.push_back({"router", "", "", sbr::format_number(f.router_total), ""});
    t.config_hash = c.hash();
    *out = make_report(t.to_csv());
  });
}

sbr_status sbr_bench(const sbr_model* model, const sbr_dataset* dataset,
                     const sbr_config* config, sbr_report** out) {
  return guarded([&] {
    require_out(out);
    const auto& m = require(model, "model").value;
    const auto& data = require(dataset, "dataset").value;
    const sbr::Config c = config_or_empty(config);
    const auto tc = train_config_for(m, c);
    auto idx = nonempty(split_indices(tc, data, c.get_string("split", "test")), "bench");
    idx.resize(std::min<std::size_t>(idx.size(), c.get_int("bench_samples", 10)));
    std::vector<sbr::MatD> inputs;
    for (std::size_t i : idx) inputs.push_back(data.samples[i].input.features);
    const auto b = sbr::bench_models(m, tc.make_schedule(), tc.gating, inputs,
                                     static_cast<int>(c.get_int("reps", 3)),
                                     static_cast<int>(c.get_int("threads", 1)));
    sbr::CsvTable t;
    t.header = {"mode", "samples_per_s", "std", "speedup"};
    t.rows.push_back({"dense", sbr::format_number(b.dense.samples_per_s),
                      sbr::format_number(b.dense.std), "1"});
    t.rows.push_back({"sbr", sbr::format_number(b.sbr.samples_per_s),
                      sbr::format_number(b.sbr.std), sbr::format_number(b.median_speedup)});
    t.config_hash = c.hash();
    *out = make_report(t.to_csv());
  });
}

sbr_status sbr_route_analyze(const sbr_model* model, const sbr_dataset* dataset,
                             const sbr_config* config, sbr_report** out) {
  return guarded([&] {
    require_out(out);
    const auto& m = require(model, "model").value;
    const auto& data = require(dataset, "dataset").value;
    const sbr::Config c = config_or_empty(config);
    auto tc = train_config_for(m, c);
    const auto idx = nonempty(split_indices(tc, data, c.get_string("split", "test")), "route-analyze");
    tc.routing = sbr::RoutingMode::kSbr;
    const auto routed = sbr::route_load(m, data, idx, sbr::routing_spec(tc));
    tc.routing = sbr::RoutingMode::kMor;
    const auto mor = sbr::route_load(m, data, idx, sbr::routing_spec(tc));
    tc.routing = sbr::RoutingMode::kRandom;
    const auto random = sbr::route_load(m, data, idx, sbr::routing_spec(tc));
    sbr::CsvTable t;
    t.header = {"layer", "sbr_count", "mor_mean", "mor_var", "random_mean", "random_var"};
    for (std::size_t l = 0; l < routed.mean_counts.size(); ++l) {
      t.rows.push_back({std::to_string(l + 1), sbr::format_number(routed.mean_counts[l]),
                        sbr::format_number(mor.mean_counts[l]), sbr::format_number(mor.variance[l]),
                        sbr::format_number(random.mean_counts[l]),
                        sbr::format_number(random.variance[l])});
    }
    tc.routing = sbr::RoutingMode::kSbr;
    t.config_hash = c.hash();
    *out = make_report(t.to_csv());
  });
}

sbr_status sbr_complexity(const sbr_dataset* dataset, const sbr_config* config, sbr_report** out) {
  return guarded([&] {
    require_out(out);
    const auto& data = require(dataset, "dataset").value;
    const sbr::Config c = config_or_empty(config);
    const auto tc = sbr::TrainConfig::from_config(c);
    const auto split = sbr::split_dataset(data.size(), tc.train_count(data.size()));
    const auto fallback = split.test.empty() ? 0 : static_cast<std::int64_t>(split.test.front());
    const auto index = c.get_int("sample", fallback);
    if (index < 0 || static_cast<std::size_t>(index) >= data.size()) {
      throw sbr::ParameterError("sample index out of range");
    }
    const auto& s = data.samples[static_cast<std::size_t>(index)];
    const sbr::MatD truth = sbr::denormalize_target(s.target.features, data);
    std::vector<double> values(static_cast<std::size_t>(truth.rows()));
    for (Eigen::Index i = 0; i < truth.rows(); ++i) values[i] = truth(i, 0);
    const auto scores = sbr::complexity_scores(values, s.target.coords,
                                               static_cast<int>(c.get_int("knn_k", 8)));
    const auto map = sbr::partition_regions(scores.scores, c.get_double("low_pct", 25.0),
                                            c.get_double("high_pct", 75.0));
    sbr::CsvTable t;
    t.header = {"index", "x", "y", "score", "region"};
    for (std::size_t i = 0; i < values.size(); ++i) {
      t.rows.push_back({std::to_string(i), sbr::format_number(s.target.coords(i, 0)),
                        sbr::format_number(s.target.coords(i, 1)),
                        sbr::format_number(scores.scores[i]),
                        std::string(sbr::region_name(map.region[i]))});
    }
    t.config_hash = c.hash();
    *out = make_report(t.to_csv());
  });
}

sbr_status sbr_experiment(const char* name, const sbr_dataset* dataset, const sbr_config* config,
                          sbr_report** out, sbr_report** extra) {
  return guarded([&] {
    require_out(out);
    if (extra) *extra = nullptr;
    const std::string which = &require(name, "name");
    const auto& data = require(dataset, "dataset").value;
    const sbr::Config c = config_or_empty(config);
    const auto tc = sbr::TrainConfig::from_config(c);
    sbr::ExperimentOptions opt;
    opt.bench_reps = static_cast<int>(c.get_int("reps", opt.bench_reps));
    opt.bench_samples = static_cast<std::size_t>(c.get_int("bench_samples", 10));
    opt.threads = static_cast<int>(c.get_int("threads", 1));
    sbr::ExperimentReport report;
    if (which == "compare-schedules") {
      report = sbr::run_schedule_comparison(tc, data, opt);
    } else if (which == "ablate-random") {
      report = sbr::run_ablation(tc, data, opt);
    } else if (which == "sweep-depth") {
      report = sbr::run_depth_sweep(tc, data, c.get_int_list("depths", {4, 6, 8}), opt);
    } else if (which == "compare-mor") {
      auto mor = sbr::run_mor_comparison(tc, data, opt);
      report = std::move(mor.report);
      if (extra) *extra = make_report(mor.load.to_csv());
    } else {
      throw sbr::ParameterError("unknown experiment '" + which + "'");
    }
    *out = make_report(report.table().to_csv());
  });
}

const char* sbr_report_csv(const sbr_report* report) { return report ? report->csv.c_str() : ""; }

void sbr_report_free(sbr_report* report) { delete report; }

}  // extern "C"
