// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sbr/sbr.h"

namespace {

class CliError : public std::runtime_error {
 public:
  CliError(sbr_status status, const std::string& what)
      : std::runtime_error(what), status_(status) {}
  sbr_status status() const { return status_; }

 private:
  sbr_status status_;
};

void check(sbr_status s) {
  if (s != SBR_OK) throw CliError(s, std::string(sbr_status_name(s)) + ": " + sbr_last_error());
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using ConfigPtr = std::unique_ptr<sbr_config, Deleter<sbr_config, sbr_config_free>>;
using DatasetPtr = std::unique_ptr<sbr_dataset, Deleter<sbr_dataset, sbr_dataset_free>>;
using ModelPtr = std::unique_ptr<sbr_model, Deleter<sbr_model, sbr_model_free>>;
using ReportPtr = std::unique_ptr<sbr_report, Deleter<sbr_report, sbr_report_free>>;

// Builds the effective config: file first, then every --key value pair.
ConfigPtr build_config(const std::string& path, const std::vector<std::string>& extras) {
  sbr_config* raw = nullptr;
  check(path.empty() ? sbr_config_new(&raw) : sbr_config_load(path.c_str(), &raw));
  ConfigPtr cfg(raw);
  for (std::size_t i = 0; i < extras.size(); ++i) {
    std::string arg = extras[i];
    if (arg.rfind("--", 0) != 0) throw CliError(SBR_ERR_PARAM, "unexpected argument '" + arg + "'");
    arg = arg.substr(2);
    std::string value;
    if (auto eq = arg.find('='); eq != std::string::npos) {
      value = arg.substr(eq + 1);
      arg = arg.substr(0, eq);
    } else if (i + 1 < extras.size()) {
      value = extras[++i];
    } else {
      throw CliError(SBR_ERR_PARAM, "missing value for --" + arg);
    }
    check(sbr_config_set(cfg.get(), arg.c_str(), value.c_str()));
  }
  return cfg;
}

std::string get(const sbr_config* cfg, const char* key) {
  const char* v = nullptr;
  check(sbr_config_get(cfg, key, &v));
  return v ? v : "";
}

std::string require_key(const sbr_config* cfg, const char* key) {
  std::string v = get(cfg, key);
  if (v.empty()) throw CliError(SBR_ERR_PARAM, std::string("missing required --") + key);
  return v;
}

DatasetPtr open_dataset(const sbr_config* cfg) {
  sbr_dataset* raw = nullptr;
  check(sbr_dataset_read(require_key(cfg, "dataset").c_str(), &raw));
  return DatasetPtr(raw);
}

// The checkpoint named by --model, or a freshly initialized model.
ModelPtr open_model(const sbr_config* cfg) {
  sbr_model* raw = nullptr;
  const std::string path = get(cfg, "model");
  check(path.empty() ? sbr_model_init(cfg, &raw) : sbr_model_load(path.c_str(), &raw));
  return ModelPtr(raw);
}

void make_parent(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(parent, ec);
  if (ec) throw CliError(SBR_ERR_IO, "cannot create " + parent.string());
}

void emit(const sbr_report* report, const std::string& path) {
  const char* csv = sbr_report_csv(report);
  if (path.empty()) {
    std::fputs(csv, stdout);
    return;
  }
  make_parent(path);
  std::ofstream out(path);
  if (!out) throw CliError(SBR_ERR_IO, "cannot write " + path);
  out << csv;
}

ReportPtr take(sbr_report* r) { return ReportPtr(r); }

int run(const std::string& command, const sbr_config* cfg) {
  const std::string out = get(cfg, "out");
  sbr_report* report = nullptr;
  if (command == "gen-data") {
    sbr_dataset* raw = nullptr;
    check(sbr_dataset_generate(cfg, &raw));
    DatasetPtr ds(raw);
    make_parent(require_key(cfg, "out"));
    check(sbr_dataset_write(ds.get(), out.c_str()));
    sbr_dataset_info info{};
    check(sbr_dataset_info_get(ds.get(), &info));
    std::printf("wrote %zu samples of %d tokens to %s\n", info.n_samples, info.n_tokens,
                out.c_str());
    return 0;
  }
  if (command == "train") {
    auto ds = open_dataset(cfg);
    sbr_model* raw = nullptr;
    check(sbr_train(cfg, ds.get(), &raw, &report));
    ModelPtr model(raw);
    auto curve = take(report);
    const std::string dir = get(cfg, "out_dir");
    if (!dir.empty()) {
      std::error_code ec;
      std::filesystem::create_directories(dir, ec);
      if (ec) throw CliError(SBR_ERR_IO, "cannot create " + dir);
      check(sbr_model_save(model.get(), (dir + "/model.bin").c_str()));
      emit(curve.get(), dir + "/loss.csv");
    } else {
      emit(curve.get(), out);
    }
    return 0;
  }
  if (command == "eval") {
    auto ds = open_dataset(cfg);
    auto model = open_model(cfg);
    check(sbr_evaluate(model.get(), ds.get(), cfg, &report));
  } else if (command == "flops") {
    check(sbr_flops(cfg, &report));
  } else if (command == "bench") {
    auto ds = open_dataset(cfg);
    auto model = open_model(cfg);
    check(sbr_bench(model.get(), ds.get(), cfg, &report));
  } else if (command == "route-analyze") {
    auto ds = open_dataset(cfg);
    auto model = open_model(cfg);
    check(sbr_route_analyze(model.get(), ds.get(), cfg, &report));
  } else if (command == "complexity") {
    auto ds = open_dataset(cfg);
    check(sbr_complexity(ds.get(), cfg, &report));
  } else {
    auto ds = open_dataset(cfg);
    sbr_report* extra = nullptr;
    check(sbr_experiment(command.c_str(), ds.get(), cfg, &report, &extra));
    auto load = take(extra);
    if (load) {
      auto main_report = take(report);
      emit(main_report.get(), out);
      if (out.empty()) std::fputs("\n", stdout);
      emit(load.get(), out.empty() ? std::string() : out + ".load.csv");
      return 0;
    }
  }
  auto r = take(report);
  emit(r.get(), out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Static budgeted token routing for transformer field operators"};
  app.require_subcommand(1);
  app.set_version_flag("--version", sbr_version());

  struct Command {
    const char* name;
    const char* help;
  };
  const std::vector<Command> commands = {
      {"gen-data", "generate a Heat2D dataset (--out path)"},
      {"train", "train a model (--dataset, --routing, --out-dir)"},
      {"eval", "mean relative L2 on the test split (--dataset, --model)"},
      {"flops", "analytic backbone FLOPs for a schedule"},
      {"bench", "single-precision throughput, dense versus routed"},
      {"route-analyze", "per-layer load statistics for each routing mode"},
      {"complexity", "local-gradient complexity map of one target field"},
      {"compare-schedules", "train and compare the four schedule shapes"},
      {"ablate-random", "router ranking versus random selection"},
      {"compare-mor", "router ranking versus exit-layer routing"},
      {"sweep-depth", "dense and routed models across depths (--depths 4,6,8)"},
  };
  std::string config_path;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->allow_extras();
    sub->add_option("-c,--config", config_path, "key = value config file");
    sub->footer("Any config key can be given as --key value; it overrides the file.");
  }
  CLI11_PARSE(app, argc, argv);

  try {
    for (auto* sub : app.get_subcommands()) {
      auto cfg = build_config(config_path, sub->remaining());
      return run(sub->get_name(), cfg.get());
    }
  } catch (const CliError& e) {
    std::fprintf(stderr, "sbr: %s\n", e.what());
    return 1 + static_cast<int>(e.status());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "sbr: %s\n", e.what());
    return 1 + SBR_ERR_INTERNAL;
  }
  return 0;
}
