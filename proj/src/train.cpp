// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

#include "sbr/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include "sbr/baselines.hpp"
#include "sbr/error.hpp"
#include "sbr/metrics.hpp"

namespace sbr {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t kValDraws = 1ULL << 40;
constexpr std::uint64_t kTestDraws = 1ULL << 41;

}  // namespace

std::string_view mode_name(RoutingMode mode) {
  switch (mode) {
    case RoutingMode::kSbr: return "sbr";
    case RoutingMode::kDense: return "dense";
    case RoutingMode::kRandom: return "random";
    case RoutingMode::kMor: return "mor";
  }
  return "sbr";
}

RoutingMode parse_mode(std::string_view name) {
  for (auto m : {RoutingMode::kSbr, RoutingMode::kDense, RoutingMode::kRandom, RoutingMode::kMor}) {
    if (mode_name(m) == name) return m;
  }
  throw ParameterError("unknown routing mode '" + std::string(name) +
                       "' (expected sbr, dense, random or mor)");
}

void TrainConfig::validate() const {
  model.validate();
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ParameterError("lr must be positive");
  if (steps < 0) throw ParameterError("train_steps must be >= 0");
  if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
  if (eval_every < 0) throw ParameterError("eval_every must be >= 0");
  if (!(schedule_lo > 0.0 && schedule_lo <= schedule_hi && schedule_hi <= 1.0)) {
    throw ParameterError("need 0 < schedule_lo <= schedule_hi <= 1");
  }
  (void)make_schedule();
}

std::size_t TrainConfig::train_count(std::size_t n_samples) const {
  if (n_train >= 0) return static_cast<std::size_t>(n_train);
  return static_cast<std::size_t>(default_train_count(static_cast<int>(n_samples)));
}

SparsitySchedule TrainConfig::make_schedule() const {
  return parse_schedule(schedule, model.depth, schedule_lo, schedule_hi);
}

Config TrainConfig::to_config() const {
  Config c;
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  c.set("dataset", dataset.string());
  c.set("depth", std::to_string(model.depth));
  c.set("dim", std::to_string(model.dim));
  c.set("ffn_dim", std::to_string(model.ffn_dim));
  c.set("n_heads", std::to_string(model.n_heads));
  c.set("schedule", schedule);
  c.set("schedule_lo", num(schedule_lo));
  c.set("schedule_hi", num(schedule_hi));
  c.set("routing", std::string(mode_name(routing)));
  c.set("n_train", std::to_string(n_train));
  c.set("lr", num(lr));
  c.set("train_steps", std::to_string(steps));
  c.set("batch_size", std::to_string(batch_size));
  c.set("grad_clip", num(grad_clip));
  c.set("eval_every", std::to_string(eval_every));
  c.set("seed", std::to_string(seed));
  c.set("gating", gating ? "true" : "false");
  c.set("out_dir", out_dir.string());
  return c;
}

TrainConfig TrainConfig::from_config(const Config& c) {
  TrainConfig t;
  t.dataset = c.get_string("dataset", "");
  t.model.depth = static_cast<int>(c.get_int("depth", t.model.depth));
  t.model.dim = static_cast<int>(c.get_int("dim", t.model.dim));
  t.model.ffn_dim = static_cast<int>(c.get_int("ffn_dim", t.model.ffn_dim));
  t.model.n_heads = static_cast<int>(c.get_int("n_heads", t.model.n_heads));
  t.schedule = c.get_string("schedule", t.schedule);
  if (c.has("ratios")) {
    if (c.has("schedule")) throw ParameterError("give either schedule or ratios, not both");
    t.schedule = c.get_string("ratios", "");
  }
  t.schedule_lo = c.get_double("schedule_lo", t.schedule_lo);
  t.schedule_hi = c.get_double("schedule_hi", t.schedule_hi);
  t.routing = parse_mode(c.get_string("routing", mode_name(t.routing)));
  t.n_train = static_cast<int>(c.get_int("n_train", t.n_train));
  t.lr = c.get_double("lr", t.lr);
  t.steps = static_cast<int>(c.get_int("train_steps", t.steps));
  t.batch_size = static_cast<int>(c.get_int("batch_size", t.batch_size));
  t.grad_clip = c.get_double("grad_clip", t.grad_clip);
  t.eval_every = static_cast<int>(c.get_int("eval_every", t.eval_every));
  const auto seed = c.get_int("seed", 0);
  if (seed < 0) throw ParameterError("seed must be >= 0");
  t.seed = static_cast<std::uint64_t>(seed);
  t.gating = c.get_bool("gating", t.gating);
  t.out_dir = c.get_string("out_dir", "");
  return t;
}

RoutingSpec routing_spec(const TrainConfig& config) {
  RoutingSpec s;
  s.mode = config.routing;
  s.schedule = config.routing == RoutingMode::kDense ? SparsitySchedule::dense(config.model.depth)
                                                     : config.make_schedule();
  s.gating = config.routing == RoutingMode::kSbr && config.gating;
  s.seed = config.seed;
  return s;
}

std::vector<IndexList> select_routes(const MatD& x_in, const OperatorModel& model,
                                     const RoutingSpec& spec, std::uint64_t draw) {
  const auto n = static_cast<Index>(x_in.rows());
  const auto counts = active_counts(spec.schedule, n);
  switch (spec.mode) {
    case RoutingMode::kDense: {
      IndexList all(static_cast<std::size_t>(n));
      std::iota(all.begin(), all.end(), 0);
      return std::vector<IndexList>(static_cast<std::size_t>(model.config.depth), all);
    }
    case RoutingMode::kSbr: {
      const auto plan = build_plan(rank_tokens(router_scores(x_in, model)), counts);
      std::vector<IndexList> routes;
      for (int l = 0; l < plan.depth(); ++l) routes.push_back(plan.packed_indices(l));
      return routes;
    }
    case RoutingMode::kRandom:
      return random_plan(n, counts, mix(spec.seed ^ mix(draw)));
    case RoutingMode::kMor: {
      const std::int64_t budget = std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
      return mor_plan(mor_assign(router_scores(x_in, model), budget, model.config.depth));
    }
  }
  throw ParameterError("select_routes: bad routing mode");
}

std::pair<MatD, ForwardTrace> forward_sample(const MatD& x_in, const OperatorModel& model,
                                             const RoutingSpec& spec, std::uint64_t draw,
                                             bool train_mode) {
  if (spec.schedule.depth() != model.config.depth) {
    throw ParameterError("schedule depth does not match model depth");
  }
  switch (spec.mode) {
    case RoutingMode::kSbr:
      return sbr_forward(x_in, model, spec.schedule, {spec.gating, train_mode});
    case RoutingMode::kDense:
    case RoutingMode::kRandom:
    case RoutingMode::kMor:
      return routed_forward(x_in, model, select_routes(x_in, model, spec, draw), train_mode);
  }
  throw ParameterError("forward_sample: bad routing mode");
}

DataSplit split_dataset(std::size_t n_samples, std::size_t n_train) {
  if (n_train == 0 || n_train > n_samples) {
    throw ParameterError("split: need 0 < n_train <= n_samples");
  }
  DataSplit s;
  const std::size_t n_val = n_train / 10;
  for (std::size_t i = 0; i < n_train - n_val; ++i) s.fit.push_back(i);
  for (std::size_t i = n_train - n_val; i < n_train; ++i) s.val.push_back(i);
  for (std::size_t i = n_train; i < n_samples; ++i) s.test.push_back(i);
  return s;
}

MatD denormalize_target(const MatD& target, const FieldDataset& data) {
  const auto in_dim = static_cast<std::size_t>(data.input_dim());
  MatD out = target;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    const auto& st = data.norm_stats.at(in_dim + static_cast<std::size_t>(c));
    out.col(c) = out.col(c).array() * st.std + st.mean;
  }
  return out;
}

double mean_loss(const OperatorModel& model, const FieldDataset& data,
                 const std::vector<std::size_t>& indices, const RoutingSpec& spec,
                 std::uint64_t draw_base) {
  if (indices.empty()) throw ParameterError("mean_loss: no samples");
  double sum = 0.0;
  for (std::size_t i : indices) {
    const auto& s = data.samples.at(i);
    const auto [pred, trace] = forward_sample(s.input.features, model, spec, draw_base + i, false);
    sum += rel_l2(pred, s.target.features);
  }
  return sum / static_cast<double>(indices.size());
}

EvalResult evaluate(const OperatorModel& model, const FieldDataset& data,
                    const std::vector<std::size_t>& indices, const RoutingSpec& spec) {
  if (indices.empty()) throw ParameterError("evaluate: no samples");
  EvalResult r;
  std::vector<MatD> truths;
  for (std::size_t i : indices) {
    const auto& s = data.samples.at(i);
    const auto [pred, trace] = forward_sample(s.input.features, model, spec, kTestDraws + i, false);
    r.predictions.push_back(denormalize_target(pred, data));
    truths.push_back(denormalize_target(s.target.features, data));
    r.per_sample.push_back(rel_l2(r.predictions.back(), truths.back()));
  }
  r.mean_rel_l2 = mean_rel_l2(r.predictions, truths);
  return r;
}

namespace {

struct Adam {
  std::vector<Eigen::ArrayXd> m, v;
  int t = 0;
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
};

}  // namespace

TrainResult train(const TrainConfig& config, const FieldDataset& data) {
  config.validate();
  if (data.size() == 0) throw DataError("train: dataset is empty");
  if (data.input_dim() != config.model.in_dim || data.output_dim() != config.model.out_dim) {
    throw DataError("train: dataset channels do not match the model");
  }
  const DataSplit split = split_dataset(data.size(), config.train_count(data.size()));
  const RoutingSpec spec = routing_spec(config);
  const bool train_router = config.routing == RoutingMode::kSbr;

  TrainResult result;
  OperatorModel model = init_model(config.model, config.seed);
  const auto eval_set = split.val.empty() ? split.fit : split.val;
  result.model = model;
  result.best_val = mean_loss(model, data, eval_set, spec, kValDraws);
  result.best_step = 0;
  if (config.steps == 0) {
    result.last_model = model;
    return result;
  }

  auto params = parameters(model);
  Adam adam;
  for (const auto& p : params) {
    adam.m.push_back(Eigen::ArrayXd::Zero(p.size));
    adam.v.push_back(Eigen::ArrayXd::Zero(p.size));
  }
  const int eval_every = config.eval_every > 0 ? config.eval_every : std::max(1, config.steps / 10);

  std::mt19937_64 rng(mix(config.seed ^ 0x5eedULL));
  std::vector<std::size_t> order = split.fit;
  std::size_t cursor = order.size();

  for (int step = 1; step <= config.steps; ++step) {
    ModelGrads grads = zero_model(config.model);
    double batch_loss = 0.0;
    for (int b = 0; b < config.batch_size; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const std::size_t idx = order[cursor++];
      const auto& s = data.samples[idx];
      const std::uint64_t draw = static_cast<std::uint64_t>(step) * 4096 + b;
      MatD pred;
      ForwardTrace trace;
      try {
        std::tie(pred, trace) = forward_sample(s.input.features, model, spec, draw, true);
      } catch (const NumericError& e) {
        throw NumericError("training diverged at step " + std::to_string(step) + ": " + e.what(),
                           e.layer());
      }
      const MatD diff = pred - s.target.features;
      const double err = diff.norm();
      const double denom = s.target.features.norm();
      if (!(denom > 0.0)) throw DataError("train: sample " + std::to_string(idx) + " has zero-norm target");
      const double loss = err / denom;
      if (!std::isfinite(loss)) {
        throw NumericError("training diverged: loss is not finite at step " + std::to_string(step),
                           0);
      }
      batch_loss += loss;
      if (err > 0.0) {
        const MatD d_out = diff / (err * denom * config.batch_size);
        ModelGrads g = backward(trace, model, d_out);
        auto gp = parameters(grads);
        auto sp = parameters(g);
        for (std::size_t j = 0; j < gp.size(); ++j) {
          Eigen::Map<Eigen::ArrayXd>(gp[j].data, gp[j].size) +=
              Eigen::Map<const Eigen::ArrayXd>(sp[j].data, sp[j].size);
        }
      }
    }
    batch_loss /= config.batch_size;

    auto gp = parameters(grads);
    double sq = 0.0;
    for (std::size_t j = 0; j < gp.size(); ++j) {
      if (!train_router && params[j].name == "router") continue;
      sq += Eigen::Map<Eigen::ArrayXd>(gp[j].data, gp[j].size).square().sum();
    }
    if (!std::isfinite(sq)) {
      throw NumericError("training diverged: gradient is not finite at step " + std::to_string(step),
                         0);
    }
    const double norm = std::sqrt(sq);
    const double scale = config.grad_clip > 0.0 && norm > config.grad_clip ? config.grad_clip / norm : 1.0;
    const double progress = static_cast<double>(step - 1) / config.steps;
    const double lr = 0.5 * config.lr * (1.0 + std::cos(std::numbers::pi * progress));

    ++adam.t;
    const double c1 = 1.0 - std::pow(Adam::kBeta1, adam.t);
    const double c2 = 1.0 - std::pow(Adam::kBeta2, adam.t);
    for (std::size_t j = 0; j < params.size(); ++j) {
      if (!train_router && params[j].name == "router") continue;
      Eigen::Map<Eigen::ArrayXd> w(params[j].data, params[j].size);
      const Eigen::ArrayXd g = Eigen::Map<Eigen::ArrayXd>(gp[j].data, gp[j].size) * scale;
      adam.m[j] = Adam::kBeta1 * adam.m[j] + (1.0 - Adam::kBeta1) * g;
      adam.v[j] = Adam::kBeta2 * adam.v[j] + (1.0 - Adam::kBeta2) * g.square();
      w -= lr * (adam.m[j] / c1) / ((adam.v[j] / c2).sqrt() + Adam::kEps);
    }

    LossPoint point{step, lr, batch_loss, std::nullopt};
    if (step % eval_every == 0 || step == config.steps) {
      const double val = mean_loss(model, data, eval_set, spec, kValDraws);
      if (!std::isfinite(val)) {
        throw NumericError("training diverged: validation loss is not finite at step " +
                               std::to_string(step),
                           0);
      }
      point.val_loss = val;
      if (val < result.best_val) {
        result.best_val = val;
        result.best_step = step;
        result.model = model;
      }
    }
    result.curve.push_back(point);
  }
  result.last_model = model;
  return result;
}

TrainResult train(const TrainConfig& config) {
  const FieldDataset data = read_dataset(config.dataset);
  TrainResult r = train(config, data);
  if (!config.out_dir.empty()) {
    std::filesystem::create_directories(config.out_dir);
    save_model(r.model, config.out_dir / "model.bin");
    std::ofstream out(config.out_dir / "loss.csv");
    if (!out) throw IoError("cannot write " + (config.out_dir / "loss.csv").string());
    out << "step,lr,train_loss,val_loss\n";
    char buf[128];
    for (const auto& p : r.curve) {
      std::snprintf(buf, sizeof buf, "%d,%.10g,%.17g,", p.step, p.lr, p.train_loss);
      out << buf;
      if (p.val_loss) {
        std::snprintf(buf, sizeof buf, "%.17g", *p.val_loss);
        out << buf;
      }
      out << '\n';
    }
    out << "# config_hash=" << config.to_config().hash() << '\n';
  }
  return r;
}

}  // namespace sbr
