// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "sbr/error.hpp"
#include "sbr/experiments.hpp"
#include "sbr/train.hpp"

namespace sbr {
namespace {

const FieldDataset& tiny_data() {
  static const FieldDataset data = [] {
    GenParams p;
    p.height = 8;
    p.width = 8;
    p.steps = 10;
    p.length_scale = 1.5;
    p.n_samples = 20;
    p.seed = 4;
    return generate_dataset(p);
  }();
  return data;
}

TrainConfig tiny_config(RoutingMode mode = RoutingMode::kSbr) {
  TrainConfig c;
  c.model = ModelConfig{3, 8, 16, 2, 3, 1};
  c.routing = mode;
  c.steps = 12;
  c.batch_size = 2;
  c.lr = 3e-3;
  c.seed = 1;
  return c;
}

bool same_weights(OperatorModel a, OperatorModel b) {
  const auto pa = parameters(a);
  const auto pb = parameters(b);
  for (std::size_t i = 0; i < pa.size(); ++i) {
    for (std::size_t j = 0; j < pa[i].size; ++j) {
      if (pa[i].data[j] != pb[i].data[j]) return false;
    }
  }
  return true;
}

TEST(Config, ParseNormalizeAndHash) {
  const Config a = Config::parse("# comment\nlr = 0.01\nTrain-Steps = 5\n\nschedule = \"constant\"\n");
  EXPECT_EQ(a.get_double("lr", 0), 0.01);
  EXPECT_EQ(a.get_int("train_steps", 0), 5);
  EXPECT_EQ(a.get_string("schedule", ""), "constant");
  const Config b = Config::parse("schedule=constant\ntrain_steps=5\nlr=0.01\n");
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 16u);
  Config c = b;
  c.set("lr", "0.02");
  EXPECT_NE(c.hash(), b.hash());
  EXPECT_EQ(Config::parse("depths = [2, 4,6]").get_int_list("depths", {}), (std::vector<int>{2, 4, 6}));
}

TEST(Config, Errors) {
  EXPECT_THROW(Config::parse("bogus = 1"), ParameterError);
  EXPECT_THROW(Config::parse("no equals sign"), ParameterError);
  EXPECT_THROW(Config::parse("lr = abc").get_double("lr", 0), ParameterError);
  EXPECT_THROW(Config::parse("gating = maybe").get_bool("gating", false), ParameterError);
  EXPECT_THROW(Config::load("/nonexistent/cfg.txt"), IoError);
  EXPECT_THROW(TrainConfig::from_config(Config::parse("schedule = constant\nratios = 1,1,1")),
               ParameterError);
}

TEST(TrainConfig, RoundTripsThroughConfig) {
  TrainConfig c = tiny_config(RoutingMode::kMor);
  c.schedule = "mid-heavy";
  c.schedule_lo = 0.3;
  const TrainConfig back = TrainConfig::from_config(c.to_config());
  EXPECT_EQ(back.to_config().hash(), c.to_config().hash());
  EXPECT_EQ(back.routing, RoutingMode::kMor);
  EXPECT_EQ(back.model, c.model);
}

TEST(Split, Layout) {
  const auto s = split_dataset(250, 200);
  EXPECT_EQ(s.fit.size(), 180u);
  EXPECT_EQ(s.val.size(), 20u);
  EXPECT_EQ(s.test.size(), 50u);
  EXPECT_EQ(s.test.front(), 200u);
  EXPECT_THROW(split_dataset(10, 11), ParameterError);
}

TEST(Train, ZeroStepsReturnsInitialModel) {
  TrainConfig c = tiny_config();
  c.steps = 0;
  const auto r = train(c, tiny_data());
  EXPECT_TRUE(same_weights(r.model, init_model(c.model, c.seed)));
  EXPECT_TRUE(r.curve.empty());
}

TEST(Train, DeterministicForFixedSeed) {
  const auto a = train(tiny_config(), tiny_data());
  const auto b = train(tiny_config(), tiny_data());
  ASSERT_EQ(a.curve.size(), b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    EXPECT_EQ(a.curve[i].train_loss, b.curve[i].train_loss);
    EXPECT_EQ(a.curve[i].val_loss, b.curve[i].val_loss);
  }
  EXPECT_TRUE(same_weights(a.last_model, b.last_model));
}

TEST(Train, LossDecreases) {
  TrainConfig c = tiny_config(RoutingMode::kDense);
  c.steps = 80;
  c.lr = 1e-2;
  const auto r = train(c, tiny_data());
  const auto split = split_dataset(tiny_data().size(), c.train_count(tiny_data().size()));
  const auto spec = routing_spec(c);
  const double before = mean_loss(init_model(c.model, c.seed), tiny_data(), split.fit, spec, 0);
  const double after = mean_loss(r.last_model, tiny_data(), split.fit, spec, 0);
  EXPECT_LT(after, 0.8 * before);
}

TEST(Train, RouterFrozenOutsideRankedMode) {
  for (auto mode : {RoutingMode::kDense, RoutingMode::kRandom, RoutingMode::kMor}) {
    const TrainConfig c = tiny_config(mode);
    const auto r = train(c, tiny_data());
    EXPECT_EQ(r.last_model.router, init_model(c.model, c.seed).router) << mode_name(mode);
    EXPECT_FALSE(same_weights(r.last_model, init_model(c.model, c.seed)));
  }
  const TrainConfig c = tiny_config(RoutingMode::kSbr);
  EXPECT_NE(train(c, tiny_data()).last_model.router, init_model(c.model, c.seed).router);
}

TEST(Train, DivergenceIsReported) {
  TrainConfig c = tiny_config(RoutingMode::kDense);
  c.lr = 1e250;
  c.grad_clip = 0.0;
  c.steps = 50;
  try {
    train(c, tiny_data());
    FAIL() << "expected divergence";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("diverged"), std::string::npos) << e.what();
  }
}

TEST(Train, WritesArtifacts) {
  const auto dir = std::filesystem::temp_directory_path() / "sbr_harness_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  write_dataset(tiny_data(), dir / "data.bin");
  TrainConfig c = tiny_config();
  c.dataset = dir / "data.bin";
  c.out_dir = dir / "run";
  const auto r = train(c);
  EXPECT_TRUE(same_weights(load_model(dir / "run" / "model.bin"), r.model));
  std::ifstream in(dir / "run" / "loss.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "step,lr,train_loss,val_loss");
  std::filesystem::remove_all(dir);
}

TEST(Evaluate, ReportsPhysicalUnits) {
  const TrainConfig c = tiny_config(RoutingMode::kDense);
  const OperatorModel m = init_model(c.model, 0);
  const auto idx = std::vector<std::size_t>{16, 17};
  const auto e = evaluate(m, tiny_data(), idx, routing_spec(c));
  ASSERT_EQ(e.per_sample.size(), 2u);
  EXPECT_DOUBLE_EQ(e.mean_rel_l2, 0.5 * (e.per_sample[0] + e.per_sample[1]));
  // Predictions come back de-normalized, so undoing the target transform is
  // the identity on a target.
  const MatD& t = tiny_data().samples[16].target.features;
  const auto& st = tiny_data().norm_stats[3];
  EXPECT_NEAR(denormalize_target(t, tiny_data())(0, 0), t(0, 0) * st.std + st.mean, 1e-12);
}

TEST(Experiments, ScheduleComparisonRows) {
  const ExperimentOptions opt{3, 2, 1};
  const auto rep = run_schedule_comparison(tiny_config(), tiny_data(), opt);
  ASSERT_EQ(rep.rows.size(), 5u);
  EXPECT_EQ(rep.rows[0].mode, "dense");
  EXPECT_EQ(rep.rows[0].ratio_vs_dense, 1.0);
  std::set<std::string> shapes;
  for (std::size_t i = 1; i < 5; ++i) {
    shapes.insert(rep.rows[i].schedule);
    EXPECT_EQ(rep.rows[i].token_budget, rep.rows[1].token_budget);
    EXPECT_LT(rep.rows[i].ratio_vs_dense, 1.0);
    EXPECT_GT(rep.rows[i].throughput, 0.0);
  }
  EXPECT_EQ(shapes.size(), 4u);
  EXPECT_TRUE(shapes.count("constant"));
  const std::string csv = rep.table().to_csv();
  EXPECT_NE(csv.find("# config_hash=" + rep.config_hash), std::string::npos);
  EXPECT_EQ(csv.back(), '\n');
}

TEST(Experiments, AblationMatchesCompute) {
  const auto rep = run_ablation(tiny_config(), tiny_data(), {3, 2, 1});
  ASSERT_EQ(rep.rows.size(), 2u);
  EXPECT_EQ(rep.rows[0].backbone_flops, rep.rows[1].backbone_flops);
  EXPECT_EQ(rep.rows[0].token_budget, rep.rows[1].token_budget);
  ASSERT_TRUE(rep.rows[1].degradation_pct.has_value());
  EXPECT_NEAR(*rep.rows[1].degradation_pct,
              100.0 * (rep.rows[1].rel_l2 - rep.rows[0].rel_l2) / rep.rows[0].rel_l2, 1e-12);
}

TEST(Experiments, MorComparisonLoad) {
  const auto out = run_mor_comparison(tiny_config(), tiny_data(), {3, 2, 1});
  ASSERT_EQ(out.report.rows.size(), 2u);
  EXPECT_EQ(out.report.rows[0].avg_load_variance, 0.0);
  EXPECT_EQ(out.report.rows[0].token_budget, out.report.rows[1].token_budget);
  EXPECT_EQ(out.load.rows.size(), 3u);
  EXPECT_EQ(out.load.header.front(), "layer");
}

TEST(Experiments, DepthSweepRows) {
  const auto rep = run_depth_sweep(tiny_config(), tiny_data(), {2, 3}, {3, 2, 1});
  ASSERT_EQ(rep.rows.size(), 4u);
  EXPECT_EQ(rep.rows[0].depth, 2);
  EXPECT_EQ(rep.rows[2].depth, 3);
  EXPECT_EQ(*rep.rows[0].speedup, 1.0);
  EXPECT_GT(*rep.rows[1].speedup, 0.0);
  EXPECT_THROW(run_depth_sweep(tiny_config(), tiny_data(), {1}), ParameterError);
}

TEST(Csv, TrailingHash) {
  CsvTable t{{"a", "b"}, {{"1", "2"}}, "0123456789abcdef"};
  EXPECT_EQ(t.to_csv(), "a,b\n1,2\n# config_hash=0123456789abcdef\n");
}

}  // namespace
}  // namespace sbr
