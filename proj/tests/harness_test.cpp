// Copyright 2026 The lpac-coverage Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "lpac/harness.hpp"

namespace lpac {
namespace {

namespace fs = std::filesystem;

EpisodeConfig small(Controller c, int horizon = 60) {
  EpisodeConfig e;
  e.world.side_length = 128;
  e.world.n_robots = 4;
  e.world.sensor_side = 16;
  e.world.comm_range = 48;
  e.world.seed = 21;
  e.n_features = 4;
  e.controller = c;
  e.horizon = horizon;
  return e;
}

TEST(Controller, Names) {
  for (auto c : {Controller::kClairvoyant, Controller::kCentralizedCvt, Controller::kDecentralizedCvt, Controller::kLpac})
    EXPECT_EQ(parse_controller(controller_name(c)), c);
  EXPECT_EQ(controller_name(Controller::kCentralizedCvt), "c-cvt");
  EXPECT_THROW(parse_controller("lloyd"), ValidationError);
  EXPECT_THROW(cvt_kind(Controller::kLpac), ValidationError);
}

TEST(Environment, DeterministicPerEnvId) {
  const auto e = small(Controller::kClairvoyant);
  const auto a = make_environment(e.world, 4, 3), b = make_environment(e.world, 4, 3), c = make_environment(e.world, 4, 4);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.initial, b.initial);
  EXPECT_NE(a.features, c.features);
  EXPECT_NE(a.initial, c.initial);
}

TEST(Environment, ExplicitFeaturesKeepRobotPlacement) {
  const auto e = small(Controller::kClairvoyant);
  const auto a = make_environment(e.world, 4, 3);
  const auto b = make_environment(e.world, 4, 3, std::vector<FeatureSpec>{{{64, 64}, 50, 8}});
  EXPECT_EQ(a.initial, b.initial);
  EXPECT_EQ(b.features.size(), 1u);
}

TEST(Episode, SeriesShapeAndAnchor) {
  for (auto c : {Controller::kClairvoyant, Controller::kCentralizedCvt, Controller::kDecentralizedCvt}) {
    const auto r = run_episode(small(c));
    ASSERT_EQ(r.metrics.size(), 61u);
    EXPECT_EQ(r.metrics.front().normalized_cost, 1.0);
    for (int t = 0; t <= 60; ++t) EXPECT_EQ(r.metrics[t].step, t);
    EXPECT_EQ(r.metrics.back().controller, controller_name(c));
  }
}

TEST(Episode, CostMatchesWorld) {
  auto cfg = small(Controller::kClairvoyant, 0);
  const auto r = run_episode(cfg);
  const auto env = make_environment(cfg.world, cfg.n_features, cfg.env_id);
  auto w = make_world(cfg.world, env.idf, env.initial);
  EXPECT_EQ(r.metrics[0].cost, global_cost(w));
  EXPECT_EQ(r.metrics[0].observed_area_pct, w.observed_area_pct());
}

TEST(Episode, ClairvoyantCostNonIncreasing) {
  const auto r = run_episode(small(Controller::kClairvoyant, 200));
  for (std::size_t t = 1; t < r.metrics.size(); ++t)
    ASSERT_LE(r.metrics[t].cost, r.metrics[t - 1].cost * (1 + 1e-9)) << t;
}

TEST(Episode, ConvergenceHoldsSeriesFlat) {
  auto cfg = small(Controller::kClairvoyant, 900);
  const auto r = run_episode(cfg);
  ASSERT_TRUE(r.converged);
  ASSERT_LT(r.steps_executed, 900);
  for (int t = r.steps_executed; t <= 900; ++t) EXPECT_EQ(r.metrics[t].cost, r.metrics[r.steps_executed].cost);
}

TEST(Episode, DeterministicAndNoiseIsolated) {
  auto cfg = small(Controller::kDecentralizedCvt);
  cfg.noise_sigma = 5.0;
  const auto a = run_episode(cfg), b = run_episode(cfg);
  std::ostringstream sa, sb;
  write_metrics(sa, a.metrics);
  write_metrics(sb, b.metrics);
  EXPECT_EQ(sa.str(), sb.str());
  cfg.noise_sigma = 0.0;
  std::ostringstream sc;
  write_metrics(sc, run_episode(cfg).metrics);
  EXPECT_NE(sa.str(), sc.str());
}

TEST(Episode, LpacNeedsWeights) {
  EXPECT_THROW(run_episode(small(Controller::kLpac)), ValidationError);
  auto cfg = small(Controller::kLpac, 3);
  cfg.weights_path = "/nonexistent/weights.bin";
  EXPECT_THROW(run_episode(cfg), Error);
}

TEST(Episode, LpacRecordsMessages) {
  auto cfg = small(Controller::kLpac, 3);
  Architecture a;
  a.layers = 2;
  a.hidden = 16;
  a.channel = 8;
  a.window = 32;
  cfg.weights = std::make_shared<const PolicyWeights>(PolicyWeights::random(a, 1));
  cfg.record_messages = true;
  cfg.record_trajectory = true;
  const auto r = run_episode(cfg);
  EXPECT_EQ(r.steps_executed, 3);
  EXPECT_EQ(r.trajectory.size(), 4u);
  ASSERT_EQ(r.degrees.size(), 3u);
  std::size_t expected = 0;
  for (const auto& d : r.degrees)
    for (int v : d) expected += v > 0 ? 2 * 3 : 0;
  EXPECT_EQ(r.messages.size(), expected);
}

TEST(Episode, ZeroWeightLpacHoldsCost) {
  auto cfg = small(Controller::kLpac, 5);
  Architecture a;
  a.layers = 1;
  a.hidden = 8;
  a.channel = 8;
  a.window = 32;
  cfg.weights = std::make_shared<const PolicyWeights>(PolicyWeights::zeros(a));
  for (const auto& row : run_episode(cfg).metrics) EXPECT_EQ(row.normalized_cost, 1.0);
}

TEST(Episode, ObservedAreaNonDecreasing) {
  for (auto c : {Controller::kClairvoyant, Controller::kCentralizedCvt, Controller::kDecentralizedCvt}) {
    auto cfg = small(c, 80);
    cfg.noise_sigma = 3.0;
    const auto r = run_episode(cfg);
    for (std::size_t t = 1; t < r.metrics.size(); ++t)
      ASSERT_GE(r.metrics[t].observed_area_pct, r.metrics[t - 1].observed_area_pct);
  }
}

TEST(Episode, TrajectoryJson) {
  auto cfg = small(Controller::kClairvoyant, 2);
  cfg.record_trajectory = true;
  const auto r = run_episode(cfg);
  const fs::path p = fs::temp_directory_path() / "lpac_traj_test.json";
  write_trajectory_json(p, r);
  std::ifstream in(p);
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j["trajectory"].size(), r.trajectory.size());
  EXPECT_EQ(j["trajectory"][0][1][0].get<double>(), r.trajectory[0][1].x);
  fs::remove(p);
}

TEST(Dataset, CaptureCounts) {
  DatasetConfig cfg;
  cfg.world = small(Controller::kClairvoyant).world;
  cfg.n_features = 4;
  cfg.n_episodes = 2;
  cfg.max_iterations = 300;
  cfg.perception = {64, 8};
  const fs::path p = fs::temp_directory_path() / "lpac_dataset_test.bin";
  const auto report = generate_dataset(cfg, p);
  std::uint64_t expected = 0;
  for (const auto& e : report.episodes) {
    EXPECT_EQ(e.regular_samples, static_cast<std::size_t>(e.steps / 5));
    EXPECT_EQ(e.extra_samples, e.converged ? 1u : 0u);
    expected += e.regular_samples + e.extra_samples;
  }
  EXPECT_EQ(report.n_samples, expected);
  const auto [h, samples] = read_dataset(p);
  EXPECT_EQ(h.n_samples, expected);
  EXPECT_EQ(h.n_robots, 4u);
  EXPECT_EQ(h.channel, 8u);
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < 4; ++i) {
      const double vx = s.targets[2 * i], vy = s.targets[2 * i + 1];
      EXPECT_LE(std::hypot(vx, vy), 5.0 + 1e-5);
      EXPECT_FLOAT_EQ(s.normalized_positions[2 * i], s.positions[2 * i] / 128.0f);
    }
    for (const auto& [a, b] : s.edges) EXPECT_LT(a, b);
  }
  fs::remove(p);
}

TEST(Dataset, NonConvergedEpisodeHasNoExtra) {
  DatasetConfig cfg;
  cfg.world = small(Controller::kClairvoyant).world;
  cfg.n_features = 4;
  cfg.max_iterations = 12;
  cfg.perception = {64, 8};
  const fs::path p = fs::temp_directory_path() / "lpac_dataset_test2.bin";
  const auto r = generate_dataset(cfg, p);
  ASSERT_FALSE(r.episodes[0].converged);
  EXPECT_EQ(r.n_samples, 2u);
  const auto [h, samples] = read_dataset(p);
  EXPECT_EQ(samples[0].step, 5u);
  EXPECT_EQ(samples[1].step, 10u);
  fs::remove(p);
}

BatchConfig batch(std::vector<Controller> cs, int threads = 1) {
  BatchConfig b;
  b.base = small(Controller::kClairvoyant, 40);
  b.controllers = std::move(cs);
  b.n_envs = 3;
  b.threads = threads;
  return b;
}

TEST(Batch, AddingControllerDoesNotPerturbOthers) {
  const auto a = evaluate_batch(batch({Controller::kDecentralizedCvt}));
  const auto b = evaluate_batch(batch({Controller::kClairvoyant, Controller::kDecentralizedCvt}));
  EXPECT_EQ(a.find(Controller::kDecentralizedCvt)->per_env, b.find(Controller::kDecentralizedCvt)->per_env);
}

TEST(Batch, ThreadCountDoesNotMatter) {
  const auto a = evaluate_batch(batch({Controller::kClairvoyant, Controller::kCentralizedCvt}, 1));
  const auto b = evaluate_batch(batch({Controller::kClairvoyant, Controller::kCentralizedCvt}, 3));
  for (std::size_t i = 0; i < a.series.size(); ++i) EXPECT_EQ(a.series[i].per_env, b.series[i].per_env);
}

TEST(Batch, StatisticsAndRatios) {
  const auto s = evaluate_batch(batch({Controller::kClairvoyant, Controller::kDecentralizedCvt}));
  const auto* cv = s.find(Controller::kClairvoyant);
  const auto* dc = s.find(Controller::kDecentralizedCvt);
  ASSERT_TRUE(cv && dc);
  const int t = 40;
  double mean = 0;
  for (const auto& e : cv->per_env) mean += e[t];
  mean /= 3;
  EXPECT_DOUBLE_EQ(cv->mean[t], mean);
  EXPECT_EQ(cv->mean[0], 1.0);
  EXPECT_EQ(cv->best_count[0], 0);
  EXPECT_DOUBLE_EQ(*s.improvement_vs_dcvt(Controller::kClairvoyant, t), (dc->mean[t] - cv->mean[t]) / dc->mean[t] * 100);
  EXPECT_DOUBLE_EQ(*s.ratio_vs_clairvoyant(Controller::kDecentralizedCvt, t), dc->mean[t] / cv->mean[t]);
  for (int step = 1; step <= 40; ++step) EXPECT_GE(cv->best_count[step] + dc->best_count[step], 3);
  EXPECT_FALSE(s.ratio_vs_clairvoyant(Controller::kLpac, t).has_value());
  for (int step = 0; step <= 40; ++step) {
    EXPECT_EQ(*s.improvement_vs_dcvt(Controller::kDecentralizedCvt, step), 0.0);
    EXPECT_EQ(*s.ratio_vs_clairvoyant(Controller::kClairvoyant, step), 1.0);
  }
}

TEST(Batch, RejectsEmpty) {
  EXPECT_THROW(evaluate_batch(batch({})), ValidationError);
  auto b = batch({Controller::kClairvoyant});
  b.n_envs = 0;
  EXPECT_THROW(evaluate_batch(b), ValidationError);
}

TEST(Batch, SummaryCsv) {
  const auto s = evaluate_batch(batch({Controller::kClairvoyant}));
  std::ostringstream out;
  write_summary_csv(out, s);
  std::istringstream in(out.str());
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 1 + 41);
}

TEST(Sweep, OnePointPerValue) {
  auto b = batch({Controller::kDecentralizedCvt});
  b.base.horizon = 5;
  const auto pts = comm_range_sweep(b, {16, 64});
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_EQ(pts[1].value, 64.0);
  std::ostringstream out;
  write_sweep_csv(out, "comm_range", pts);
  EXPECT_NE(out.str().find("64,d-cvt,"), std::string::npos);
  EXPECT_EQ(noise_sweep(b).size(), 4u);
}

}  // namespace
}  // namespace lpac
