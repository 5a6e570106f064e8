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
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpac/action.hpp"
#include "lpac/cvt.hpp"
#include "lpac/errors.hpp"
#include "lpac/io.hpp"
#include "lpac/perception.hpp"
#include "lpac/voronoi.hpp"
#include "lpac/world.hpp"

namespace lpac {

enum class Controller { kClairvoyant, kCentralizedCvt, kDecentralizedCvt, kLpac };

inline std::string_view controller_name(Controller c) {
  switch (c) {
    case Controller::kClairvoyant: return "clairvoyant";
    case Controller::kCentralizedCvt: return "c-cvt";
    case Controller::kDecentralizedCvt: return "d-cvt";
    case Controller::kLpac: return "lpac";
  }
  return "unknown";
}

inline Controller parse_controller(std::string_view s) {
  for (Controller c : {Controller::kClairvoyant, Controller::kCentralizedCvt, Controller::kDecentralizedCvt,
                       Controller::kLpac})
    if (controller_name(c) == s) return c;
  throw ValidationError("invalid controller name '" + std::string(s) + "'");
}

inline bool is_cvt(Controller c) noexcept { return c != Controller::kLpac; }

inline CvtKind cvt_kind(Controller c) {
  switch (c) {
    case Controller::kClairvoyant: return CvtKind::kClairvoyant;
    case Controller::kCentralizedCvt: return CvtKind::kCentralized;
    case Controller::kDecentralizedCvt: return CvtKind::kDecentralized;
    default: throw ValidationError("not a CVT controller");
  }
}

/// Features, field and initial robot positions of one seeded environment.
struct Environment {
  std::vector<FeatureSpec> features;
  std::shared_ptr<const ImportanceField> idf;
  std::vector<Vec2> initial;
};

/// Environment \p env_id of the run seeded by params.seed. Feature placement
/// and robot placement come from separate substreams keyed by env_id, so
/// every controller evaluated on env_id sees the same world.
inline Environment make_environment(const WorldParams& params, int n_features, std::uint64_t env_id,
                                    std::optional<std::vector<FeatureSpec>> features = std::nullopt) {
  params.validate();
  Environment env;
  if (features) {
    env.features = std::move(*features);
  } else {
    Rng feature_rng(params.seed, Stream::kFeatures, {env_id});
    env.features = generate_features(params, n_features, feature_rng);
  }
  env.idf = std::make_shared<const ImportanceField>(generate_idf(env.features, params));
  Rng init_rng(params.seed, Stream::kRobotInit, {env_id});
  env.initial = random_positions(params, init_rng);
  return env;
}

struct EpisodeConfig {
  WorldParams world;
  int n_features = 32;
  Controller controller = Controller::kClairvoyant;
  int horizon = 900;
  std::uint64_t env_id = 0;
  double noise_sigma = 0.0;
  double gain_k = 1.0;
  double converge_eps = 1e-2;
  bool stop_on_convergence = true;  // CVT controllers only
  std::shared_ptr<const PolicyWeights> weights;
  std::string weights_path;
  std::optional<std::vector<FeatureSpec>> features;  // overrides random features
  bool record_trajectory = false;
  bool record_messages = false;
};

inline EpisodeConfig episode_config(const RunConfig& rc) {
  EpisodeConfig c;
  c.world = rc.world;
  c.n_features = rc.n_features;
  c.controller = parse_controller(rc.controller);
  c.horizon = rc.horizon;
  c.env_id = rc.env_id;
  c.noise_sigma = rc.noise_sigma;
  c.gain_k = rc.gain_k;
  c.converge_eps = rc.converge_eps;
  c.weights_path = rc.weights;
  if (!rc.feature_file.empty()) c.features = ingest_feature_file(rc.feature_file, rc.world.side_length, rc.world.seed);
  return c;
}

struct EpisodeResult {
  std::vector<MetricsRow> metrics;           // horizon + 1 rows
  std::vector<std::vector<Vec2>> trajectory;  // positions per executed step, when recorded
  std::vector<MessageRecord> messages;        // LPAC only, when recorded
  std::vector<std::vector<int>> degrees;      // per executed step, when recorded
  int steps_executed = 0;
  bool converged = false;
};

namespace detail {

inline std::shared_ptr<const PolicyWeights> resolve_weights(const EpisodeConfig& cfg) {
  if (cfg.weights) return cfg.weights;
  if (cfg.weights_path.empty()) throw ValidationError("controller 'lpac' requires a weights file");
  return std::make_shared<const PolicyWeights>(load_weights(cfg.weights_path));
}

inline std::uint64_t noise_stream(std::uint64_t env_id, Controller c) {
  return splitmix64(env_id) ^ static_cast<std::uint64_t>(c);
}

}  // namespace detail

/// Global coverage cost of the robots' true positions.
inline double global_cost(const WorldState& world) {
  return coverage_cost(world.positions(), world.idf->grid(), CostMode::kGlobal);
}

/// Steps one environment with one controller for the horizon, recording
/// global cost, normalized cost and observed-area percentage. CVT runs stop
/// at convergence and their series is held flat to the horizon.
inline EpisodeResult run_episode(const EpisodeConfig& cfg) {
  if (cfg.horizon < 0) throw ValidationError("horizon must be non-negative");
  std::shared_ptr<const PolicyWeights> policy;
  if (cfg.controller == Controller::kLpac) {
    policy = detail::resolve_weights(cfg);
    policy->validate();
  }
  const CvtVariant variant{is_cvt(cfg.controller) ? cvt_kind(cfg.controller) : CvtKind::kClairvoyant, cfg.gain_k};
  variant.validate(cfg.world.dt);
  Environment env = make_environment(cfg.world, cfg.n_features, cfg.env_id, cfg.features);
  WorldState world = make_world(cfg.world, env.idf, env.initial, cfg.noise_sigma,
                                detail::noise_stream(cfg.env_id, cfg.controller));

  EpisodeResult result;
  const std::string name(controller_name(cfg.controller));
  const double initial_cost = global_cost(world);
  auto record = [&](int step, double cost) {
    const double normalized = initial_cost > 0.0 ? cost / initial_cost : 1.0;
    result.metrics.push_back({step, name, cfg.env_id, cost, normalized, world.observed_area_pct()});
  };
  record(0, initial_cost);
  if (cfg.record_trajectory) result.trajectory.push_back(world.positions());

  for (int t = 1; t <= cfg.horizon; ++t) {
    std::vector<Vec2> velocities;
    if (cfg.controller == Controller::kLpac) {
      LpacTrace trace;
      velocities = lpac_step(world, *policy, cfg.record_messages ? &trace : nullptr);
      if (cfg.record_messages) {
        result.messages.insert(result.messages.end(), trace.messages.begin(), trace.messages.end());
        std::vector<int> deg;
        for (int i = 0; i < trace.graph.n; ++i) deg.push_back(trace.graph.degree(i));
        result.degrees.push_back(std::move(deg));
      }
    } else {
      velocities = cvt_step(variant, world);
    }
    const std::vector<Vec2> prev = world.positions();
    step(world, velocities);
    ++result.steps_executed;
    record(t, global_cost(world));
    if (cfg.record_trajectory) result.trajectory.push_back(world.positions());
    if (is_cvt(cfg.controller) && cfg.stop_on_convergence && converged(world, prev, cfg.converge_eps)) {
      result.converged = true;
      break;
    }
  }
  while (static_cast<int>(result.metrics.size()) <= cfg.horizon) {
    MetricsRow row = result.metrics.back();
    ++row.step;
    result.metrics.push_back(std::move(row));
  }
  return result;
}

inline void write_trajectory_json(const std::filesystem::path& path, const EpisodeResult& r) {
  nlohmann::json j;
  j["steps_executed"] = r.steps_executed;
  j["converged"] = r.converged;
  auto& traj = j["trajectory"] = nlohmann::json::array();
  for (const auto& step : r.trajectory) {
    nlohmann::json row = nlohmann::json::array();
    for (const Vec2 p : step) row.push_back({p.x, p.y});
    traj.push_back(std::move(row));
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string());
  out << j.dump() << '\n';
}

// ---------------------------------------------------------------- dataset generation

struct DatasetConfig {
  WorldParams world;
  int n_features = 32;
  int n_episodes = 1;
  std::uint64_t first_env = 0;
  int max_iterations = 1000;
  int capture_every = 5;
  bool capture_converged = true;
  double gain_k = 1.0;
  double converge_eps = 1e-2;
  PerceptionConfig perception;
};

struct EpisodeCapture {
  std::uint64_t env_id = 0;
  int steps = 0;
  bool converged = false;
  std::size_t regular_samples = 0;
  std::size_t extra_samples = 0;
};

struct DatasetReport {
  std::vector<EpisodeCapture> episodes;
  std::uint64_t n_samples = 0;
};

/// State-action sample of the current state with the given expert velocities.
inline DatasetSample capture_sample(const WorldState& world, std::uint64_t env_id, std::span<const Vec2> expert,
                                    const PerceptionConfig& pcfg) {
  DatasetSample s;
  s.env_id = env_id;
  s.step = static_cast<std::uint64_t>(world.step_count);
  const double side = world.params.side_length;
  for (std::size_t i = 0; i < world.size(); ++i) {
    const Tensor maps = build_local_maps(world, i, pcfg);
    s.maps.insert(s.maps.end(), maps.data.begin(), maps.data.end());
    const Vec2 p = world.perceived[i];
    s.positions.insert(s.positions.end(), {static_cast<float>(p.x), static_cast<float>(p.y)});
    s.normalized_positions.insert(s.normalized_positions.end(),
                                  {static_cast<float>(p.x / side), static_cast<float>(p.y / side)});
    const Vec2 v = clamp_norm(expert[i], world.params.max_speed);
    s.targets.insert(s.targets.end(), {static_cast<float>(v.x), static_cast<float>(v.y)});
  }
  for (const auto& [a, b] : build_comm_graph(world.perceived, world.params.comm_range).edges)
    s.edges.emplace_back(static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b));
  return s;
}

/// Runs clairvoyant episodes and streams a sample every capture_every
/// steps, plus one sample at the converged state.
inline DatasetReport generate_dataset(const DatasetConfig& cfg, DatasetWriter& writer) {
  cfg.perception.validate();
  if (cfg.capture_every <= 0) throw ValidationError("capture_every must be positive");
  const CvtVariant expert{CvtKind::kClairvoyant, cfg.gain_k};
  expert.validate(cfg.world.dt);
  DatasetReport report;
  for (int e = 0; e < cfg.n_episodes; ++e) {
    const std::uint64_t env_id = cfg.first_env + static_cast<std::uint64_t>(e);
    Environment env = make_environment(cfg.world, cfg.n_features, env_id);
    WorldState world = make_world(cfg.world, env.idf, env.initial);
    EpisodeCapture cap{env_id};
    std::vector<Vec2> action = cvt_step(expert, world);
    for (int it = 1; it <= cfg.max_iterations; ++it) {
      const std::vector<Vec2> prev = world.positions();
      step(world, action);
      ++cap.steps;
      action = cvt_step(expert, world);
      if (world.step_count % cfg.capture_every == 0) {
        writer.append(capture_sample(world, env_id, action, cfg.perception));
        ++cap.regular_samples;
      }
      if (converged(world, prev, cfg.converge_eps)) {
        cap.converged = true;
        break;
      }
    }
    if (cap.converged && cfg.capture_converged) {
      writer.append(capture_sample(world, env_id, action, cfg.perception));
      ++cap.extra_samples;
    }
    report.episodes.push_back(cap);
  }
  report.n_samples = writer.count();
  return report;
}

inline DatasetReport generate_dataset(const DatasetConfig& cfg, const std::filesystem::path& path) {
  DatasetWriter writer(path, static_cast<std::uint64_t>(cfg.world.n_robots),
                       static_cast<std::uint64_t>(cfg.perception.channel));
  DatasetReport r = generate_dataset(cfg, writer);
  writer.close();
  return r;
}

// ---------------------------------------------------------------- batch evaluation

struct BatchConfig {
  EpisodeConfig base;
  std::vector<Controller> controllers;
  int n_envs = 1;
  std::uint64_t first_env = 0;
  int threads = 0;  // 0: hardware concurrency
};

struct ControllerSeries {
  Controller controller = Controller::kClairvoyant;
  std::vector<double> mean;  // normalized cost, per step
  std::vector<double> stddev;
  std::vector<int> best_count;  // envs where this controller is (jointly) best; from step 1
  std::vector<std::vector<double>> per_env;  // [env][step]
};

struct BatchSummary {
  int horizon = 0;
  int n_envs = 0;
  std::vector<ControllerSeries> series;

  const ControllerSeries* find(Controller c) const {
    for (const auto& s : series)
      if (s.controller == c) return &s;
    return nullptr;
  }

  /// (avg_DCVT - avg_X) / avg_DCVT * 100 at \p step; empty without D-CVT.
  std::optional<double> improvement_vs_dcvt(Controller c, int step) const {
    const auto* base = find(Controller::kDecentralizedCvt);
    const auto* x = find(c);
    if (!base || !x || base->mean[step] == 0.0) return std::nullopt;
    return (base->mean[step] - x->mean[step]) / base->mean[step] * 100.0;
  }

  /// avg_X / avg_clairvoyant at \p step; empty without the clairvoyant.
  std::optional<double> ratio_vs_clairvoyant(Controller c, int step) const {
    const auto* base = find(Controller::kClairvoyant);
    const auto* x = find(c);
    if (!base || !x || base->mean[step] == 0.0) return std::nullopt;
    return x->mean[step] / base->mean[step];
  }
};

namespace detail {

template <class Job>
void parallel_for(std::size_t n, int threads, Job&& job) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                    : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n && !failed;) {
          try {
            job(i);
          } catch (...) {
            if (!failed.exchange(true)) error = std::current_exception();
          }
        }
      });
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

/// Runs every (environment, controller) pair and aggregates normalized-cost
/// series. Each pair is an independent episode, so adding a controller
/// never changes another controller's trajectories.
inline BatchSummary evaluate_batch(const BatchConfig& cfg) {
  if (cfg.controllers.empty()) throw ValidationError("no controllers to evaluate");
  if (cfg.n_envs <= 0) throw ValidationError("n_envs must be positive");
  EpisodeConfig base = cfg.base;
  base.record_trajectory = false;
  base.record_messages = false;
  for (Controller c : cfg.controllers)
    if (c == Controller::kLpac && !base.weights)
      base.weights = detail::resolve_weights(base);

  const std::size_t nc = cfg.controllers.size(), ne = static_cast<std::size_t>(cfg.n_envs);
  std::vector<std::vector<double>> runs(nc * ne);
  detail::parallel_for(nc * ne, cfg.threads, [&](std::size_t job) {
    EpisodeConfig ec = base;
    ec.controller = cfg.controllers[job / ne];
    ec.env_id = cfg.first_env + job % ne;
    const auto r = run_episode(ec);
    std::vector<double> series;
    for (const auto& row : r.metrics) series.push_back(row.normalized_cost);
    runs[job] = std::move(series);
  });

  BatchSummary s;
  s.horizon = base.horizon;
  s.n_envs = cfg.n_envs;
  const std::size_t steps = static_cast<std::size_t>(base.horizon) + 1;
  for (std::size_t c = 0; c < nc; ++c) {
    ControllerSeries cs;
    cs.controller = cfg.controllers[c];
    cs.mean.assign(steps, 0.0);
    cs.stddev.assign(steps, 0.0);
    cs.best_count.assign(steps, 0);
    for (std::size_t e = 0; e < ne; ++e) cs.per_env.push_back(runs[c * ne + e]);
    for (std::size_t t = 0; t < steps; ++t) {
      double sum = 0.0;
      for (std::size_t e = 0; e < ne; ++e) sum += cs.per_env[e][t];
      cs.mean[t] = sum / static_cast<double>(ne);
      double var = 0.0;
      for (std::size_t e = 0; e < ne; ++e) var += (cs.per_env[e][t] - cs.mean[t]) * (cs.per_env[e][t] - cs.mean[t]);
      cs.stddev[t] = ne > 1 ? std::sqrt(var / static_cast<double>(ne - 1)) : 0.0;
    }
    s.series.push_back(std::move(cs));
  }
  // Every controller starts at exactly 1.0, so counting starts at step 1.
  for (std::size_t t = 1; t < steps; ++t)
    for (std::size_t e = 0; e < ne; ++e) {
      double best = s.series[0].per_env[e][t];
      for (const auto& cs : s.series) best = std::min(best, cs.per_env[e][t]);
      for (auto& cs : s.series)
        if (cs.per_env[e][t] == best) ++cs.best_count[t];
    }
  return s;
}

inline void write_summary_csv(std::ostream& out, const BatchSummary& s) {
  out << "step,controller,mean_normalized_cost,std_normalized_cost,best_count,improvement_pct_vs_dcvt,"
         "ratio_vs_clairvoyant\n";
  auto opt = [](std::optional<double> v) { return v ? format_double(*v) : std::string(); };
  for (const auto& cs : s.series)
    for (int t = 0; t <= s.horizon; ++t)
      out << t << ',' << controller_name(cs.controller) << ',' << format_double(cs.mean[t]) << ','
          << format_double(cs.stddev[t]) << ',' << cs.best_count[t] << ','
          << opt(s.improvement_vs_dcvt(cs.controller, t)) << ',' << opt(s.ratio_vs_clairvoyant(cs.controller, t))
          << '\n';
}

struct SweepPoint {
  double value = 0.0;
  BatchSummary summary;
};

/// Position-noise sweep; the default grid is 5, 10, 15, 20 m.
inline std::vector<SweepPoint> noise_sweep(BatchConfig cfg, std::vector<double> sigmas = {5.0, 10.0, 15.0, 20.0}) {
  std::vector<SweepPoint> out;
  for (double sigma : sigmas) {
    cfg.base.noise_sigma = sigma;
    out.push_back({sigma, evaluate_batch(cfg)});
  }
  return out;
}

inline std::vector<SweepPoint> comm_range_sweep(BatchConfig cfg, const std::vector<double>& ranges) {
  std::vector<SweepPoint> out;
  for (double r : ranges) {
    cfg.base.world.comm_range = r;
    out.push_back({r, evaluate_batch(cfg)});
  }
  return out;
}

/// Final-step figures of a sweep, one row per (value, controller).
inline void write_sweep_csv(std::ostream& out, std::string_view parameter, std::span<const SweepPoint> points) {
  out << parameter << ",controller,final_mean_normalized_cost,final_std_normalized_cost,improvement_pct_vs_dcvt,"
                      "ratio_vs_clairvoyant\n";
  auto opt = [](std::optional<double> v) { return v ? format_double(*v) : std::string(); };
  for (const auto& p : points) {
    const int t = p.summary.horizon;
    for (const auto& cs : p.summary.series)
      out << format_double(p.value) << ',' << controller_name(cs.controller) << ',' << format_double(cs.mean[t])
          << ',' << format_double(cs.stddev[t]) << ',' << opt(p.summary.improvement_vs_dcvt(cs.controller, t)) << ','
          << opt(p.summary.ratio_vs_clairvoyant(cs.controller, t)) << '\n';
  }
}

}  // namespace lpac
