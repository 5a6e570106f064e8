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
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lpac/lpac.hpp"

namespace {

using namespace lpac;

/// Flags that mirror RunConfig keys. Values given on the command line
/// override the preset or the JSON file.
class ConfigFlags {
 public:
  explicit ConfigFlags(CLI::App* app) : app_(app) {
    app->add_option("--config", config_path_, "JSON run configuration")->check(CLI::ExistingFile);
    app->add_option("--preset", preset_, "Start from a preset instead of defaults")
        ->check(CLI::IsMember({"full", "desk"}));
    add<int>("--side-length", [](RunConfig& c, int v) { c.world.side_length = v; });
    add<int>("--n-robots", [](RunConfig& c, int v) { c.world.n_robots = v; });
    add<int>("--sensor-side", [](RunConfig& c, int v) { c.world.sensor_side = v; });
    add<double>("--comm-range", [](RunConfig& c, double v) { c.world.comm_range = v; });
    add<double>("--max-speed", [](RunConfig& c, double v) { c.world.max_speed = v; });
    add<double>("--dt", [](RunConfig& c, double v) { c.world.dt = v; });
    add<std::uint64_t>("--seed", [](RunConfig& c, std::uint64_t v) { c.world.seed = v; });
    add<int>("--n-features", [](RunConfig& c, int v) { c.n_features = v; });
    add<std::string>("--controller", [](RunConfig& c, std::string v) { c.controller = std::move(v); });
    add<int>("--horizon", [](RunConfig& c, int v) { c.horizon = v; });
    add<int>("--n-envs", [](RunConfig& c, int v) { c.n_envs = v; });
    add<std::uint64_t>("--env-id", [](RunConfig& c, std::uint64_t v) { c.env_id = v; });
    add<double>("--noise-sigma", [](RunConfig& c, double v) { c.noise_sigma = v; });
    add<double>("--gain-k", [](RunConfig& c, double v) { c.gain_k = v; });
    add<double>("--converge-eps", [](RunConfig& c, double v) { c.converge_eps = v; });
    add<std::string>("--weights", [](RunConfig& c, std::string v) { c.weights = std::move(v); });
    add<std::string>("--feature-file", [](RunConfig& c, std::string v) { c.feature_file = std::move(v); });
    add<int>("--threads", [](RunConfig& c, int v) { c.threads = v; });
    auto* ctrl = app->add_option("--controllers", controllers_, "Controllers for batch evaluation");
    overrides_.push_back([ctrl, this](RunConfig& c) {
      if (*ctrl) c.controllers = controllers_;
    });
  }

  RunConfig resolve() const {
    RunConfig c;
    if (preset_ == "full") c = full_scale_preset();
    if (preset_ == "desk") c = desk_scale_preset();
    if (!config_path_.empty()) c = load_run_config(config_path_);
    for (const auto& f : overrides_) f(c);
    c.world.validate();
    return c;
  }

 private:
  template <class T, class Set>
  void add(const std::string& flag, Set set) {
    auto* opt = app_->add_option(flag, "Overrides the config key of the same name");
    overrides_.push_back([opt, set](RunConfig& c) {
      if (*opt) set(c, opt->as<T>());
    });
  }

  CLI::App* app_;
  std::string config_path_;
  std::string preset_;
  std::vector<std::string> controllers_;
  std::vector<std::function<void(RunConfig&)>> overrides_;
};

Tensor grid_tensor(int side, const std::function<float(int, int)>& value) {
  Tensor t({static_cast<std::uint64_t>(side), static_cast<std::uint64_t>(side)});
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) t[static_cast<std::size_t>(y) * side + x] = value(x, y);
  return t;
}

int gen_world(const RunConfig& rc, const std::string& out) {
  std::optional<std::vector<FeatureSpec>> features;
  if (!rc.feature_file.empty()) features = ingest_feature_file(rc.feature_file, rc.world.side_length, rc.world.seed);
  const Environment env = make_environment(rc.world, rc.n_features, rc.env_id, features);
  const WorldState w = make_world(rc.world, env.idf, env.initial);
  const int side = rc.world.side_length;
  const Partition part = compute_partition(w.positions(), side);
  Tensor pos({static_cast<std::uint64_t>(w.size()), 2});
  for (std::size_t i = 0; i < w.size(); ++i) {
    pos[2 * i] = static_cast<float>(w.robots[i].position.x);
    pos[2 * i + 1] = static_cast<float>(w.robots[i].position.y);
  }
  Tensor feats({static_cast<std::uint64_t>(env.features.size()), 4});
  for (std::size_t i = 0; i < env.features.size(); ++i) {
    const auto& f = env.features[i];
    for (int k = 0; k < 4; ++k)
      feats[4 * i + k] = static_cast<float>(std::array{f.center.x, f.center.y, f.sigma, f.scale}[k]);
  }
  const std::vector<NamedTensor> tensors{
      {"idf", grid_tensor(side, [&](int x, int y) { return static_cast<float>((*env.idf)(x, y)); })},
      {"robot_positions", pos},
      {"features", feats},
      {"observed_union", grid_tensor(side, [&](int x, int y) { return w.team_mask(x, y) ? 1.0f : 0.0f; })},
      {"partition", grid_tensor(side, [&](int x, int y) { return static_cast<float>(part.assignment(x, y)); })},
  };
  save_tensors(out, tensors);
  std::cout << "wrote " << out << ": " << side << "x" << side << " world, " << env.features.size() << " features, "
            << w.size() << " robots, global cost " << format_double(global_cost(w)) << "\n";
  return 0;
}

int run(const RunConfig& rc, const std::string& out, const std::string& trajectory) {
  EpisodeConfig cfg = episode_config(rc);
  cfg.record_trajectory = !trajectory.empty();
  const auto r = run_episode(cfg);
  write_metrics(out, r.metrics);
  if (!trajectory.empty()) write_trajectory_json(trajectory, r);
  std::cout << controller_name(cfg.controller) << " env " << cfg.env_id << ": " << r.steps_executed << " steps"
            << (r.converged ? " (converged)" : "") << ", final normalized cost "
            << format_double(r.metrics.back().normalized_cost) << "\n";
  return 0;
}

int gen_dataset(const RunConfig& rc, const std::string& out, int episodes, int max_iterations, int window,
                int channel) {
  DatasetConfig cfg;
  cfg.world = rc.world;
  cfg.n_features = rc.n_features;
  cfg.n_episodes = episodes;
  cfg.first_env = rc.env_id;
  cfg.max_iterations = max_iterations;
  cfg.gain_k = rc.gain_k;
  cfg.converge_eps = rc.converge_eps;
  cfg.perception = {window, channel};
  const auto report = generate_dataset(cfg, out);
  for (const auto& e : report.episodes)
    std::cout << "env " << e.env_id << ": " << e.steps << " steps" << (e.converged ? " (converged)" : "") << ", "
              << e.regular_samples << " + " << e.extra_samples << " samples\n";
  std::cout << "wrote " << out << ": " << report.n_samples << " samples\n";
  return 0;
}

BatchConfig batch_config(const RunConfig& rc) {
  BatchConfig b;
  b.base = episode_config(rc);
  std::vector<std::string> names = rc.controllers;
  if (names.empty()) {
    names = {"clairvoyant", "c-cvt", "d-cvt"};
    if (!rc.weights.empty()) names.push_back("lpac");
  }
  for (const auto& n : names) b.controllers.push_back(parse_controller(n));
  b.n_envs = rc.n_envs;
  b.first_env = rc.env_id;
  b.threads = rc.threads;
  return b;
}

void write_text(const std::string& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  body(out);
}

int eval(const RunConfig& rc, const std::string& out, const std::vector<double>& noise, bool noise_default,
         const std::vector<double>& ranges, const std::string& sweep_out) {
  const BatchConfig b = batch_config(rc);
  const BatchSummary s = evaluate_batch(b);
  write_text(out, [&](std::ostream& o) { write_summary_csv(o, s); });
  for (const auto& cs : s.series) {
    std::cout << controller_name(cs.controller) << ": final mean normalized cost " << format_double(cs.mean[s.horizon]);
    if (auto v = s.improvement_vs_dcvt(cs.controller, s.horizon)) std::cout << ", vs d-cvt " << format_double(*v) << "%";
    std::cout << "\n";
  }
  std::vector<SweepPoint> points;
  std::string parameter;
  if (noise_default || !noise.empty()) {
    points = noise_default ? noise_sweep(b) : noise_sweep(b, noise);
    parameter = "noise_sigma";
  } else if (!ranges.empty()) {
    points = comm_range_sweep(b, ranges);
    parameter = "comm_range";
  }
  if (!points.empty()) {
    const std::string path = sweep_out.empty() ? out + "." + parameter + ".csv" : sweep_out;
    write_text(path, [&](std::ostream& o) { write_sweep_csv(o, parameter, points); });
    std::cout << "wrote " << path << "\n";
  }
  std::cout << "wrote " << out << "\n";
  return 0;
}

int bandwidth(const RunConfig& rc, const std::string& out) {
  EpisodeConfig cfg = episode_config(rc);
  cfg.controller = Controller::kLpac;
  cfg.record_messages = true;
  cfg.stop_on_convergence = false;
  const auto r = run_episode(cfg);
  const auto rep = bandwidth_report(r.messages, rc.world.n_robots, r.steps_executed, r.degrees);
  const auto policy = load_weights(rc.weights);
  std::cout << "steps                          " << r.steps_executed << "\n"
            << "floats per message set         " << aggregated_message_floats(policy.gnn) << "\n"
            << "total floats broadcast         " << rep.total_floats << "\n"
            << "total floats peer-to-peer      " << rep.total_p2p_floats << "\n"
            << "floats per robot-step          " << format_double(rep.floats_per_robot_step) << "\n"
            << "p2p floats per robot-step      " << format_double(rep.p2p_floats_per_robot_step) << "\n"
            << "max floats by one robot/step   " << rep.max_message_floats << "\n"
            << "neighbors mean / std           " << format_double(rep.neighbor_mean) << " / "
            << format_double(rep.neighbor_std) << "\n"
            << "centralized upload per robot   " << centralized_upload_floats(policy.arch.window) << "\n";
  if (!out.empty()) {
    write_text(out, [&](std::ostream& o) {
      o << "step,floats\n";
      for (std::size_t t = 0; t < rep.floats_per_step.size(); ++t) o << t << ',' << rep.floats_per_step[t] << '\n';
    });
    std::cout << "wrote " << out << "\n";
  }
  return 0;
}

int inspect_weights(const std::string& path) {
  const PolicyWeights p = load_weights(path);
  const auto& a = p.arch;
  std::cout << "leaky_slope " << format_double(a.leaky_slope) << "\nbn_eps " << format_double(a.bn_eps) << "\nL "
            << a.layers << "\nK " << a.hops << "\nd0 " << a.d0 << "\nd " << a.hidden << "\nchannel " << a.channel
            << "\nwindow " << a.window << "\n";
  std::size_t total = 0;
  for (const auto& [name, t] : named_tensors(p)) {
    std::cout << name << " " << shape_string(t->dims) << "\n";
    total += t->size();
  }
  std::cout << "parameters " << total << "\nmessage floats per robot-step " << aggregated_message_floats(p.gnn) << "\n";
  return 0;
}

int init_weights(const std::string& out, bool zero, std::uint64_t seed, int layers, int hops, int hidden, int channel,
                 int window) {
  Architecture a;
  a.layers = layers;
  a.hops = hops;
  a.hidden = hidden;
  a.channel = channel;
  a.window = window;
  save_weights(out, zero ? PolicyWeights::zeros(a) : PolicyWeights::random(a, seed));
  std::cout << "wrote " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coverage control with learned perception, communication and action"};
  app.require_subcommand(1);

  auto* gw = app.add_subcommand("gen-world", "Generate a world and export a snapshot");
  ConfigFlags gw_flags(gw);
  std::string gw_out = "world.bin";
  gw->add_option("-o,--output", gw_out, "Snapshot path (tensor container)");

  auto* rn = app.add_subcommand("run", "Run one episode and write its metrics CSV");
  ConfigFlags rn_flags(rn);
  std::string rn_out = "metrics.csv", rn_traj;
  rn->add_option("-o,--output", rn_out, "Metrics CSV path");
  rn->add_option("--trajectory", rn_traj, "Optional JSON trajectory dump");

  auto* gd = app.add_subcommand("gen-dataset", "Generate imitation-learning data from clairvoyant episodes");
  ConfigFlags gd_flags(gd);
  std::string gd_out = "dataset.bin";
  int gd_episodes = 1, gd_iters = 1000, gd_window = 256, gd_channel = 32;
  gd->add_option("-o,--output", gd_out, "Dataset path");
  gd->add_option("--episodes", gd_episodes, "Number of environments, starting at --env-id")->check(CLI::PositiveNumber);
  gd->add_option("--max-iterations", gd_iters, "Iteration cap per episode")->check(CLI::PositiveNumber);
  gd->add_option("--window", gd_window, "Local map side in cells");
  gd->add_option("--channel", gd_channel, "Downsampled map side");

  auto* ev = app.add_subcommand("eval", "Evaluate controllers over many environments");
  ConfigFlags ev_flags(ev);
  std::string ev_out = "summary.csv", ev_sweep_out;
  std::vector<double> ev_noise, ev_ranges;
  bool ev_noise_default = false;
  ev->add_option("-o,--output", ev_out, "Summary CSV path");
  ev->add_flag("--noise-sweep", ev_noise_default, "Sweep position noise over 5, 10, 15, 20 m");
  ev->add_option("--noise-values", ev_noise, "Sweep position noise over these values");
  ev->add_option("--comm-sweep", ev_ranges, "Sweep the communication range over these values");
  ev->add_option("--sweep-output", ev_sweep_out, "Sweep CSV path");

  auto* bw = app.add_subcommand("bandwidth", "Run an lpac episode and report message traffic");
  ConfigFlags bw_flags(bw);
  std::string bw_out;
  bw->add_option("-o,--output", bw_out, "Optional per-step traffic CSV");

  auto* iw = app.add_subcommand("inspect-weights", "Validate a weight file and list its tensors");
  std::string iw_path;
  iw->add_option("path", iw_path, "Weight file")->required();

  auto* in = app.add_subcommand("init-weights", "Write a zero or randomly initialized weight file");
  std::string in_out = "weights.bin";
  bool in_zero = false;
  std::uint64_t in_seed = 0;
  Architecture defaults;
  int in_layers = defaults.layers, in_hops = defaults.hops, in_hidden = defaults.hidden, in_channel = defaults.channel,
      in_window = defaults.window;
  in->add_option("-o,--output", in_out, "Weight file path");
  in->add_flag("--zero", in_zero, "All-zero weights (identity batch norm)");
  in->add_option("--seed", in_seed, "Seed for random initialization");
  in->add_option("--layers", in_layers, "GNN layers L");
  in->add_option("--hops", in_hops, "GNN hops K");
  in->add_option("--hidden", in_hidden, "GNN hidden width");
  in->add_option("--channel", in_channel, "Map channel side");
  in->add_option("--window", in_window, "Local map window");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gw) return gen_world(gw_flags.resolve(), gw_out);
    if (*rn) return run(rn_flags.resolve(), rn_out, rn_traj);
    if (*gd) return gen_dataset(gd_flags.resolve(), gd_out, gd_episodes, gd_iters, gd_window, gd_channel);
    if (*ev) return eval(ev_flags.resolve(), ev_out, ev_noise, ev_noise_default, ev_ranges, ev_sweep_out);
    if (*bw) return bandwidth(bw_flags.resolve(), bw_out);
    if (*iw) return inspect_weights(iw_path);
    if (*in) return init_weights(in_out, in_zero, in_seed, in_layers, in_hops, in_hidden, in_channel, in_window);
  } catch (const ValidationError& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "shape error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
