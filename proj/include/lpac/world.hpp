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
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lpac/errors.hpp"
#include "lpac/geometry.hpp"
#include "lpac/grid.hpp"
#include "lpac/rng.hpp"

namespace lpac {

/// Environment and robot parameters. Defaults are the full-scale setting.
struct WorldParams {
  int side_length = 1024;  // cells of 1 m^2
  int n_robots = 32;
  int sensor_side = 64;
  double comm_range = 128.0;
  double max_speed = 5.0;
  double dt = 0.2;
  std::uint64_t seed = 0;

  void validate() const {
    if (side_length <= 0) throw ValidationError("side_length must be positive");
    if (n_robots <= 0) throw ValidationError("n_robots must be positive");
    if (sensor_side <= 0 || sensor_side % 2 != 0) throw ValidationError("sensor_side must be a positive even number");
    if (sensor_side >= side_length) throw ValidationError("sensor_side must be smaller than side_length");
    if (!(comm_range > 0.0)) throw ValidationError("comm_range must be positive");
    if (!(max_speed > 0.0) || !(dt > 0.0)) throw ValidationError("max_speed and dt must be positive");
    // A robot must not outrun its own sensed footprint in one step.
    if (max_speed * dt > sensor_side / 2.0) throw ValidationError("max_speed * dt exceeds sensor_side / 2");
  }
};

/// One Gaussian feature of interest.
struct FeatureSpec {
  Vec2 center;
  double sigma = 50.0;
  double scale = 8.0;

  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

inline constexpr double kSigmaMin = 40.0, kSigmaMax = 60.0;
inline constexpr double kScaleMin = 6.0, kScaleMax = 10.0;

inline void validate_feature(const FeatureSpec& f, int side) {
  if (!(f.sigma > 0.0) || !(f.scale > 0.0)) throw ValidationError("feature sigma and scale must be positive");
  if (!(f.center.x >= 0.0 && f.center.x < side && f.center.y >= 0.0 && f.center.y < side))
    throw ValidationError("feature center lies outside the workspace");
}

/// Ground-truth importance density field. Immutable once built.
class ImportanceField {
 public:
  ImportanceField() = default;
  explicit ImportanceField(Grid<double> grid) : grid_(std::move(grid)) {}

  int side() const noexcept { return grid_.side(); }
  double operator()(int x, int y) const noexcept { return grid_(x, y); }
  const Grid<double>& grid() const noexcept { return grid_; }

  double total() const {
    double s = 0.0;
    for (double v : grid_.values()) s += v;
    return s;
  }
  double max() const {
    double m = 0.0;
    for (double v : grid_.values()) m = std::max(m, v);
    return m;
  }

 private:
  Grid<double> grid_;
};

/// Per-robot state. Observed importance is not duplicated: it is the field
/// value wherever observed_mask is set and 0 elsewhere.
struct RobotState {
  Vec2 position;
  Mask observed_mask;
  std::size_t observed_count = 0;
  CellBox observed_box;
  std::vector<Vec2> trajectory;
};

/// Everything one episode mutates. Owned by a single executor.
struct WorldState {
  WorldParams params;
  std::shared_ptr<const ImportanceField> idf;
  std::vector<RobotState> robots;
  /// Positions as the robots believe them to be (noisy when noise is on),
  /// clamped to the workspace. Every controller reads these.
  std::vector<Vec2> perceived;
  Mask team_mask;  // union of all robots' observed cells
  std::size_t team_observed = 0;
  int step_count = 0;
  double noise_sigma = 0.0;
  Rng noise_rng{0};

  std::size_t size() const noexcept { return robots.size(); }

  double observed_importance(std::size_t robot, int x, int y) const {
    return robots[robot].observed_mask(x, y) ? (*idf)(x, y) : 0.0;
  }

  Grid<double> observed_importance_map(std::size_t robot) const {
    Grid<double> g(params.side_length);
    const auto& mask = robots[robot].observed_mask;
    for (int y = 0; y < g.side(); ++y)
      for (int x = 0; x < g.side(); ++x)
        if (mask(x, y)) g(x, y) = (*idf)(x, y);
    return g;
  }

  std::vector<Vec2> positions() const {
    std::vector<Vec2> p;
    p.reserve(robots.size());
    for (const auto& r : robots) p.push_back(r.position);
    return p;
  }

  double observed_area_pct() const {
    return 100.0 * static_cast<double>(team_observed) / static_cast<double>(team_mask.size());
  }
};

inline Vec2 clamp_to_workspace(Vec2 p, int side) noexcept {
  return {std::clamp(p.x, 0.0, static_cast<double>(side)), std::clamp(p.y, 0.0, static_cast<double>(side))};
}

/// Random features: centers uniform over the workspace, sigma and scale
/// uniform over their ranges.
inline std::vector<FeatureSpec> generate_features(const WorldParams& params, int n_features, Rng& rng) {
  if (n_features < 0) throw ValidationError("n_features must be non-negative");
  std::vector<FeatureSpec> out;
  out.reserve(static_cast<std::size_t>(n_features));
  const double side = params.side_length;
  for (int i = 0; i < n_features; ++i) {
    FeatureSpec f;
    f.center.x = rng.uniform(0.0, side);
    f.center.y = rng.uniform(0.0, side);
    f.sigma = rng.uniform(kSigmaMin, kSigmaMax);
    f.scale = rng.uniform(kScaleMin, kScaleMax);
    out.push_back(f);
  }
  return out;
}

namespace detail {

/// P(a <= X < b) for X ~ N(mu, sigma^2), computed with erfc on the tail
/// side to avoid cancellation.
inline double normal_interval(double a, double b, double mu, double sigma) noexcept {
  const double s = sigma * std::numbers::sqrt2;
  const double za = (a - mu) / s, zb = (b - mu) / s;
  if (za >= 0.0) return 0.5 * (std::erfc(za) - std::erfc(zb));
  if (zb <= 0.0) return 0.5 * (std::erfc(-zb) - std::erfc(-za));
  return 0.5 * (std::erf(zb) - std::erf(za));
}

}  // namespace detail

/// Adds scale * (integral of the feature's 2-D Gaussian pdf over each cell)
/// into \p grid, for cells whose center is within 2 sigma of the feature.
inline void accumulate_feature(Grid<double>& grid, const FeatureSpec& f) {
  const double cutoff = 2.0 * f.sigma;
  const CellBox box = cells_in_square(f.center, cutoff + 1.0, grid.side());
  std::vector<double> px(static_cast<std::size_t>(std::max(0, box.x1 - box.x0 + 1)));
  std::vector<double> py(static_cast<std::size_t>(std::max(0, box.y1 - box.y0 + 1)));
  for (int x = box.x0; x <= box.x1; ++x) px[x - box.x0] = detail::normal_interval(x, x + 1.0, f.center.x, f.sigma);
  for (int y = box.y0; y <= box.y1; ++y) py[y - box.y0] = detail::normal_interval(y, y + 1.0, f.center.y, f.sigma);
  const double cutoff2 = cutoff * cutoff;
  for (int y = box.y0; y <= box.y1; ++y)
    for (int x = box.x0; x <= box.x1; ++x) {
      if (squared_distance(Grid<double>::center(x, y), f.center) > cutoff2) continue;
      grid(x, y) += f.scale * px[x - box.x0] * py[y - box.y0];
    }
}

/// Field before max-normalization.
inline Grid<double> raw_importance(std::span<const FeatureSpec> features, int side) {
  Grid<double> grid(side);
  for (const auto& f : features) accumulate_feature(grid, f);
  return grid;
}

/// Sum of truncated per-cell Gaussian integrals, normalized to a maximum of
/// exactly 1. An empty feature list gives an all-zero field.
inline ImportanceField generate_idf(std::span<const FeatureSpec> features, const WorldParams& params) {
  for (const auto& f : features) validate_feature(f, params.side_length);
  Grid<double> grid = raw_importance(features, params.side_length);
  double peak = 0.0;
  for (double v : grid.values()) peak = std::max(peak, v);
  if (peak > 0.0)
    for (double& v : grid.values()) v /= peak;
  return ImportanceField(std::move(grid));
}

/// Marks every cell whose center lies in the robot's square footprint as observed.
inline const RobotState& sense(WorldState& world, std::size_t robot_index) {
  RobotState& r = world.robots.at(robot_index);
  const CellBox box = cells_in_square(r.position, world.params.sensor_side / 2.0, world.params.side_length);
  for (int y = box.y0; y <= box.y1; ++y)
    for (int x = box.x0; x <= box.x1; ++x) {
      if (!r.observed_mask(x, y)) {
        r.observed_mask(x, y) = 1;
        ++r.observed_count;
      }
      if (!world.team_mask(x, y)) {
        world.team_mask(x, y) = 1;
        ++world.team_observed;
      }
    }
  r.observed_box.expand(box);
  return r;
}

/// p + N(0, sigma^2) per axis. True positions are not touched.
inline std::vector<Vec2> noisy_positions(const WorldState& world, double sigma_noise, Rng& rng) {
  if (sigma_noise < 0.0) throw ValidationError("sigma_noise must be non-negative");
  std::vector<Vec2> out = world.positions();
  if (sigma_noise == 0.0) return out;
  for (auto& p : out) {
    p.x += rng.normal(0.0, sigma_noise);
    p.y += rng.normal(0.0, sigma_noise);
  }
  return out;
}

inline void refresh_perceived(WorldState& world) {
  if (world.noise_sigma > 0.0) {
    world.perceived = noisy_positions(world, world.noise_sigma, world.noise_rng);
    for (auto& p : world.perceived) p = clamp_to_workspace(p, world.params.side_length);
  } else {
    world.perceived = world.positions();
  }
}

/// Builds the initial state: robots at \p initial positions (clamped), each
/// having sensed its initial footprint.
inline WorldState make_world(const WorldParams& params, std::shared_ptr<const ImportanceField> idf,
                             std::span<const Vec2> initial, double noise_sigma = 0.0,
                             std::uint64_t noise_stream_index = 0) {
  params.validate();
  if (!idf || idf->side() != params.side_length) throw ValidationError("importance field does not match side_length");
  if (initial.size() != static_cast<std::size_t>(params.n_robots))
    throw ValidationError("initial positions must number n_robots");
  if (noise_sigma < 0.0) throw ValidationError("noise_sigma must be non-negative");
  WorldState w;
  w.params = params;
  w.idf = std::move(idf);
  w.team_mask = Mask(params.side_length);
  w.noise_sigma = noise_sigma;
  w.noise_rng = Rng(params.seed, Stream::kNoise, {noise_stream_index});
  w.robots.resize(initial.size());
  for (std::size_t i = 0; i < initial.size(); ++i) {
    if (!is_finite(initial[i])) throw ValidationError("initial position of robot " + std::to_string(i) + " is not finite");
    auto& r = w.robots[i];
    r.position = clamp_to_workspace(initial[i], params.side_length);
    r.observed_mask = Mask(params.side_length);
    r.trajectory.push_back(r.position);
    sense(w, i);
  }
  refresh_perceived(w);
  return w;
}

inline std::vector<Vec2> random_positions(const WorldParams& params, Rng& rng) {
  std::vector<Vec2> p(static_cast<std::size_t>(params.n_robots));
  for (auto& v : p) {
    v.x = rng.uniform(0.0, params.side_length);
    v.y = rng.uniform(0.0, params.side_length);
  }
  return p;
}

/// Advances every robot by its (speed-clamped) velocity over params.dt, then senses.
inline void step(WorldState& world, std::span<const Vec2> velocities) {
  if (velocities.size() != world.robots.size())
    throw ValidationError("expected " + std::to_string(world.robots.size()) + " velocities, got " +
                          std::to_string(velocities.size()));
  for (std::size_t i = 0; i < velocities.size(); ++i)
    if (!is_finite(velocities[i])) throw ValidationError("velocity of robot " + std::to_string(i) + " is not finite");
  const double dt = world.params.dt;
  for (std::size_t i = 0; i < velocities.size(); ++i) {
    auto& r = world.robots[i];
    const Vec2 v = clamp_norm(velocities[i], world.params.max_speed);
    r.position = clamp_to_workspace(r.position + v * dt, world.params.side_length);
    r.trajectory.push_back(r.position);
  }
  ++world.step_count;
  for (std::size_t i = 0; i < world.robots.size(); ++i) sense(world, i);
  refresh_perceived(world);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_double(std::string_view field, std::size_t line) {
  field = trim(field);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(v))
    throw ParseError(line, "not a number: '" + std::string(field) + "'");
  return v;
}

}  // namespace detail

/// Reads features from CSV lines "x,y[,sigma,scale]". Blank lines and lines
/// starting with '#' are skipped. Missing sigma/scale are drawn from the
/// feature ranges with a stream seeded by \p seed.
inline std::vector<FeatureSpec> parse_feature_csv(std::istream& in, int side, std::uint64_t seed) {
  Rng fill(seed, Stream::kFeatureFill);
  std::vector<FeatureSpec> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    const std::string_view row = detail::trim(text);
    if (row.empty() || row.front() == '#') continue;
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = row.find(',', start);
      fields.push_back(row.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 2 && fields.size() != 4)
      throw ParseError(line, "expected 2 or 4 comma-separated fields, got " + std::to_string(fields.size()));
    FeatureSpec f;
    f.center = {detail::parse_double(fields[0], line), detail::parse_double(fields[1], line)};
    if (fields.size() == 4) {
      f.sigma = detail::parse_double(fields[2], line);
      f.scale = detail::parse_double(fields[3], line);
    } else {
      f.sigma = fill.uniform(kSigmaMin, kSigmaMax);
      f.scale = fill.uniform(kScaleMin, kScaleMax);
    }
    try {
      validate_feature(f, side);
    } catch (const ValidationError& e) {
      throw ParseError(line, e.what());
    }
    out.push_back(f);
  }
  return out;
}

inline std::vector<FeatureSpec> ingest_feature_file(const std::filesystem::path& path, int side, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open feature file " + path.string());
  auto features = parse_feature_csv(in, side, seed);
  if (features.empty()) std::clog << "warning: feature file " << path.string() << " contains no features\n";
  return features;
}

}  // namespace lpac
