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
#include <span>
#include <string>
#include <vector>

#include "lpac/errors.hpp"
#include "lpac/geometry.hpp"
#include "lpac/voronoi.hpp"
#include "lpac/world.hpp"

namespace lpac {

enum class CvtKind { kClairvoyant, kCentralized, kDecentralized };

struct CvtVariant {
  CvtKind kind = CvtKind::kClairvoyant;
  double gain_k = 1.0;

  void validate(double dt) const {
    if (!(gain_k > 0.0)) throw ValidationError("gain_k must be positive");
    if (gain_k * dt > 1.0) throw ValidationError("gain_k * dt must not exceed 1");
  }
};

/// Indices j != i with |p_i - p_j| <= range, ascending.
inline std::vector<int> neighbors_within(std::span<const Vec2> positions, std::size_t i, double range) {
  std::vector<int> out;
  const double r2 = range * range;
  for (std::size_t j = 0; j < positions.size(); ++j)
    if (j != i && squared_distance(positions[i], positions[j]) <= r2) out.push_back(static_cast<int>(j));
  return out;
}

/// Lloyd control law u = -k (p - c).
inline Vec2 lloyd_velocity(Vec2 position, Vec2 centroid, double gain_k) noexcept {
  return -gain_k * (position - centroid);
}

/// D-CVT for one robot: Voronoi over itself and its communication
/// neighbors only, centroid over its own observed cells only.
inline Vec2 decentralized_velocity(const WorldState& world, std::size_t i, double gain_k) {
  const auto& sites = world.perceived;
  std::vector<int> local = neighbors_within(sites, i, world.params.comm_range);
  local.push_back(static_cast<int>(i));
  std::sort(local.begin(), local.end());
  std::vector<Vec2> local_sites;
  for (int j : local) local_sites.push_back(sites[j]);
  const int self = static_cast<int>(std::find(local.begin(), local.end(), static_cast<int>(i)) - local.begin());

  const RobotState& r = world.robots[i];
  const ImportanceField& phi = *world.idf;
  double mass = 0.0, mx = 0.0, my = 0.0;
  const CellBox& box = r.observed_box;
  for (int y = box.y0; y <= box.y1; ++y)
    for (int x = box.x0; x <= box.x1; ++x) {
      if (!r.observed_mask(x, y)) continue;
      const double v = phi(x, y);
      if (v == 0.0) continue;
      if (nearest_site(local_sites, Grid<double>::center(x, y)) != self) continue;
      mass += v;
      mx += (x + 0.5) * v;
      my += (y + 0.5) * v;
    }
  const Vec2 centroid = mass > 0.0 ? Vec2{mx / mass, my / mass} : sites[i];
  return lloyd_velocity(sites[i], centroid, gain_k);
}

/// Per-robot velocities (before speed clamping, which step() applies).
inline std::vector<Vec2> cvt_step(const CvtVariant& variant, const WorldState& world) {
  variant.validate(world.params.dt);
  const std::size_t n = world.size();
  std::vector<Vec2> u(n);
  if (variant.kind == CvtKind::kDecentralized) {
    for (std::size_t i = 0; i < n; ++i) u[i] = decentralized_velocity(world, i, variant.gain_k);
    return u;
  }
  const Partition partition = compute_partition(world.perceived, world.params.side_length);
  const auto moments = variant.kind == CvtKind::kClairvoyant
                           ? cell_moments(partition, world.idf->grid())
                           : cell_moments(partition, world.idf->grid(), world.team_mask);
  for (std::size_t i = 0; i < n; ++i) u[i] = lloyd_velocity(world.perceived[i], moments[i].centroid, variant.gain_k);
  return u;
}

/// True iff every robot moved less than \p epsilon since \p prev.
inline bool converged(std::span<const Vec2> now, std::span<const Vec2> prev, double epsilon = 1e-2) {
  if (now.size() != prev.size()) throw ValidationError("position lists differ in length");
  for (std::size_t i = 0; i < now.size(); ++i)
    if (!(norm(now[i] - prev[i]) < epsilon)) return false;
  return true;
}

inline bool converged(const WorldState& world, std::span<const Vec2> prev, double epsilon = 1e-2) {
  return converged(world.positions(), prev, epsilon);
}

}  // namespace lpac
