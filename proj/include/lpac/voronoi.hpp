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

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lpac/errors.hpp"
#include "lpac/geometry.hpp"
#include "lpac/grid.hpp"

namespace lpac {

/// Nearest-site labeling of every cell center. Ties go to the lowest index.
struct Partition {
  Grid<int> assignment;
  std::vector<Vec2> sites;

  int side() const noexcept { return assignment.side(); }
};

/// Generalized mass, centroid and polar moment of inertia of one cell.
struct CellMoments {
  double mass = 0.0;
  Vec2 centroid;
  double inertia = 0.0;
};

/// Index of the site nearest to \p q among \p sites; lowest index wins ties.
inline int nearest_site(std::span<const Vec2> sites, Vec2 q) noexcept {
  int best = 0;
  double best_d = squared_distance(sites[0], q);
  for (std::size_t s = 1; s < sites.size(); ++s) {
    const double d = squared_distance(sites[s], q);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(s);
    }
  }
  return best;
}

inline Partition compute_partition(std::span<const Vec2> sites, int side) {
  if (sites.empty()) throw ValidationError("partition needs at least one site");
  if (side <= 0) throw ValidationError("side must be positive");
  for (std::size_t i = 0; i < sites.size(); ++i)
    if (!is_finite(sites[i])) throw ValidationError("site " + std::to_string(i) + " is not finite");
  Partition p{Grid<int>(side), {sites.begin(), sites.end()}};
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) p.assignment(x, y) = nearest_site(sites, Grid<int>::center(x, y));
  return p;
}

namespace detail {

template <class Include>
std::vector<CellMoments> moments_where(const Partition& partition, const Grid<double>& field, Include include) {
  if (field.side() != partition.side()) throw ValidationError("field and partition sizes differ");
  const std::size_t n = partition.sites.size();
  std::vector<double> mass(n, 0.0), mx(n, 0.0), my(n, 0.0);
  const int side = partition.side();
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      if (!include(x, y)) continue;
      const double phi = field(x, y);
      if (phi == 0.0) continue;
      const int i = partition.assignment(x, y);
      mass[i] += phi;
      mx[i] += (x + 0.5) * phi;
      my[i] += (y + 0.5) * phi;
    }
  std::vector<CellMoments> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].mass = mass[i];
    out[i].centroid = mass[i] > 0.0 ? Vec2{mx[i] / mass[i], my[i] / mass[i]} : partition.sites[i];
  }
  // Second pass about the centroid; no parallel-axis shortcut.
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      if (!include(x, y)) continue;
      const double phi = field(x, y);
      if (phi == 0.0) continue;
      auto& m = out[partition.assignment(x, y)];
      m.inertia += squared_distance(Grid<double>::center(x, y), m.centroid) * phi;
    }
  return out;
}

}  // namespace detail

/// Riemann-sum moments over each cell (full workspace).
inline std::vector<CellMoments> cell_moments(const Partition& partition, const Grid<double>& field) {
  return detail::moments_where(partition, field, [](int, int) { return true; });
}

/// Moments restricted to the observed set W_o given by \p observed.
/// A zero-mass cell reports its site as centroid and zero inertia.
inline std::vector<CellMoments> cell_moments(const Partition& partition, const Grid<double>& field,
                                             const Mask& observed) {
  if (observed.side() != field.side()) throw ValidationError("observed mask and field sizes differ");
  return detail::moments_where(partition, field, [&](int x, int y) { return observed(x, y) != 0; });
}

enum class CostMode {
  kGlobal,              // all of W
  kCurrentFov,          // P_i restricted to robot i's current footprint
  kCumulativeObserved,  // P_i restricted to the observed workspace
};

inline CostMode parse_cost_mode(std::string_view s) {
  if (s == "global") return CostMode::kGlobal;
  if (s == "current-fov") return CostMode::kCurrentFov;
  if (s == "cumulative-observed") return CostMode::kCumulativeObserved;
  throw ValidationError("unknown cost mode '" + std::string(s) + "'");
}

/// Extra inputs some cost modes need.
struct CostDomain {
  const Mask* observed = nullptr;  // kCumulativeObserved
  double sensor_side = 0.0;        // kCurrentFov
};

/// J = sum_i sum_{q in P_i and domain} |p_i - q|^2 phi(q).
inline double coverage_cost(const Partition& partition, const Grid<double>& field, CostMode mode,
                            const CostDomain& domain = {}) {
  if (field.side() != partition.side()) throw ValidationError("field and partition sizes differ");
  const int side = partition.side();
  const auto& sites = partition.sites;
  double cost = 0.0;
  switch (mode) {
    case CostMode::kGlobal:
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
          const double phi = field(x, y);
          if (phi != 0.0) cost += squared_distance(sites[partition.assignment(x, y)], Grid<double>::center(x, y)) * phi;
        }
      return cost;
    case CostMode::kCumulativeObserved: {
      if (!domain.observed || domain.observed->side() != side)
        throw ValidationError("cumulative-observed cost needs an observed mask of matching size");
      const Mask& obs = *domain.observed;
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
          const double phi = field(x, y);
          if (phi != 0.0 && obs(x, y))
            cost += squared_distance(sites[partition.assignment(x, y)], Grid<double>::center(x, y)) * phi;
        }
      return cost;
    }
    case CostMode::kCurrentFov: {
      if (!(domain.sensor_side > 0.0)) throw ValidationError("current-fov cost needs a positive sensor_side");
      for (std::size_t i = 0; i < sites.size(); ++i) {
        const CellBox box = cells_in_square(sites[i], domain.sensor_side / 2.0, side);
        for (int y = box.y0; y <= box.y1; ++y)
          for (int x = box.x0; x <= box.x1; ++x)
            if (partition.assignment(x, y) == static_cast<int>(i))
              cost += squared_distance(sites[i], Grid<double>::center(x, y)) * field(x, y);
      }
      return cost;
    }
  }
  throw ValidationError("unknown cost mode");
}

inline double coverage_cost(std::span<const Vec2> sites, const Grid<double>& field, CostMode mode,
                            const CostDomain& domain = {}) {
  return coverage_cost(compute_partition(sites, field.side()), field, mode, domain);
}

/// sum_i I_i + sum_i m_i |p_i - c_i|^2.
inline double cost_from_moments(std::span<const Vec2> sites, std::span<const CellMoments> moments) {
  double j = 0.0;
  for (std::size_t i = 0; i < sites.size(); ++i)
    j += moments[i].inertia + moments[i].mass * squared_distance(sites[i], moments[i].centroid);
  return j;
}

/// dJ/dp_i = 2 m_i (p_i - c_i), partition held fixed.
inline Vec2 cost_gradient(Vec2 site, const CellMoments& m) noexcept { return 2.0 * m.mass * (site - m.centroid); }

}  // namespace lpac
