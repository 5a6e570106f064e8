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

#include <cmath>
#include <cstddef>
#include <ostream>
#include <vector>

namespace lpac {

/// A point or displacement in workspace meters.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2& operator+=(Vec2 o) noexcept { x += o.x; y += o.y; return *this; }
  constexpr Vec2& operator-=(Vec2 o) noexcept { x -= o.x; y -= o.y; return *this; }
  constexpr Vec2& operator*=(double s) noexcept { x *= s; y *= s; return *this; }
  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) noexcept { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) noexcept { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) noexcept { return {s * a.x, s * a.y}; }
  friend constexpr Vec2 operator*(Vec2 a, double s) noexcept { return {s * a.x, s * a.y}; }
  friend constexpr bool operator==(Vec2, Vec2) noexcept = default;

  friend std::ostream& operator<<(std::ostream& os, Vec2 v) { return os << '(' << v.x << ", " << v.y << ')'; }
};

constexpr double dot(Vec2 a, Vec2 b) noexcept { return a.x * b.x + a.y * b.y; }
constexpr double squared_norm(Vec2 a) noexcept { return dot(a, a); }
inline double norm(Vec2 a) noexcept { return std::hypot(a.x, a.y); }
constexpr double squared_distance(Vec2 a, Vec2 b) noexcept { return squared_norm(a - b); }
inline bool is_finite(Vec2 a) noexcept { return std::isfinite(a.x) && std::isfinite(a.y); }

/// Scales \p v down to magnitude \p max_norm if it is longer; direction is kept.
inline Vec2 clamp_norm(Vec2 v, double max_norm) noexcept {
  const double n = norm(v);
  if (n <= max_norm || n == 0.0) return v;
  return v * (max_norm / n);
}

using Positions = std::vector<Vec2>;

}  // namespace lpac
