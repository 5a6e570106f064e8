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
#include <cmath>
#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

#include "lpac/geometry.hpp"

namespace lpac {

/// Square row-major grid of 1 m x 1 m cells. Cell (x, y) spans
/// [x, x+1) x [y, y+1) and is addressed by its center (x+0.5, y+0.5).
template <class T>
class Grid {
 public:
  Grid() = default;
  explicit Grid(int side, T fill = T{}) : side_(side), data_(static_cast<std::size_t>(side) * side, fill) {}

  int side() const noexcept { return side_; }
  std::size_t size() const noexcept { return data_.size(); }

  T& operator()(int x, int y) noexcept { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const noexcept { return data_[index(x, y)]; }

  bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < side_ && y < side_; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  static constexpr Vec2 center(int x, int y) noexcept { return {x + 0.5, y + 0.5}; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    assert(contains(x, y));
    return static_cast<std::size_t>(y) * side_ + x;
  }

  int side_ = 0;
  std::vector<T> data_;
};

using Mask = Grid<unsigned char>;

/// Inclusive cell-index rectangle.
struct CellBox {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;

  bool empty() const noexcept { return x1 < x0 || y1 < y0; }
  void expand(const CellBox& o) noexcept {
    if (o.empty()) return;
    if (empty()) { *this = o; return; }
    x0 = std::min(x0, o.x0); y0 = std::min(y0, o.y0);
    x1 = std::max(x1, o.x1); y1 = std::max(y1, o.y1);
  }
};

/// Cells of a side x side grid whose centers lie in the half-open square
/// [c - half, c + half)^2. Half-open keeps the count exactly 2*half per axis
/// away from the boundary, wherever the center falls.
inline CellBox cells_in_square(Vec2 c, double half, int side) noexcept {
  auto lo = [](double v) { return static_cast<int>(std::ceil(v - 0.5)); };
  auto hi = [](double v) { return static_cast<int>(std::ceil(v - 0.5)) - 1; };
  CellBox b{lo(c.x - half), lo(c.y - half), hi(c.x + half), hi(c.y + half)};
  b.x0 = std::max(b.x0, 0);
  b.y0 = std::max(b.y0, 0);
  b.x1 = std::min(b.x1, side - 1);
  b.y1 = std::min(b.y1, side - 1);
  return b;
}

}  // namespace lpac
