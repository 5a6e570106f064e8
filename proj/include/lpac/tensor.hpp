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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "lpac/errors.hpp"

namespace lpac {

using Shape = std::vector<std::uint64_t>;

inline std::size_t element_count(const Shape& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? "x" : "") + std::to_string(dims[i]);
  return s + "]";
}

/// Dense row-major float32 tensor.
struct Tensor {
  Shape dims;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(Shape d, float fill = 0.0f) : dims(std::move(d)), data(element_count(dims), fill) {}

  std::size_t rank() const noexcept { return dims.size(); }
  std::size_t size() const noexcept { return data.size(); }
  std::uint64_t dim(std::size_t i) const { return dims.at(i); }

  float& operator[](std::size_t i) noexcept { return data[i]; }
  float operator[](std::size_t i) const noexcept { return data[i]; }

  std::span<float> values() noexcept { return data; }
  std::span<const float> values() const noexcept { return data; }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

inline void expect_shape(const Tensor& t, const Shape& dims, const std::string& name) {
  if (t.dims != dims) throw ShapeError(name, "expected " + shape_string(dims) + ", got " + shape_string(t.dims));
  if (t.data.size() != element_count(dims)) throw ShapeError(name, "element count does not match dims");
}

}  // namespace lpac
