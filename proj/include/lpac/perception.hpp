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
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lpac/cvt.hpp"
#include "lpac/errors.hpp"
#include "lpac/geometry.hpp"
#include "lpac/tensor.hpp"
#include "lpac/world.hpp"

namespace lpac {

inline constexpr int kMapChannels = 4;
inline constexpr int kCnnWidth = 32;     // conv output channels
inline constexpr int kCnnFeatures = 32;  // CNN output vector length

/// Sizes of the ego-centric input maps.
struct PerceptionConfig {
  int window = 256;  // local map side in cells
  int channel = 32;  // downsampled channel side

  void validate() const {
    if (window <= 0 || channel <= 0 || window < channel) throw ValidationError("need window >= channel > 0");
  }
};

/// Scalars shared by the trainer and the runtime.
struct ActivationConfig {
  float leaky_slope = 0.01f;
  float bn_eps = 1e-5f;
};

/// Bilinear resampling of a square \p src_size grid to \p dst_size using the
/// half-pixel (align-corners = false) convention, edge-clamped.
inline std::vector<float> bilinear_downsample(std::span<const float> src, int src_size, int dst_size) {
  if (dst_size <= 0 || src_size < dst_size) throw ValidationError("bilinear_downsample needs src_size >= dst_size > 0");
  if (src.size() != static_cast<std::size_t>(src_size) * src_size) throw ValidationError("source size mismatch");
  struct Tap {
    int i0, i1;
    float w1;
  };
  std::vector<Tap> taps(static_cast<std::size_t>(dst_size));
  const double scale = static_cast<double>(src_size) / dst_size;
  for (int u = 0; u < dst_size; ++u) {
    double s = std::clamp((u + 0.5) * scale - 0.5, 0.0, static_cast<double>(src_size - 1));
    const int i0 = static_cast<int>(std::floor(s));
    const int i1 = std::min(i0 + 1, src_size - 1);
    taps[u] = {i0, i1, static_cast<float>(s - i0)};
  }
  std::vector<float> dst(static_cast<std::size_t>(dst_size) * dst_size);
  for (int v = 0; v < dst_size; ++v) {
    const Tap ty = taps[v];
    for (int u = 0; u < dst_size; ++u) {
      const Tap tx = taps[u];
      auto at = [&](int x, int y) { return src[static_cast<std::size_t>(y) * src_size + x]; };
      const float top = at(tx.i0, ty.i0) + tx.w1 * (at(tx.i1, ty.i0) - at(tx.i0, ty.i0));
      const float bottom = at(tx.i0, ty.i1) + tx.w1 * (at(tx.i1, ty.i1) - at(tx.i0, ty.i1));
      dst[static_cast<std::size_t>(v) * dst_size + u] = top + ty.w1 * (bottom - top);
    }
  }
  return dst;
}

/// Writes neighbor channels 2 and 3 of \p maps from relative neighbor
/// offsets. Pixels are 2*r_c/C wide so the channel spans [-r_c, r_c]^2.
/// Contributions are summed in a canonical order, so the result does not
/// depend on the order of \p offsets.
inline void write_neighbor_channels(Tensor& maps, std::vector<Vec2> offsets, double comm_range) {
  const int c = static_cast<int>(maps.dim(1));
  const double pixel = 2.0 * comm_range / c;
  std::sort(offsets.begin(), offsets.end(), [](Vec2 a, Vec2 b) { return a.x != b.x ? a.x < b.x : a.y < b.y; });
  const std::size_t plane = static_cast<std::size_t>(c) * c;
  for (const Vec2 rel : offsets) {
    const int px = std::clamp(static_cast<int>(std::floor((rel.x + comm_range) / pixel)), 0, c - 1);
    const int py = std::clamp(static_cast<int>(std::floor((rel.y + comm_range) / pixel)), 0, c - 1);
    const std::size_t at = static_cast<std::size_t>(py) * c + px;
    maps[2 * plane + at] += static_cast<float>(rel.x / comm_range);
    maps[3 * plane + at] += static_cast<float>(rel.y / comm_range);
  }
}

/// Four ego-centric channels for one robot: observed importance, boundary,
/// neighbor x, neighbor y. Shape [4][C][C], rows are y.
inline Tensor build_local_maps(const WorldState& world, std::size_t robot, const PerceptionConfig& cfg = {}) {
  cfg.validate();
  const Vec2 p = world.perceived.at(robot);
  const int w = cfg.window;
  const int ox = static_cast<int>(std::floor(p.x)) - w / 2;
  const int oy = static_cast<int>(std::floor(p.y)) - w / 2;
  const int side = world.params.side_length;
  const Mask& mask = world.robots[robot].observed_mask;
  const ImportanceField& phi = *world.idf;

  std::vector<float> importance(static_cast<std::size_t>(w) * w, 0.0f);
  std::vector<float> boundary(static_cast<std::size_t>(w) * w, 0.0f);
  for (int v = 0; v < w; ++v)
    for (int u = 0; u < w; ++u) {
      const int x = ox + u, y = oy + v;
      const std::size_t at = static_cast<std::size_t>(v) * w + u;
      if (x < 0 || y < 0 || x >= side || y >= side) {
        boundary[at] = 1.0f;
      } else if (mask(x, y)) {
        importance[at] = static_cast<float>(phi(x, y));
      }
    }

  const int c = cfg.channel;
  Tensor maps({kMapChannels, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(c)});
  const std::size_t plane = static_cast<std::size_t>(c) * c;
  const auto imp = bilinear_downsample(importance, w, c);
  const auto bnd = bilinear_downsample(boundary, w, c);
  std::copy(imp.begin(), imp.end(), maps.data.begin());
  std::copy(bnd.begin(), bnd.end(), maps.data.begin() + static_cast<std::ptrdiff_t>(plane));

  std::vector<Vec2> offsets;
  for (int j : neighbors_within(world.perceived, robot, world.params.comm_range))
    offsets.push_back(world.perceived[j] - p);
  write_neighbor_channels(maps, std::move(offsets), world.params.comm_range);
  return maps;
}

/// Conv(3x3, stride 1, zero pad) -> batch norm (running statistics).
struct ConvBlock {
  Tensor weight;  // [32][in][3][3]
  Tensor bias;    // [32]
  Tensor bn_gamma, bn_beta, bn_mean, bn_var;  // [32] each
};

struct CnnWeights {
  std::array<ConvBlock, 3> blocks;
  Tensor linear_weight;  // [32][32*C*C]
  Tensor linear_bias;    // [32]

  static CnnWeights zeros(int channel) {
    CnnWeights w;
    std::uint64_t in = kMapChannels;
    for (auto& b : w.blocks) {
      b.weight = Tensor({kCnnWidth, in, 3, 3});
      b.bias = Tensor({kCnnWidth});
      b.bn_gamma = Tensor({kCnnWidth}, 1.0f);
      b.bn_beta = Tensor({kCnnWidth});
      b.bn_mean = Tensor({kCnnWidth});
      b.bn_var = Tensor({kCnnWidth}, 1.0f);
      in = kCnnWidth;
    }
    const auto c = static_cast<std::uint64_t>(channel);
    w.linear_weight = Tensor({kCnnFeatures, kCnnWidth * c * c});
    w.linear_bias = Tensor({kCnnFeatures});
    return w;
  }

  void validate(int channel) const {
    std::uint64_t in = kMapChannels;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const std::string p = "cnn.block" + std::to_string(i + 1) + ".";
      const auto& b = blocks[i];
      expect_shape(b.weight, {kCnnWidth, in, 3, 3}, p + "conv.weight");
      expect_shape(b.bias, {kCnnWidth}, p + "conv.bias");
      expect_shape(b.bn_gamma, {kCnnWidth}, p + "bn.weight");
      expect_shape(b.bn_beta, {kCnnWidth}, p + "bn.bias");
      expect_shape(b.bn_mean, {kCnnWidth}, p + "bn.running_mean");
      expect_shape(b.bn_var, {kCnnWidth}, p + "bn.running_var");
      for (float v : b.bn_var.data)
        if (!(v >= 0.0f)) throw ShapeError(p + "bn.running_var", "running variance must be non-negative");
      in = kCnnWidth;
    }
    const auto c = static_cast<std::uint64_t>(channel);
    expect_shape(linear_weight, {kCnnFeatures, kCnnWidth * c * c}, "cnn.linear.weight");
    expect_shape(linear_bias, {kCnnFeatures}, "cnn.linear.bias");
  }
};

namespace detail {

inline float leaky(float v, float slope) noexcept { return v >= 0.0f ? v : slope * v; }

using RowMajorF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One conv block on a [in][c][c] activation; returns [32][c][c] after BN and leaky ReLU.
inline std::vector<float> conv_block(std::span<const float> input, int in_ch, int c, const ConvBlock& b,
                                     const ActivationConfig& act) {
  const int plane = c * c;
  RowMajorF cols = RowMajorF::Zero(in_ch * 9, plane);
  for (int ci = 0; ci < in_ch; ++ci)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const int row = ci * 9 + ky * 3 + kx;
        for (int y = 0; y < c; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= c) continue;
          for (int x = 0; x < c; ++x) {
            const int sx = x + kx - 1;
            if (sx < 0 || sx >= c) continue;
            cols(row, y * c + x) = input[static_cast<std::size_t>(ci) * plane + sy * c + sx];
          }
        }
      }
  Eigen::Map<const RowMajorF> w(b.weight.data.data(), kCnnWidth, in_ch * 9);
  RowMajorF out = w * cols;
  std::vector<float> result(static_cast<std::size_t>(kCnnWidth) * plane);
  for (int o = 0; o < kCnnWidth; ++o) {
    const float inv_std = 1.0f / std::sqrt(b.bn_var[o] + act.bn_eps);
    const float gain = b.bn_gamma[o] * inv_std;
    const float shift = b.bn_beta[o] - b.bn_mean[o] * gain;
    for (int i = 0; i < plane; ++i)
      result[static_cast<std::size_t>(o) * plane + i] = leaky((out(o, i) + b.bias[o]) * gain + shift, act.leaky_slope);
  }
  return result;
}

}  // namespace detail

/// Inference-mode CNN: three conv/BN/leaky-ReLU blocks, flatten, linear, leaky ReLU.
inline std::vector<float> cnn_forward(const Tensor& maps, const CnnWeights& weights, const ActivationConfig& act = {}) {
  if (maps.rank() != 3 || maps.dim(0) != kMapChannels || maps.dim(1) != maps.dim(2))
    throw ShapeError("maps", "expected [4][C][C], got " + shape_string(maps.dims));
  const int c = static_cast<int>(maps.dim(1));
  weights.validate(c);
  std::vector<float> x = maps.data;
  int in_ch = kMapChannels;
  for (const auto& b : weights.blocks) {
    x = detail::conv_block(x, in_ch, c, b, act);
    in_ch = kCnnWidth;
  }
  Eigen::Map<const detail::RowMajorF> w(weights.linear_weight.data.data(), kCnnFeatures,
                                        static_cast<Eigen::Index>(x.size()));
  Eigen::Map<const Eigen::VectorXf> flat(x.data(), static_cast<Eigen::Index>(x.size()));
  Eigen::VectorXf y = w * flat;
  std::vector<float> out(kCnnFeatures);
  for (int i = 0; i < kCnnFeatures; ++i) out[i] = detail::leaky(y[i] + weights.linear_bias[i], act.leaky_slope);
  return out;
}

}  // namespace lpac
