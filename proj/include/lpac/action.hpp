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
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lpac/errors.hpp"
#include "lpac/gnn.hpp"
#include "lpac/perception.hpp"
#include "lpac/rng.hpp"
#include "lpac/tensor.hpp"
#include "lpac/world.hpp"

namespace lpac {

inline constexpr int kMlpHidden = 32;
inline constexpr int kActionDim = 2;

/// linear -> ReLU -> linear -> ReLU -> linear(2).
struct MlpWeights {
  Tensor fc1_weight;  // [32][d_L]
  Tensor fc1_bias;    // [32]
  Tensor fc2_weight;  // [32][32]
  Tensor fc2_bias;    // [32]
  Tensor out_weight;  // [2][32]
  Tensor out_bias;    // [2]

  static MlpWeights zeros(int input_dim) {
    const auto in = static_cast<std::uint64_t>(input_dim);
    return {Tensor({kMlpHidden, in}),         Tensor({kMlpHidden}), Tensor({kMlpHidden, kMlpHidden}),
            Tensor({kMlpHidden}),             Tensor({kActionDim, kMlpHidden}), Tensor({kActionDim})};
  }

  void validate(int input_dim) const {
    const auto in = static_cast<std::uint64_t>(input_dim);
    expect_shape(fc1_weight, {kMlpHidden, in}, "mlp.fc1.weight");
    expect_shape(fc1_bias, {kMlpHidden}, "mlp.fc1.bias");
    expect_shape(fc2_weight, {kMlpHidden, kMlpHidden}, "mlp.fc2.weight");
    expect_shape(fc2_bias, {kMlpHidden}, "mlp.fc2.bias");
    expect_shape(out_weight, {kActionDim, kMlpHidden}, "mlp.out.weight");
    expect_shape(out_bias, {kActionDim}, "mlp.out.bias");
  }
};

namespace detail {

/// W x + b in double for a row-major float [out][in] weight.
inline Eigen::VectorXd affine(const Tensor& w, const Tensor& b, const Eigen::VectorXd& x) {
  const auto rows = static_cast<Eigen::Index>(w.dim(0)), cols = static_cast<Eigen::Index>(w.dim(1));
  Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(w.data.data(), rows, cols);
  Eigen::Map<const Eigen::VectorXf> bias(b.data.data(), rows);
  return m.cast<double>() * x + bias.cast<double>();
}

}  // namespace detail

/// Raw velocity (vx, vy) from the GNN output of one robot.
inline Vec2 mlp_forward(const Eigen::VectorXd& x, const MlpWeights& w) {
  w.validate(static_cast<int>(x.size()));
  Eigen::VectorXd h = detail::affine(w.fc1_weight, w.fc1_bias, x).cwiseMax(0.0);
  h = detail::affine(w.fc2_weight, w.fc2_bias, h).cwiseMax(0.0);
  const Eigen::VectorXd out = detail::affine(w.out_weight, w.out_bias, h);
  return {out[0], out[1]};
}

/// Hyperparameters that fix every tensor shape of a policy.
struct Architecture {
  float leaky_slope = 0.01f;
  float bn_eps = 1e-5f;
  int layers = 5;    // L
  int hops = 3;      // K
  int d0 = 34;       // CNN features + normalized position
  int hidden = 256;  // d_l for l >= 1
  int channel = 32;
  int window = 256;

  ActivationConfig activation() const { return {leaky_slope, bn_eps}; }
  PerceptionConfig perception() const { return {window, channel}; }

  void validate() const {
    if (d0 != kCnnFeatures + 2) throw ValidationError("d_0 must equal CNN features + 2 = 34");
    if (layers < 1 || hops < 0 || hidden < 1) throw ValidationError("invalid GNN dimensions");
    perception().validate();
    if (!std::isfinite(leaky_slope) || !(bn_eps > 0.0f)) throw ValidationError("invalid activation constants");
  }

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Every learnable tensor of the perception, communication and action modules.
struct PolicyWeights {
  Architecture arch;
  CnnWeights cnn;
  GnnWeights gnn;
  MlpWeights mlp;

  static PolicyWeights zeros(const Architecture& arch = {}) {
    arch.validate();
    return {arch, CnnWeights::zeros(arch.channel), GnnWeights::zeros(arch.layers, arch.hops, arch.d0, arch.hidden),
            MlpWeights::zeros(arch.hidden)};
  }

  /// Glorot-uniform weights and plausible batch-norm statistics.
  static PolicyWeights random(const Architecture& arch, std::uint64_t seed) {
    PolicyWeights p = zeros(arch);
    Rng rng(seed, Stream::kWeights);
    auto fill = [&](Tensor& t, double limit) {
      for (float& v : t.data) v = static_cast<float>(rng.uniform(-limit, limit));
    };
    auto fan = [](const Tensor& t) {
      std::size_t per_out = t.size() / t.dim(0);
      return std::sqrt(6.0 / static_cast<double>(per_out + t.dim(0)));
    };
    for (auto& b : p.cnn.blocks) {
      fill(b.weight, fan(b.weight));
      fill(b.bias, 0.1);
      for (float& v : b.bn_gamma.data) v = static_cast<float>(rng.uniform(0.5, 1.5));
      fill(b.bn_beta, 0.1);
      fill(b.bn_mean, 0.1);
      for (float& v : b.bn_var.data) v = static_cast<float>(rng.uniform(0.5, 1.5));
    }
    fill(p.cnn.linear_weight, fan(p.cnn.linear_weight));
    fill(p.cnn.linear_bias, 0.1);
    p.gnn.randomize(rng);
    for (Tensor* t : {&p.mlp.fc1_weight, &p.mlp.fc2_weight, &p.mlp.out_weight}) fill(*t, fan(*t));
    for (Tensor* t : {&p.mlp.fc1_bias, &p.mlp.fc2_bias, &p.mlp.out_bias}) fill(*t, 0.1);
    return p;
  }

  void validate() const {
    arch.validate();
    cnn.validate(arch.channel);
    gnn.validate();
    if (gnn.layers != arch.layers || gnn.hops != arch.hops || gnn.input_dim() != arch.d0)
      throw ValidationError("GNN weights disagree with the architecture header");
    for (int l = 1; l <= gnn.layers; ++l)
      if (gnn.dims[l] != arch.hidden) throw ValidationError("GNN hidden width disagrees with the architecture header");
    mlp.validate(arch.hidden);
  }
};

/// GNN input row for one robot: CNN features followed by p / side.
inline Eigen::VectorXd gnn_input(std::span<const float> cnn_features, Vec2 position, int side) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(cnn_features.size()) + 2);
  for (std::size_t i = 0; i < cnn_features.size(); ++i) x[static_cast<Eigen::Index>(i)] = cnn_features[i];
  x[x.size() - 2] = position.x / side;
  x[x.size() - 1] = position.y / side;
  return x;
}

/// Optional per-step record of what the policy saw and sent.
struct LpacTrace {
  std::vector<Tensor> maps;
  std::vector<Eigen::VectorXd> gnn_inputs;
  std::vector<Eigen::VectorXd> gnn_outputs;
  CommGraph graph;
  std::vector<MessageRecord> messages;
  std::vector<std::vector<ReceivedMessage>> received;
};

/// One perception-communication-action step for every robot: maps -> CNN ->
/// (features, p / side) -> distributed GNN -> MLP -> speed clamp.
inline std::vector<Vec2> lpac_step(const WorldState& world, const PolicyWeights& policy, LpacTrace* trace = nullptr,
                                   bool keep_received = false) {
  policy.validate();
  const std::size_t n = world.size();
  const PerceptionConfig pcfg = policy.arch.perception();
  const ActivationConfig act = policy.arch.activation();
  std::vector<Eigen::VectorXd> inputs;
  inputs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor maps = build_local_maps(world, i, pcfg);
    const auto features = cnn_forward(maps, policy.cnn, act);
    inputs.push_back(gnn_input(features, world.perceived[i], world.params.side_length));
    if (trace) trace->maps.push_back(std::move(maps));
  }
  CommGraph graph = build_comm_graph(world.perceived, world.params.comm_range);
  DistributedResult gnn = gnn_forward_distributed(inputs, graph, policy.gnn, world.step_count, keep_received);
  std::vector<Vec2> velocities(n);
  for (std::size_t i = 0; i < n; ++i)
    velocities[i] = clamp_norm(mlp_forward(gnn.outputs[i], policy.mlp), world.params.max_speed);
  if (trace) {
    trace->gnn_inputs = std::move(inputs);
    trace->gnn_outputs = gnn.outputs;
    trace->graph = std::move(graph);
    trace->messages = std::move(gnn.log);
    trace->received = std::move(gnn.received);
  }
  return velocities;
}

}  // namespace lpac
