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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "lpac/errors.hpp"
#include "lpac/geometry.hpp"
#include "lpac/rng.hpp"
#include "lpac/tensor.hpp"

namespace lpac {

/// Undirected communication graph; edge iff |p_i - p_j| <= r_c.
struct CommGraph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;  // i < j, lexicographic
  std::vector<std::vector<int>> adjacency;  // ascending

  int degree(int i) const { return static_cast<int>(adjacency[i].size()); }
  double mean_degree() const { return n ? 2.0 * static_cast<double>(edges.size()) / n : 0.0; }
};

inline CommGraph build_comm_graph(std::span<const Vec2> positions, double comm_range) {
  CommGraph g;
  g.n = static_cast<int>(positions.size());
  g.adjacency.resize(positions.size());
  const double r2 = comm_range * comm_range;
  for (int i = 0; i < g.n; ++i) {
    if (!is_finite(positions[i])) throw ValidationError("position " + std::to_string(i) + " is not finite");
    for (int j = i + 1; j < g.n; ++j)
      if (squared_distance(positions[i], positions[j]) <= r2) {
        g.edges.emplace_back(i, j);
        g.adjacency[i].push_back(j);
        g.adjacency[j].push_back(i);
      }
  }
  return g;
}

/// Sparse D^{-1/2} A D^{-1/2}. Isolated vertices have empty rows.
struct ShiftOperator {
  struct Entry {
    int col;
    double value;
  };
  int n = 0;
  std::vector<std::vector<Entry>> rows;  // ascending column

  double at(int i, int j) const {
    for (const auto& e : rows[i])
      if (e.col == j) return e.value;
    return 0.0;
  }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (const auto& e : rows[i]) s(i, e.col) = e.value;
    return s;
  }
};

inline ShiftOperator shift_operator(const CommGraph& g) {
  ShiftOperator s;
  s.n = g.n;
  s.rows.resize(static_cast<std::size_t>(g.n));
  for (int i = 0; i < g.n; ++i)
    for (int j : g.adjacency[i])
      s.rows[i].push_back({j, 1.0 / std::sqrt(static_cast<double>(g.degree(i)) * g.degree(j))});
  return s;
}

/// Graph-filter weights H[l][k], l in [0, L), k in [0, K], each [d_l][d_{l+1}].
struct GnnWeights {
  int layers = 5;
  int hops = 3;
  std::vector<int> dims;  // L + 1 entries: d_0 .. d_L
  std::vector<std::vector<Tensor>> filters;

  int input_dim() const { return dims.front(); }
  int output_dim() const { return dims.back(); }

  static std::string tensor_name(int layer, int hop) {
    return "gnn.H." + std::to_string(layer + 1) + "." + std::to_string(hop);
  }

  static GnnWeights zeros(int layers, int hops, int d0, int hidden) {
    if (layers < 1 || hops < 0 || d0 < 1 || hidden < 1) throw ValidationError("invalid GNN architecture");
    GnnWeights w;
    w.layers = layers;
    w.hops = hops;
    w.dims.assign(static_cast<std::size_t>(layers) + 1, hidden);
    w.dims[0] = d0;
    w.filters.resize(static_cast<std::size_t>(layers));
    for (int l = 0; l < layers; ++l)
      for (int k = 0; k <= hops; ++k)
        w.filters[l].emplace_back(Shape{static_cast<std::uint64_t>(w.dims[l]), static_cast<std::uint64_t>(w.dims[l + 1])});
    return w;
  }

  /// Glorot-uniform fill, deterministic in \p rng.
  void randomize(Rng& rng, double gain = 1.0) {
    for (int l = 0; l < layers; ++l) {
      const double limit = gain * std::sqrt(6.0 / (dims[l] + dims[l + 1])) / std::sqrt(hops + 1.0);
      for (auto& t : filters[l])
        for (float& v : t.data) v = static_cast<float>(rng.uniform(-limit, limit));
    }
  }

  void validate() const {
    if (layers < 1 || hops < 0) throw ValidationError("GNN needs L >= 1 and K >= 0");
    if (dims.size() != static_cast<std::size_t>(layers) + 1) throw ValidationError("GNN dims must have L+1 entries");
    if (filters.size() != static_cast<std::size_t>(layers)) throw ValidationError("GNN filter count mismatch");
    for (int l = 0; l < layers; ++l) {
      if (filters[l].size() != static_cast<std::size_t>(hops) + 1) throw ValidationError("GNN hop count mismatch");
      for (int k = 0; k <= hops; ++k)
        expect_shape(filters[l][k], {static_cast<std::uint64_t>(dims[l]), static_cast<std::uint64_t>(dims[l + 1])},
                     tensor_name(l, k));
    }
  }

  /// Filter as a double matrix [d_l x d_{l+1}].
  Eigen::MatrixXd matrix(int layer, int hop) const {
    const Tensor& t = filters[layer][hop];
    Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
        t.data.data(), dims[layer], dims[layer + 1]);
    return m.cast<double>();
  }
};

/// Filters converted to double once, shared read-only by every node.
struct GnnFilters {
  std::vector<std::vector<Eigen::MatrixXd>> h;  // [layer][hop]

  explicit GnnFilters(const GnnWeights& w) {
    w.validate();
    h.resize(static_cast<std::size_t>(w.layers));
    for (int l = 0; l < w.layers; ++l)
      for (int k = 0; k <= w.hops; ++k) h[l].push_back(w.matrix(l, k));
  }
};

namespace detail {
inline void relu_inplace(Eigen::Ref<Eigen::MatrixXd> m) { m = m.cwiseMax(0.0); }
}  // namespace detail

/// X_l = relu(sum_k S^k X_{l-1} H_lk), applied for every layer including the last.
inline Eigen::MatrixXd gnn_forward_centralized(const Eigen::MatrixXd& x0, const ShiftOperator& s,
                                               const GnnWeights& w) {
  const GnnFilters f(w);
  if (x0.rows() != s.n) throw ShapeError("X0", "row count must equal the number of vertices");
  if (x0.cols() != w.input_dim()) throw ShapeError("X0", "column count must equal d_0");
  Eigen::MatrixXd x = x0;
  for (int l = 0; l < w.layers; ++l) {
    Eigen::MatrixXd y = x;
    Eigen::MatrixXd z = y * f.h[l][0];
    for (int k = 1; k <= w.hops; ++k) {
      Eigen::MatrixXd next = Eigen::MatrixXd::Zero(y.rows(), y.cols());
      for (int i = 0; i < s.n; ++i)
        for (const auto& e : s.rows[i]) next.row(i) += e.value * y.row(e.col);
      y = std::move(next);
      z += y * f.h[l][k];
    }
    detail::relu_inplace(z);
    x = std::move(z);
  }
  return x;
}

/// One transmission: a robot sends (y_i)_{l,hop-1} to all of its neighbors.
struct MessageRecord {
  int step = 0;
  int layer = 0;  // 1-based
  int hop = 0;    // 1-based round; the payload is (y)_{layer, hop-1}
  int sender = 0;
  int n_receivers = 0;
  std::size_t floats = 0;
};

/// A vector received by one robot, kept for replay.
struct ReceivedMessage {
  int layer = 0;
  int hop = 0;
  int sender = 0;
  Eigen::VectorXd payload;
};

/// The per-robot graph-filter executor. It sees only its own input, its
/// shift-operator row, and what arrives in its inbox.
class GnnNode {
 public:
  GnnNode(const GnnFilters& filters, std::vector<ShiftOperator::Entry> row, Eigen::VectorXd input)
      : filters_(&filters), row_(std::move(row)), x_(std::move(input)) {}

  void begin_layer(int layer) {
    layer_ = layer;
    y_ = x_;
    z_ = filters_->h[layer][0].transpose() * y_;
  }

  /// The vector to broadcast in the next round.
  const Eigen::VectorXd& outgoing() const noexcept { return y_; }

  /// Consumes the neighbors' previous-hop vectors for round \p hop (1-based).
  /// \p inbox maps neighbor index -> payload and must cover this node's row.
  template <class Lookup>
  void receive(int hop, Lookup&& inbox) {
    Eigen::VectorXd next = Eigen::VectorXd::Zero(y_.size());
    for (const auto& e : row_) next += e.value * inbox(e.col);
    y_ = std::move(next);
    z_ += filters_->h[layer_][hop].transpose() * y_;
  }

  void end_layer() { x_ = z_.cwiseMax(0.0); }

  const Eigen::VectorXd& output() const noexcept { return x_; }
  const std::vector<ShiftOperator::Entry>& row() const noexcept { return row_; }

 private:
  const GnnFilters* filters_;
  std::vector<ShiftOperator::Entry> row_;
  Eigen::VectorXd x_, y_, z_;
  int layer_ = 0;
};

struct DistributedResult {
  std::vector<Eigen::VectorXd> outputs;
  std::vector<MessageRecord> log;
  std::vector<std::vector<ReceivedMessage>> received;  // per robot, when requested
};

/// Synchronous-round execution: per layer, K rounds; in round k every robot
/// with at least one neighbor sends (y_i)_{l(k-1)} to all its neighbors.
inline DistributedResult gnn_forward_distributed(std::span<const Eigen::VectorXd> inputs, const CommGraph& graph,
                                                 const GnnWeights& weights, int step = 0,
                                                 bool keep_received = false) {
  const GnnFilters filters(weights);
  if (inputs.size() != static_cast<std::size_t>(graph.n)) throw ShapeError("inputs", "one input per robot required");
  const ShiftOperator s = shift_operator(graph);
  std::vector<GnnNode> nodes;
  nodes.reserve(inputs.size());
  for (int i = 0; i < graph.n; ++i) {
    if (inputs[i].size() != weights.input_dim()) throw ShapeError("inputs", "robot input length must equal d_0");
    nodes.emplace_back(filters, s.rows[i], inputs[i]);
  }
  DistributedResult result;
  if (keep_received) result.received.resize(inputs.size());
  std::vector<Eigen::VectorXd> sent(inputs.size());
  for (int l = 0; l < weights.layers; ++l) {
    for (auto& node : nodes) node.begin_layer(l);
    for (int k = 1; k <= weights.hops; ++k) {
      // Barrier: every robot publishes before anyone consumes.
      for (int i = 0; i < graph.n; ++i) {
        sent[i] = nodes[i].outgoing();
        if (graph.degree(i) > 0)
          result.log.push_back({step, l + 1, k, i, graph.degree(i), static_cast<std::size_t>(sent[i].size())});
      }
      for (int i = 0; i < graph.n; ++i) {
        if (keep_received)
          for (int j : graph.adjacency[i]) result.received[i].push_back({l + 1, k, j, sent[j]});
        nodes[i].receive(k, [&](int j) -> const Eigen::VectorXd& { return sent[j]; });
      }
    }
    for (auto& node : nodes) node.end_layer();
  }
  for (const auto& node : nodes) result.outputs.push_back(node.output());
  return result;
}

/// Floats one robot transmits per control step when it has a neighbor:
/// K vectors of width d_{l-1} for each layer l.
inline std::size_t aggregated_message_floats(const GnnWeights& w) {
  std::size_t total = 0;
  for (int l = 0; l < w.layers; ++l) total += static_cast<std::size_t>(w.hops) * w.dims[l];
  return total;
}

/// Floats a robot uploads per step to a central C-CVT server: its local map plus position.
inline constexpr std::size_t centralized_upload_floats(int window) noexcept {
  return static_cast<std::size_t>(window) * window + 2;
}

struct BandwidthReport {
  std::size_t total_floats = 0;          // sum of payload sizes (one broadcast counted once)
  std::size_t total_p2p_floats = 0;      // payload x receivers
  double floats_per_robot_step = 0.0;    // mean over all robot-steps
  double p2p_floats_per_robot_step = 0.0;
  std::size_t max_message_floats = 0;    // largest per-robot per-step aggregated message
  double neighbor_mean = 0.0;
  double neighbor_std = 0.0;
  std::vector<std::size_t> floats_per_step;  // aggregate over robots
};

/// Summarizes message logs of \p n_steps control steps of \p n_robots robots.
/// \p degrees holds each step's per-robot neighbor counts.
inline BandwidthReport bandwidth_report(std::span<const MessageRecord> logs, int n_robots, int n_steps,
                                        std::span<const std::vector<int>> degrees = {}) {
  BandwidthReport r;
  r.floats_per_step.assign(static_cast<std::size_t>(std::max(n_steps, 0)), 0);
  std::vector<std::size_t> per_robot_step(static_cast<std::size_t>(std::max(n_steps, 0)) * std::max(n_robots, 0), 0);
  for (const auto& m : logs) {
    r.total_floats += m.floats;
    r.total_p2p_floats += m.floats * static_cast<std::size_t>(m.n_receivers);
    if (m.step >= 0 && m.step < n_steps) {
      r.floats_per_step[m.step] += m.floats;
      if (m.sender >= 0 && m.sender < n_robots) per_robot_step[static_cast<std::size_t>(m.step) * n_robots + m.sender] += m.floats;
    }
  }
  for (std::size_t v : per_robot_step) r.max_message_floats = std::max(r.max_message_floats, v);
  const double robot_steps = static_cast<double>(n_robots) * n_steps;
  if (robot_steps > 0) {
    r.floats_per_robot_step = static_cast<double>(r.total_floats) / robot_steps;
    r.p2p_floats_per_robot_step = static_cast<double>(r.total_p2p_floats) / robot_steps;
  }
  double sum = 0.0, sum2 = 0.0;
  std::size_t count = 0;
  for (const auto& step : degrees)
    for (int d : step) {
      sum += d;
      sum2 += static_cast<double>(d) * d;
      ++count;
    }
  if (count) {
    r.neighbor_mean = sum / count;
    r.neighbor_std = std::sqrt(std::max(0.0, sum2 / count - r.neighbor_mean * r.neighbor_mean));
  }
  return r;
}

/// Mean degree of \p n robots uniform in a side x side square, over \p trials draws.
inline double monte_carlo_mean_degree(int n, double side, double comm_range, int trials, std::uint64_t seed) {
  Rng rng(seed, Stream::kMonteCarlo);
  std::vector<Vec2> p(static_cast<std::size_t>(n));
  double total = 0.0;
  for (int t = 0; t < trials; ++t) {
    for (auto& v : p) v = {rng.uniform(0.0, side), rng.uniform(0.0, side)};
    total += build_comm_graph(p, comm_range).mean_degree();
  }
  return trials ? total / trials : 0.0;
}

}  // namespace lpac
