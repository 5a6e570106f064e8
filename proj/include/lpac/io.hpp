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
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpac/action.hpp"
#include "lpac/errors.hpp"
#include "lpac/tensor.hpp"
#include "lpac/world.hpp"

namespace lpac {

// All binary containers are little-endian; integers unsigned, floats IEEE-754 binary32.
//
// Weight file:
//   "LPACW1" | f32 leaky_slope | f32 bn_eps | u32 L | u32 K | u32 d_0 | u32 d_l
//   | u32 channel | u32 window | u32 tensor_count | tensor records
// Tensor record:
//   u32 name_len | name (UTF-8) | u32 rank | u64 dims[rank] | f32 data[prod(dims)]
// Tensor container (snapshots):
//   "LPACT1" | u32 tensor_count | tensor records
// Dataset file:
//   "LPACD1" | u64 n_samples | u64 n_robots | u64 channel | samples
// Dataset sample (n = n_robots, C = channel):
//   u64 env_id | u64 step | f32 maps[n][4][C][C] | f32 position[n][2]
//   | f32 normalized_position[n][2] | f32 target_velocity[n][2]
//   | u64 edge_count | u32 edges[edge_count][2]

inline constexpr std::string_view kWeightMagic = "LPACW1";
inline constexpr std::string_view kTensorMagic = "LPACT1";
inline constexpr std::string_view kDatasetMagic = "LPACD1";

namespace detail {

template <class T>
T to_little(T v) noexcept {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  template <class T>
  void put(T v) {
    v = to_little(v);
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void bytes(std::string_view s) { out_.write(s.data(), static_cast<std::streamsize>(s.size())); }
  void floats(std::span<const float> v) {
    if constexpr (std::endian::native == std::endian::little) {
      out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size_bytes()));
    } else {
      for (float f : v) put(f);
    }
  }
  void u32s(std::span<const std::uint32_t> v) {
    for (auto x : v) put(x);
  }

 private:
  std::ostream& out_;
};

class BinaryReader {
 public:
  BinaryReader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

  template <class T>
  T get() {
    T v;
    read(reinterpret_cast<char*>(&v), sizeof v);
    return to_little(v);
  }
  std::string bytes(std::size_t n) {
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  void floats(std::span<float> v) {
    read(reinterpret_cast<char*>(v.data()), v.size_bytes());
    if constexpr (std::endian::native == std::endian::big)
      for (float& f : v) f = to_little(f);
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  void read(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw TruncatedError(what_ + ": unexpected end of file");
  }

  std::istream& in_;
  std::string what_;
};

inline void expect_magic(BinaryReader& r, std::string_view magic, const std::string& what) {
  std::string got;
  try {
    got = r.bytes(magic.size());
  } catch (const TruncatedError&) {
    throw FormatError(what + ": file too short for magic '" + std::string(magic) + "'");
  }
  if (got != magic) throw FormatError(what + ": bad magic, expected '" + std::string(magic) + "'");
}

inline void write_tensor(BinaryWriter& w, std::string_view name, const Tensor& t) {
  w.put(static_cast<std::uint32_t>(name.size()));
  w.bytes(name);
  w.put(static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.dims) w.put(static_cast<std::uint64_t>(d));
  w.floats(t.data);
}

inline constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 34;

inline std::pair<std::string, Tensor> read_tensor(BinaryReader& r) {
  const auto name_len = r.get<std::uint32_t>();
  if (name_len > 4096) throw FormatError("tensor name length " + std::to_string(name_len) + " is implausible");
  std::string name = r.bytes(name_len);
  const auto rank = r.get<std::uint32_t>();
  if (rank > 8) throw ShapeError(name, "rank " + std::to_string(rank) + " is implausible");
  Shape dims(rank);
  std::uint64_t count = 1;
  for (auto& d : dims) {
    d = r.get<std::uint64_t>();
    if (d != 0 && count > kMaxElements / d) throw ShapeError(name, "element count overflows");
    count *= d;
  }
  Tensor t;
  t.dims = std::move(dims);
  // Grow in chunks so a corrupt count hits end-of-file before a huge allocation.
  constexpr std::uint64_t kChunk = std::uint64_t{1} << 20;
  for (std::uint64_t done = 0; done < count;) {
    const std::uint64_t n = std::min(kChunk, count - done);
    t.data.resize(done + n);
    r.floats(std::span<float>(t.data).subspan(done, n));
    done += n;
  }
  return {std::move(name), std::move(t)};
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

}  // namespace detail

/// Canonical (name, tensor) table of a policy, in file order.
template <class Policy>
auto named_tensors(Policy& p) {
  using T = std::conditional_t<std::is_const_v<Policy>, const Tensor, Tensor>;
  std::vector<std::pair<std::string, T*>> out;
  for (std::size_t i = 0; i < p.cnn.blocks.size(); ++i) {
    auto& b = p.cnn.blocks[i];
    const std::string pre = "cnn.block" + std::to_string(i + 1) + ".";
    out.emplace_back(pre + "conv.weight", &b.weight);
    out.emplace_back(pre + "conv.bias", &b.bias);
    out.emplace_back(pre + "bn.weight", &b.bn_gamma);
    out.emplace_back(pre + "bn.bias", &b.bn_beta);
    out.emplace_back(pre + "bn.running_mean", &b.bn_mean);
    out.emplace_back(pre + "bn.running_var", &b.bn_var);
  }
  out.emplace_back("cnn.linear.weight", &p.cnn.linear_weight);
  out.emplace_back("cnn.linear.bias", &p.cnn.linear_bias);
  for (int l = 0; l < p.gnn.layers; ++l)
    for (int k = 0; k <= p.gnn.hops; ++k) out.emplace_back(GnnWeights::tensor_name(l, k), &p.gnn.filters[l][k]);
  out.emplace_back("mlp.fc1.weight", &p.mlp.fc1_weight);
  out.emplace_back("mlp.fc1.bias", &p.mlp.fc1_bias);
  out.emplace_back("mlp.fc2.weight", &p.mlp.fc2_weight);
  out.emplace_back("mlp.fc2.bias", &p.mlp.fc2_bias);
  out.emplace_back("mlp.out.weight", &p.mlp.out_weight);
  out.emplace_back("mlp.out.bias", &p.mlp.out_bias);
  return out;
}

inline void write_weights(std::ostream& out, const PolicyWeights& p) {
  p.validate();
  detail::BinaryWriter w(out);
  w.bytes(kWeightMagic);
  w.put(p.arch.leaky_slope);
  w.put(p.arch.bn_eps);
  for (int v : {p.arch.layers, p.arch.hops, p.arch.d0, p.arch.hidden, p.arch.channel, p.arch.window})
    w.put(static_cast<std::uint32_t>(v));
  const auto table = named_tensors(p);
  w.put(static_cast<std::uint32_t>(table.size()));
  for (const auto& [name, t] : table) detail::write_tensor(w, name, *t);
}

/// Reads a policy and checks every tensor against the manifest implied by the header.
inline PolicyWeights read_weights(std::istream& in) {
  detail::BinaryReader r(in, "weight file");
  detail::expect_magic(r, kWeightMagic, "weight file");
  Architecture arch;
  arch.leaky_slope = r.get<float>();
  arch.bn_eps = r.get<float>();
  int* fields[] = {&arch.layers, &arch.hops, &arch.d0, &arch.hidden, &arch.channel, &arch.window};
  for (int* f : fields) {
    const auto v = r.get<std::uint32_t>();
    if (v > (1u << 20)) throw FormatError("weight file: implausible header value " + std::to_string(v));
    *f = static_cast<int>(v);
  }
  try {
    arch.validate();
  } catch (const ValidationError& e) {
    throw FormatError(std::string("weight file header: ") + e.what());
  }
  PolicyWeights p = PolicyWeights::zeros(arch);
  std::map<std::string, Tensor*> expected;
  for (auto& [name, t] : named_tensors(p)) expected.emplace(name, t);
  const auto count = r.get<std::uint32_t>();
  std::map<std::string, bool> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto [name, t] = detail::read_tensor(r);
    const auto it = expected.find(name);
    if (it == expected.end()) throw ShapeError(name, "not part of the architecture manifest");
    if (seen[name]) throw ShapeError(name, "appears twice");
    seen[name] = true;
    if (t.dims != it->second->dims)
      throw ShapeError(name, "expected " + shape_string(it->second->dims) + ", got " + shape_string(t.dims));
    *it->second = std::move(t);
  }
  for (const auto& [name, t] : expected)
    if (!seen[name]) throw ShapeError(name, "missing from weight file");
  if (!r.at_end()) throw FormatError("weight file: trailing bytes after tensor table");
  p.validate();
  return p;
}

inline void save_weights(const std::filesystem::path& path, const PolicyWeights& p) {
  auto out = detail::open_out(path);
  write_weights(out, p);
  if (!out) throw Error("failed writing " + path.string());
}

inline PolicyWeights load_weights(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  return read_weights(in);
}

using NamedTensor = std::pair<std::string, Tensor>;

inline void save_tensors(const std::filesystem::path& path, std::span<const NamedTensor> tensors) {
  auto out = detail::open_out(path);
  detail::BinaryWriter w(out);
  w.bytes(kTensorMagic);
  w.put(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) detail::write_tensor(w, name, t);
  if (!out) throw Error("failed writing " + path.string());
}

inline std::vector<NamedTensor> load_tensors(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  detail::BinaryReader r(in, "tensor container");
  detail::expect_magic(r, kTensorMagic, "tensor container");
  const auto count = r.get<std::uint32_t>();
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) out.push_back(detail::read_tensor(r));
  return out;
}

// ---------------------------------------------------------------- dataset

struct DatasetHeader {
  std::uint64_t n_samples = 0;
  std::uint64_t n_robots = 0;
  std::uint64_t channel = 32;

  friend bool operator==(const DatasetHeader&, const DatasetHeader&) = default;
};

/// One time step of one environment: a state-action pair per robot.
struct DatasetSample {
  std::uint64_t env_id = 0;
  std::uint64_t step = 0;
  std::vector<float> maps;                 // n * 4 * C * C
  std::vector<float> positions;            // n * 2
  std::vector<float> normalized_positions; // n * 2
  std::vector<float> targets;              // n * 2
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;

  friend bool operator==(const DatasetSample&, const DatasetSample&) = default;
};

/// Bytes of one sample record.
inline constexpr std::uint64_t dataset_record_bytes(std::uint64_t n_robots, std::uint64_t channel,
                                                    std::uint64_t edge_count) noexcept {
  return 8 + 8 + 4 * (n_robots * 4 * channel * channel + 3 * n_robots * 2) + 8 + 8 * edge_count;
}

inline constexpr std::uint64_t kDatasetHeaderBytes = 6 + 3 * 8;

inline void write_dataset_header(std::ostream& out, const DatasetHeader& h) {
  detail::BinaryWriter w(out);
  w.bytes(kDatasetMagic);
  w.put(h.n_samples);
  w.put(h.n_robots);
  w.put(h.channel);
}

inline DatasetHeader read_dataset_header(std::istream& in) {
  detail::BinaryReader r(in, "dataset");
  detail::expect_magic(r, kDatasetMagic, "dataset");
  DatasetHeader h;
  h.n_samples = r.get<std::uint64_t>();
  h.n_robots = r.get<std::uint64_t>();
  h.channel = r.get<std::uint64_t>();
  if (h.n_robots > (1u << 20) || h.channel > (1u << 12)) throw FormatError("dataset: implausible header");
  return h;
}

/// Streams samples to disk; the sample count in the header is patched on close().
class DatasetWriter {
 public:
  DatasetWriter(const std::filesystem::path& path, std::uint64_t n_robots, std::uint64_t channel)
      : path_(path), out_(detail::open_out(path)), header_{0, n_robots, channel} {
    write_dataset_header(out_, header_);
  }
  DatasetWriter(const DatasetWriter&) = delete;
  DatasetWriter& operator=(const DatasetWriter&) = delete;
  ~DatasetWriter() {
    try {
      close();
    } catch (...) {
    }
  }

  void append(const DatasetSample& s) {
    const std::uint64_t n = header_.n_robots, c = header_.channel;
    if (s.maps.size() != n * 4 * c * c) throw ShapeError("maps", "sample maps size does not match header");
    if (s.positions.size() != 2 * n) throw ShapeError("positions", "expected n_robots x 2");
    if (s.normalized_positions.size() != 2 * n) throw ShapeError("normalized_positions", "expected n_robots x 2");
    if (s.targets.size() != 2 * n) throw ShapeError("targets", "expected n_robots x 2");
    for (const auto& [a, b] : s.edges)
      if (a >= n || b >= n) throw ShapeError("edges", "edge endpoint out of range");
    detail::BinaryWriter w(out_);
    w.put(s.env_id);
    w.put(s.step);
    w.floats(s.maps);
    w.floats(s.positions);
    w.floats(s.normalized_positions);
    w.floats(s.targets);
    w.put(static_cast<std::uint64_t>(s.edges.size()));
    for (const auto& [a, b] : s.edges) {
      w.put(a);
      w.put(b);
    }
    ++header_.n_samples;
  }

  std::uint64_t count() const noexcept { return header_.n_samples; }

  void close() {
    if (!out_.is_open()) return;
    out_.seekp(0);
    write_dataset_header(out_, header_);
    out_.close();
    if (out_.fail()) throw Error("failed writing " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  DatasetHeader header_;
};

/// Sequential reader; validates record sizes against the header.
class DatasetReader {
 public:
  explicit DatasetReader(const std::filesystem::path& path) : in_(detail::open_in(path)) {
    header_ = read_dataset_header(in_);
  }

  const DatasetHeader& header() const noexcept { return header_; }

  bool next(DatasetSample& s) {
    if (read_ == header_.n_samples) {
      detail::BinaryReader r(in_, "dataset");
      if (!r.at_end()) throw FormatError("dataset: trailing bytes after the declared samples");
      return false;
    }
    detail::BinaryReader r(in_, "dataset sample " + std::to_string(read_));
    const std::uint64_t n = header_.n_robots, c = header_.channel;
    s.env_id = r.get<std::uint64_t>();
    s.step = r.get<std::uint64_t>();
    s.maps.resize(n * 4 * c * c);
    r.floats(s.maps);
    for (auto* v : {&s.positions, &s.normalized_positions, &s.targets}) {
      v->resize(2 * n);
      r.floats(*v);
    }
    const auto edges = r.get<std::uint64_t>();
    if (edges > n * n) throw FormatError("dataset: implausible edge count");
    s.edges.resize(edges);
    for (auto& [a, b] : s.edges) {
      a = r.get<std::uint32_t>();
      b = r.get<std::uint32_t>();
      if (a >= n || b >= n) throw FormatError("dataset: edge endpoint out of range");
    }
    ++read_;
    return true;
  }

 private:
  std::ifstream in_;
  DatasetHeader header_;
  std::uint64_t read_ = 0;
};

inline void write_dataset(const std::filesystem::path& path, std::uint64_t n_robots, std::uint64_t channel,
                          std::span<const DatasetSample> samples) {
  DatasetWriter w(path, n_robots, channel);
  for (const auto& s : samples) w.append(s);
  w.close();
}

inline std::pair<DatasetHeader, std::vector<DatasetSample>> read_dataset(const std::filesystem::path& path) {
  DatasetReader r(path);
  std::vector<DatasetSample> out;
  DatasetSample s;
  while (r.next(s)) out.push_back(s);
  return {r.header(), std::move(out)};
}

// ---------------------------------------------------------------- metrics

struct MetricsRow {
  int step = 0;
  std::string controller;
  std::uint64_t env_id = 0;
  double cost = 0.0;
  double normalized_cost = 0.0;
  double observed_area_pct = 0.0;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

inline constexpr std::string_view kMetricsHeader = "step,controller,env_id,cost,normalized_cost,observed_area_pct";

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double_text(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw FormatError("not a number: '" + std::string(s) + "'");
  return v;
}

inline void write_metrics(std::ostream& out, std::span<const MetricsRow> rows, bool header = true) {
  if (header) out << kMetricsHeader << '\n';
  for (const auto& r : rows)
    out << r.step << ',' << r.controller << ',' << r.env_id << ',' << format_double(r.cost) << ','
        << format_double(r.normalized_cost) << ',' << format_double(r.observed_area_pct) << '\n';
}

inline void write_metrics(const std::filesystem::path& path, std::span<const MetricsRow> rows) {
  if (rows.empty()) throw ValidationError("metrics series is empty");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_metrics(out, rows);
}

inline std::vector<MetricsRow> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw FormatError("metrics CSV: missing header");
  std::vector<MetricsRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 6) throw ParseError(line_no, "expected 6 columns");
    MetricsRow r;
    r.controller = f[1];
    const auto int_field = [&](const std::string& t, auto& out) {
      const auto res = std::from_chars(t.data(), t.data() + t.size(), out);
      if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) throw ParseError(line_no, "not an integer: '" + t + "'");
    };
    int_field(f[0], r.step);
    int_field(f[2], r.env_id);
    try {
      r.cost = parse_double_text(f[3]);
      r.normalized_cost = parse_double_text(f[4]);
      r.observed_area_pct = parse_double_text(f[5]);
    } catch (const FormatError& e) {
      throw ParseError(line_no, e.what());
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------- run configuration

/// Mirrors WorldParams plus what an experiment needs. JSON keys equal member names.
struct RunConfig {
  WorldParams world;
  int n_features = 32;
  std::string controller = "clairvoyant";
  std::vector<std::string> controllers;  // batch evaluation
  int horizon = 900;
  int n_envs = 1;
  std::uint64_t env_id = 0;
  double noise_sigma = 0.0;
  double gain_k = 1.0;
  double converge_eps = 1e-2;
  std::string weights;
  std::string feature_file;
  int threads = 0;
};

inline void to_json(nlohmann::json& j, const WorldParams& p) {
  j = {{"side_length", p.side_length}, {"n_robots", p.n_robots}, {"sensor_side", p.sensor_side},
       {"comm_range", p.comm_range},   {"max_speed", p.max_speed}, {"dt", p.dt},
       {"seed", p.seed}};
}

inline void from_json(const nlohmann::json& j, WorldParams& p) {
  p.side_length = j.value("side_length", p.side_length);
  p.n_robots = j.value("n_robots", p.n_robots);
  p.sensor_side = j.value("sensor_side", p.sensor_side);
  p.comm_range = j.value("comm_range", p.comm_range);
  p.max_speed = j.value("max_speed", p.max_speed);
  p.dt = j.value("dt", p.dt);
  p.seed = j.value("seed", p.seed);
}

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"world", c.world},           {"n_features", c.n_features},   {"controller", c.controller},
       {"controllers", c.controllers}, {"horizon", c.horizon},       {"n_envs", c.n_envs},
       {"env_id", c.env_id},         {"noise_sigma", c.noise_sigma}, {"gain_k", c.gain_k},
       {"converge_eps", c.converge_eps}, {"weights", c.weights},     {"feature_file", c.feature_file},
       {"threads", c.threads}};
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
  if (j.contains("world")) c.world = j.at("world").get<WorldParams>();
  c.n_features = j.value("n_features", c.n_features);
  c.controller = j.value("controller", c.controller);
  c.controllers = j.value("controllers", c.controllers);
  c.horizon = j.value("horizon", c.horizon);
  c.n_envs = j.value("n_envs", c.n_envs);
  c.env_id = j.value("env_id", c.env_id);
  c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
  c.gain_k = j.value("gain_k", c.gain_k);
  c.converge_eps = j.value("converge_eps", c.converge_eps);
  c.weights = j.value("weights", c.weights);
  c.feature_file = j.value("feature_file", c.feature_file);
  c.threads = j.value("threads", c.threads);
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in).get<RunConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("run config " + path.string() + ": " + e.what());
  }
}

/// Full-scale preset: 1024^2 world, 32 robots, 32 features, 100 environments.
inline RunConfig full_scale_preset() {
  RunConfig c;
  c.n_envs = 100;
  c.horizon = 900;
  return c;
}

/// Desk-scale preset used by the acceptance suite: 256^2 world, 8 robots,
/// 8 features, 20 environments.
inline RunConfig desk_scale_preset() {
  RunConfig c;
  c.world.side_length = 256;
  c.world.n_robots = 8;
  c.n_features = 8;
  c.n_envs = 20;
  c.horizon = 900;
  return c;
}

}  // namespace lpac
