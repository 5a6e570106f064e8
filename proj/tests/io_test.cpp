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
#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lpac/io.hpp"

namespace lpac {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("lpac_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                                                 ::testing::UnitTest::GetInstance()->current_test_info()->name())) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& f) const { return path_ / f; }

 private:
  fs::path path_;
};

std::string serialize(const PolicyWeights& p) {
  std::ostringstream out(std::ios::binary);
  write_weights(out, p);
  return out.str();
}

PolicyWeights parse(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return read_weights(in);
}

// Writes a weight file whose tensor table is given explicitly.
std::string handmade(const Architecture& a, const std::vector<std::pair<std::string, Tensor>>& table) {
  std::ostringstream out(std::ios::binary);
  detail::BinaryWriter w(out);
  w.bytes(kWeightMagic);
  w.put(a.leaky_slope);
  w.put(a.bn_eps);
  for (int v : {a.layers, a.hops, a.d0, a.hidden, a.channel, a.window}) w.put(static_cast<std::uint32_t>(v));
  w.put(static_cast<std::uint32_t>(table.size()));
  for (const auto& [n, t] : table) detail::write_tensor(w, n, t);
  return out.str();
}

std::vector<std::pair<std::string, Tensor>> table_of(const PolicyWeights& p) {
  std::vector<std::pair<std::string, Tensor>> t;
  for (const auto& [n, ptr] : named_tensors(p)) t.emplace_back(n, *ptr);
  return t;
}

std::string shape_error_tensor(const std::string& bytes) {
  try {
    parse(bytes);
  } catch (const ShapeError& e) {
    return e.tensor();
  }
  return "<no error>";
}

TEST(Weights, RoundTripBitExact) {
  const auto p = PolicyWeights::random(Architecture{}, 11);
  const auto q = parse(serialize(p));
  EXPECT_EQ(q.arch, p.arch);
  for (const auto& [name, t] : named_tensors(p)) {
    bool found = false;
    for (const auto& [n2, t2] : named_tensors(q))
      if (n2 == name) {
        found = true;
        ASSERT_EQ(std::memcmp(t->data.data(), t2->data.data(), t->data.size() * 4), 0) << name;
        ASSERT_EQ(t->dims, t2->dims) << name;
      }
    EXPECT_TRUE(found) << name;
  }
}

TEST(Weights, ByteLayout) {
  const auto bytes = serialize(PolicyWeights::zeros());
  ASSERT_EQ(bytes.substr(0, 6), "LPACW1");
  float slope;
  std::memcpy(&slope, bytes.data() + 6, 4);
  EXPECT_EQ(slope, 0.01f);
  std::uint32_t layers, count;
  std::memcpy(&layers, bytes.data() + 14, 4);
  std::memcpy(&count, bytes.data() + 38, 4);
  EXPECT_EQ(layers, 5u);
  const auto zero = PolicyWeights::zeros();
  const auto table = named_tensors(zero);
  EXPECT_EQ(count, table.size());
  std::size_t expected = 42;
  for (const auto& [n, t] : table) expected += 4 + n.size() + 4 + 8 * t->rank() + 4 * t->size();
  EXPECT_EQ(bytes.size(), expected);
}

TEST(Weights, TensorOrderIrrelevant) {
  const auto p = PolicyWeights::random(Architecture{}, 2);
  auto table = table_of(p);
  std::reverse(table.begin(), table.end());
  EXPECT_EQ(parse(handmade(p.arch, table)).gnn.filters[4][3], p.gnn.filters[4][3]);
}

TEST(Weights, WrongMagic) {
  auto bytes = serialize(PolicyWeights::zeros());
  bytes[5] = '9';
  EXPECT_THROW(parse(bytes), FormatError);
}

TEST(Weights, Truncated) {
  const auto bytes = serialize(PolicyWeights::zeros());
  EXPECT_THROW(parse(bytes.substr(0, 3)), FormatError);
  for (std::size_t cut : {std::size_t{20}, std::size_t{60}, bytes.size() - 1})
    EXPECT_THROW(parse(bytes.substr(0, cut)), TruncatedError) << cut;
}

TEST(Weights, TrailingBytes) { EXPECT_THROW(parse(serialize(PolicyWeights::zeros()) + "x"), FormatError); }

TEST(Weights, ShapeMismatchNamesTensor) {
  const auto p = PolicyWeights::zeros();
  auto table = table_of(p);
  for (auto& [n, t] : table)
    if (n == "gnn.H.3.2") t = Tensor({256, 128});
  EXPECT_EQ(shape_error_tensor(handmade(p.arch, table)), "gnn.H.3.2");
}

TEST(Weights, MissingUnknownAndDuplicate) {
  const auto p = PolicyWeights::zeros();
  auto missing = table_of(p);
  missing.erase(missing.begin() + 4);
  EXPECT_EQ(shape_error_tensor(handmade(p.arch, missing)), "cnn.block1.bn.running_mean");
  auto unknown = table_of(p);
  unknown.emplace_back("gnn.H.6.0", Tensor({256, 256}));
  EXPECT_EQ(shape_error_tensor(handmade(p.arch, unknown)), "gnn.H.6.0");
  auto dup = table_of(p);
  dup.push_back(dup.front());
  EXPECT_EQ(shape_error_tensor(handmade(p.arch, dup)), "cnn.block1.conv.weight");
}

TEST(Weights, HeaderDefinesManifest) {
  Architecture a;
  a.layers = 2;
  a.hops = 1;
  a.hidden = 16;
  a.channel = 8;
  a.window = 64;
  const auto p = PolicyWeights::random(a, 1);
  const auto q = parse(serialize(p));
  EXPECT_EQ(q.arch, a);
  EXPECT_EQ(q.gnn.filters.size(), 2u);
  // Same tensors under the default header do not fit.
  EXPECT_THROW(parse(handmade(Architecture{}, table_of(p))), ShapeError);
}

TEST(Weights, BadHeaderRejected) {
  Architecture a;
  a.d0 = 40;
  EXPECT_THROW(parse(handmade(a, {})), FormatError);
}

TEST(Weights, FileHelpers) {
  TempDir dir;
  const auto p = PolicyWeights::random(Architecture{}, 4);
  save_weights(dir / "w.bin", p);
  EXPECT_EQ(load_weights(dir / "w.bin").mlp.out_bias, p.mlp.out_bias);
  EXPECT_THROW(load_weights(dir / "absent.bin"), Error);
}

TEST(Tensors, RoundTrip) {
  TempDir dir;
  Tensor a({2, 3});
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<float>(i) * 0.1f;
  const std::vector<NamedTensor> in{{"a", a}, {"empty", Tensor({0})}, {"scalarish", Tensor({1}, 7.0f)}};
  save_tensors(dir / "t.bin", in);
  EXPECT_EQ(load_tensors(dir / "t.bin"), in);
}

DatasetSample sample(std::uint64_t n, std::uint64_t c, std::uint64_t env, std::uint64_t step) {
  DatasetSample s;
  s.env_id = env;
  s.step = step;
  s.maps.resize(n * 4 * c * c);
  for (std::size_t i = 0; i < s.maps.size(); ++i) s.maps[i] = static_cast<float>(i % 97) / 97.0f;
  for (auto* v : {&s.positions, &s.normalized_positions, &s.targets}) v->assign(2 * n, static_cast<float>(step) + 0.5f);
  if (n > 1) s.edges = {{0, 1}};
  return s;
}

TEST(Dataset, RoundTripAndSize) {
  TempDir dir;
  const std::vector<DatasetSample> samples{sample(3, 4, 0, 5), sample(3, 4, 0, 10), sample(3, 4, 1, 5)};
  write_dataset(dir / "d.bin", 3, 4, samples);
  const auto [h, got] = read_dataset(dir / "d.bin");
  EXPECT_EQ(h, (DatasetHeader{3, 3, 4}));
  EXPECT_EQ(got, samples);
  EXPECT_EQ(fs::file_size(dir / "d.bin"), kDatasetHeaderBytes + 3 * dataset_record_bytes(3, 4, 1));
}

TEST(Dataset, EmptyDataset) {
  TempDir dir;
  write_dataset(dir / "d.bin", 2, 4, {});
  EXPECT_TRUE(read_dataset(dir / "d.bin").second.empty());
  EXPECT_EQ(fs::file_size(dir / "d.bin"), kDatasetHeaderBytes);
}

TEST(Dataset, WriterRejectsBadSample) {
  TempDir dir;
  DatasetWriter w(dir / "d.bin", 2, 4);
  auto s = sample(2, 4, 0, 0);
  s.targets.pop_back();
  EXPECT_THROW(w.append(s), ShapeError);
  s = sample(2, 4, 0, 0);
  s.edges = {{0, 2}};
  EXPECT_THROW(w.append(s), ShapeError);
}

TEST(Dataset, TruncatedAndTrailing) {
  TempDir dir;
  write_dataset(dir / "d.bin", 2, 4, std::vector<DatasetSample>{sample(2, 4, 0, 0), sample(2, 4, 0, 5)});
  std::string bytes;
  {
    std::ifstream in(dir / "d.bin", std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto write = [&](const std::string& b) {
    std::ofstream out(dir / "x.bin", std::ios::binary | std::ios::trunc);
    out << b;
  };
  write(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_dataset(dir / "x.bin"), TruncatedError);
  write(bytes + "zz");
  EXPECT_THROW(read_dataset(dir / "x.bin"), FormatError);
  write("LPACX1" + bytes.substr(6));
  EXPECT_THROW(read_dataset(dir / "x.bin"), FormatError);
}

TEST(Metrics, RoundTripBitExact) {
  TempDir dir;
  const std::vector<MetricsRow> rows{{0, "lpac", 3, 1234.5678901234567, 1.0, 0.390625},
                                     {1, "lpac", 3, 0.1 + 0.2, 1.0 / 3.0, 100.0}};
  write_metrics(dir / "m.csv", rows);
  const auto got = read_metrics(dir / "m.csv");
  ASSERT_EQ(got.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(got[i].step, rows[i].step);
    EXPECT_EQ(got[i].controller, rows[i].controller);
    EXPECT_EQ(got[i].cost, rows[i].cost);
    EXPECT_EQ(got[i].normalized_cost, rows[i].normalized_cost);
    EXPECT_EQ(got[i].observed_area_pct, rows[i].observed_area_pct);
  }
}

TEST(Metrics, EmptySeriesRejected) {
  TempDir dir;
  EXPECT_THROW(write_metrics(dir / "m.csv", std::vector<MetricsRow>{}), ValidationError);
}

TEST(Metrics, MalformedRowReportsLine) {
  TempDir dir;
  {
    std::ofstream out(dir / "m.csv");
    out << kMetricsHeader << "\n0,lpac,0,1,1,1\n1,lpac,0,x,1,1\n";
  }
  try {
    read_metrics(dir / "m.csv");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(RunConfigJson, RoundTripAndDefaults) {
  RunConfig c = desk_scale_preset();
  c.controllers = {"lpac", "d-cvt"};
  c.noise_sigma = 5;
  c.world.seed = 99;
  const nlohmann::json j = c;
  const auto back = j.get<RunConfig>();
  EXPECT_EQ(back.world.side_length, 256);
  EXPECT_EQ(back.world.seed, 99u);
  EXPECT_EQ(back.controllers, c.controllers);
  EXPECT_EQ(back.noise_sigma, 5.0);
  const auto partial = nlohmann::json::parse(R"({"world": {"n_robots": 4}, "horizon": 10})").get<RunConfig>();
  EXPECT_EQ(partial.world.n_robots, 4);
  EXPECT_EQ(partial.world.side_length, 1024);
  EXPECT_EQ(partial.horizon, 10);
}

TEST(RunConfigJson, BadFile) {
  TempDir dir;
  {
    std::ofstream out(dir / "c.json");
    out << "{ not json";
  }
  EXPECT_THROW(load_run_config(dir / "c.json"), FormatError);
}

TEST(FormatDouble, ShortestRoundTrip) {
  for (double v : {0.0, 1.0, 0.1, 1e-300, 123456789.123, -2.5}) EXPECT_EQ(parse_double_text(format_double(v)), v);
  EXPECT_EQ(format_double(1.0), "1");
  EXPECT_THROW(parse_double_text("1.0abc"), FormatError);
}

}  // namespace
}  // namespace lpac
