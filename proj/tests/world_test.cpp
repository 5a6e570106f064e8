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

#include <cmath>
#include <sstream>

#include "lpac/world.hpp"
#include "oracles.hpp"

namespace lpac {
namespace {

WorldParams params(int side = 1024, int robots = 1) {
  WorldParams p;
  p.side_length = side;
  p.n_robots = robots;
  return p;
}

std::shared_ptr<const ImportanceField> uniform_field(int side, double v = 1.0) {
  return std::make_shared<const ImportanceField>(Grid<double>(side, v));
}

TEST(WorldParams, DefaultsAreValid) { EXPECT_NO_THROW(WorldParams{}.validate()); }

TEST(WorldParams, RejectsOddSensorAndOverspeed) {
  WorldParams p;
  p.sensor_side = 63;
  EXPECT_THROW(p.validate(), ValidationError);
  p = WorldParams{};
  p.max_speed = 200.0;  // 40 m per step > 32
  EXPECT_THROW(p.validate(), ValidationError);
  p = WorldParams{};
  p.sensor_side = 1024;
  EXPECT_THROW(p.validate(), ValidationError);
}

TEST(GenerateFeatures, ZeroFeaturesIsEmpty) {
  Rng rng(7, Stream::kFeatures);
  EXPECT_TRUE(generate_features(params(), 0, rng).empty());
}

TEST(GenerateFeatures, RangesAndDeterminism) {
  Rng a(7, Stream::kFeatures), b(7, Stream::kFeatures);
  const auto fa = generate_features(params(), 32, a);
  const auto fb = generate_features(params(), 32, b);
  ASSERT_EQ(fa.size(), 32u);
  EXPECT_EQ(fa, fb);
  for (const auto& f : fa) {
    EXPECT_GE(f.center.x, 0.0);
    EXPECT_LT(f.center.x, 1024.0);
    EXPECT_GE(f.center.y, 0.0);
    EXPECT_LT(f.center.y, 1024.0);
    EXPECT_GE(f.sigma, 40.0);
    EXPECT_LE(f.sigma, 60.0);
    EXPECT_GE(f.scale, 6.0);
    EXPECT_LE(f.scale, 10.0);
  }
}

TEST(GenerateFeatures, NegativeCountRejected) {
  Rng rng(1, Stream::kFeatures);
  EXPECT_THROW(generate_features(params(), -1, rng), ValidationError);
}

TEST(GenerateIdf, EmptyFeatureListIsZero) {
  const auto f = generate_idf({}, params(64));
  EXPECT_EQ(f.max(), 0.0);
}

TEST(GenerateIdf, TruncatedBeyondTwoSigma) {
  const std::vector<FeatureSpec> fs{{{100, 100}, 50, 8}};
  const auto f = generate_idf(fs, params(512));
  // Cell centered at (250.5, 100.5) is ~150 m away.
  EXPECT_EQ(f(250, 100), 0.0);
  for (int y = 0; y < 512; ++y)
    for (int x = 0; x < 512; ++x) {
      const double d = std::hypot(x + 0.5 - 100.0, y + 0.5 - 100.0);
      if (d > 100.0) {
        ASSERT_EQ(f(x, y), 0.0) << x << "," << y;
      } else if (d < 99.0) {
        ASSERT_GT(f(x, y), 0.0) << x << "," << y;
      }
    }
}

TEST(GenerateIdf, MaxIsExactlyOne) {
  Rng rng(3, Stream::kFeatures);
  for (int n : {1, 5, 32}) {
    const auto f = generate_idf(generate_features(params(256), n, rng), params(256));
    EXPECT_EQ(f.max(), 1.0);
  }
}

TEST(GenerateIdf, CellIntegralMatchesQuadrature) {
  for (Vec2 mu : {Vec2{256.5, 256.5}, Vec2{200.3, 310.8}}) {
    const FeatureSpec fs{mu, 50.0, 8.0};
    const auto raw = raw_importance(std::span(&fs, 1), 512);
    const int cx = static_cast<int>(mu.x), cy = static_cast<int>(mu.y);
    const double expected = 8.0 * oracle::gaussian_cell_integral(mu, 50.0, cx, cx + 1.0, cy, cy + 1.0);
    EXPECT_NEAR(raw(cx, cy) / expected, 1.0, 1e-6);
    // Also a cell well off-center, where the erf differences are small.
    const double off = 8.0 * oracle::gaussian_cell_integral(mu, 50.0, cx + 60, cx + 61.0, cy - 70, cy - 69.0);
    EXPECT_NEAR(raw(cx + 60, cy - 70) / off, 1.0, 1e-6);
    const auto normalized = generate_idf(std::span(&fs, 1), params(512));
    EXPECT_EQ(normalized(cx, cy), 1.0);
  }
}

TEST(GenerateIdf, RejectsOutOfBoundsFeature) {
  const std::vector<FeatureSpec> fs{{{600, 100}, 50, 8}};
  EXPECT_THROW(generate_idf(fs, params(512)), ValidationError);
}

TEST(Sense, CenterObservesExactly64x64) {
  auto w = make_world(params(), uniform_field(1024), std::vector<Vec2>{{512.0, 512.0}});
  EXPECT_EQ(w.robots[0].observed_count, 64u * 64u);
  EXPECT_EQ(w.team_observed, 64u * 64u);
}

TEST(Sense, CornerObservesClippedQuadrant) {
  auto w = make_world(params(), uniform_field(1024), std::vector<Vec2>{{0.0, 0.0}});
  // Brute-force count of cells whose centers lie in [-32, 32)^2 and in the workspace.
  std::size_t expected = 0;
  for (int y = 0; y < 1024; ++y)
    for (int x = 0; x < 1024; ++x)
      if (x + 0.5 >= -32 && x + 0.5 < 32 && y + 0.5 >= -32 && y + 0.5 < 32) ++expected;
  EXPECT_EQ(expected, 32u * 32u);
  EXPECT_EQ(w.robots[0].observed_count, expected);
}

TEST(Sense, IdempotentWithoutMotion) {
  auto w = make_world(params(), uniform_field(1024), std::vector<Vec2>{{300.2, 700.9}});
  const Mask before = w.robots[0].observed_mask;
  sense(w, 0);
  EXPECT_EQ(w.robots[0].observed_mask, before);
}

TEST(Sense, ObservedImportanceMatchesField) {
  Rng rng(11, Stream::kFeatures);
  const auto p = params(256);
  auto idf = std::make_shared<const ImportanceField>(generate_idf(generate_features(p, 4, rng), p));
  auto w = make_world(p, idf, std::vector<Vec2>{{128, 128}});
  const auto map = w.observed_importance_map(0);
  for (int y = 0; y < 256; ++y)
    for (int x = 0; x < 256; ++x)
      ASSERT_EQ(map(x, y), w.robots[0].observed_mask(x, y) ? (*idf)(x, y) : 0.0);
}

TEST(Step, ZeroVelocityKeepsPositions) {
  auto w = make_world(params(1024, 2), uniform_field(1024), std::vector<Vec2>{{10, 10}, {500, 600}});
  const auto before = w.positions();
  step(w, std::vector<Vec2>{{0, 0}, {0, 0}});
  EXPECT_EQ(w.positions(), before);
  EXPECT_EQ(w.step_count, 1);
}

TEST(Step, SpeedIsClampedPreservingDirection) {
  auto w = make_world(params(), uniform_field(1024), std::vector<Vec2>{{100, 100}});
  step(w, std::vector<Vec2>{{10, 0}});
  EXPECT_DOUBLE_EQ(w.robots[0].position.x, 101.0);
  EXPECT_DOUBLE_EQ(w.robots[0].position.y, 100.0);
  step(w, std::vector<Vec2>{{30, 40}});  // |v| = 50 -> 5, direction (0.6, 0.8)
  EXPECT_NEAR(w.robots[0].position.x, 101.6, 1e-12);
  EXPECT_NEAR(w.robots[0].position.y, 100.8, 1e-12);
}

TEST(Step, ClampsToWorkspace) {
  auto w = make_world(params(), uniform_field(1024), std::vector<Vec2>{{0.3, 50}});
  step(w, std::vector<Vec2>{{-5, 0}});
  EXPECT_EQ(w.robots[0].position.x, 0.0);
}

TEST(Step, NonFiniteVelocityNamesRobot) {
  auto w = make_world(params(1024, 3), uniform_field(1024), std::vector<Vec2>{{1, 1}, {2, 2}, {3, 3}});
  try {
    step(w, std::vector<Vec2>{{0, 0}, {0, 0}, {NAN, 0}});
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("robot 2"), std::string::npos);
  }
}

TEST(Step, WrongVelocityCountRejected) {
  auto w = make_world(params(1024, 2), uniform_field(1024), std::vector<Vec2>{{1, 1}, {2, 2}});
  EXPECT_THROW(step(w, std::vector<Vec2>{{0, 0}}), ValidationError);
}

TEST(Step, ObservationMonotoneAndPositionsClamped) {
  const auto p = params(128, 4);
  Rng init(5, Stream::kRobotInit), motion(5, Stream::kMonteCarlo);
  auto w = make_world(WorldParams{128, 4, 32, 64, 5, 0.2, 5}, uniform_field(128), random_positions(p, init));
  std::vector<std::size_t> counts(4);
  for (int t = 0; t < 200; ++t) {
    std::vector<Vec2> v(4);
    for (auto& x : v) x = {motion.uniform(-8, 8), motion.uniform(-8, 8)};
    step(w, v);
    for (std::size_t i = 0; i < 4; ++i) {
      ASSERT_GE(w.robots[i].observed_count, counts[i]);
      counts[i] = w.robots[i].observed_count;
      const Vec2 q = w.robots[i].position;
      ASSERT_TRUE(q.x >= 0 && q.x <= 128 && q.y >= 0 && q.y <= 128);
    }
  }
}

TEST(NoisyPositions, ZeroNoiseIsExact) {
  auto w = make_world(params(1024, 2), uniform_field(1024), std::vector<Vec2>{{1.25, 3.5}, {700, 2}});
  Rng rng(1, Stream::kNoise);
  EXPECT_EQ(noisy_positions(w, 0.0, rng), w.positions());
}

TEST(NoisyPositions, SampleStdMatchesSigma) {
  auto w = make_world(params(1024, 1), uniform_field(1024), std::vector<Vec2>{{512, 512}});
  Rng rng(42, Stream::kNoise);
  double sum = 0, sum2 = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const double e = noisy_positions(w, 20.0, rng)[0].x - 512.0;
    sum += e;
    sum2 += e * e;
  }
  const double mean = sum / draws;
  const double sd = std::sqrt(sum2 / draws - mean * mean);
  EXPECT_NEAR(sd / 20.0, 1.0, 0.01);
  EXPECT_EQ(w.robots[0].position, (Vec2{512, 512}));
}

TEST(NoisyPositions, SameSeedSameSequence) {
  auto w = make_world(params(1024, 3), uniform_field(1024), std::vector<Vec2>{{1, 1}, {2, 2}, {3, 3}});
  Rng a(9, Stream::kNoise), b(9, Stream::kNoise);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(noisy_positions(w, 5.0, a), noisy_positions(w, 5.0, b));
}

TEST(NoisyPositions, NoiseStreamDoesNotDisturbFeatures) {
  // Feature placement depends only on the feature substream.
  const auto p = params(512);
  Rng f1(77, Stream::kFeatures);
  const auto before = generate_features(p, 8, f1);
  Rng noise(77, Stream::kNoise);
  for (int i = 0; i < 1000; ++i) noise.normal(0, 1);
  Rng f2(77, Stream::kFeatures);
  EXPECT_EQ(generate_features(p, 8, f2), before);
}

TEST(IngestFeatures, FullySpecifiedLine) {
  std::istringstream in("512,512,50,8\n");
  const auto fs = parse_feature_csv(in, 1024, 1);
  ASSERT_EQ(fs.size(), 1u);
  EXPECT_EQ(fs[0], (FeatureSpec{{512, 512}, 50, 8}));
}

TEST(IngestFeatures, MissingSigmaScaleDrawnFromSeed) {
  std::istringstream a("512,512\n10,20\n"), b("512,512\n10,20\n"), c("512,512\n10,20\n");
  const auto fa = parse_feature_csv(a, 1024, 5);
  const auto fb = parse_feature_csv(b, 1024, 5);
  const auto fc = parse_feature_csv(c, 1024, 6);
  EXPECT_EQ(fa, fb);
  EXPECT_NE(fa, fc);
  for (const auto& f : fa) {
    EXPECT_GE(f.sigma, 40.0);
    EXPECT_LE(f.sigma, 60.0);
    EXPECT_GE(f.scale, 6.0);
    EXPECT_LE(f.scale, 10.0);
  }
}

TEST(IngestFeatures, EmptyInputIsEmpty) {
  std::istringstream in("");
  EXPECT_TRUE(parse_feature_csv(in, 1024, 1).empty());
}

TEST(IngestFeatures, MalformedLineReportsLineNumber) {
  std::istringstream in("1,2\n# comment\n3,abc\n");
  try {
    parse_feature_csv(in, 1024, 1);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  std::istringstream three("1,2,3\n");
  EXPECT_THROW(parse_feature_csv(three, 1024, 1), ParseError);
}

TEST(IngestFeatures, OutOfBoundsCenterRejected) {
  std::istringstream in("100,100\n2000,5\n");
  try {
    parse_feature_csv(in, 1024, 1);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(IngestFeatures, MissingFileRejected) {
  EXPECT_THROW(ingest_feature_file("/nonexistent/features.csv", 1024, 1), ValidationError);
}

}  // namespace
}  // namespace lpac
