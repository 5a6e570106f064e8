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

#include <cstdint>
#include <initializer_list>
#include <random>

namespace lpac {

/// Independent random substreams. Each subsystem draws from its own stream so
/// that enabling one (e.g. position noise) never shifts another's draws.
enum class Stream : std::uint64_t {
  kFeatures = 1,
  kRobotInit = 2,
  kNoise = 3,
  kFeatureFill = 4,
  kWeights = 5,
  kMonteCarlo = 6,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Hashes (seed, stream, indices...) into a 64-bit engine seed.
inline constexpr std::uint64_t derive_seed(std::uint64_t seed, Stream stream,
                                           std::initializer_list<std::uint64_t> indices = {}) noexcept {
  std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(stream)));
  for (std::uint64_t i : indices) h = splitmix64(h ^ splitmix64(i + 0x632be59bd9b4e019ULL));
  return h;
}

/// Seeded deterministic generator for one substream.
class Rng {
 public:
  explicit Rng(std::uint64_t engine_seed) : engine_(engine_seed) {}
  Rng(std::uint64_t seed, Stream stream, std::initializer_list<std::uint64_t> indices = {})
      : engine_(derive_seed(seed, stream, indices)) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal(double mean, double stddev) { return std::normal_distribution<double>(mean, stddev)(engine_); }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace lpac
