//
// Copyright 2025 The nclab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef NCLAB_RNG_HPP_
#define NCLAB_RNG_HPP_

#include <array>
#include <cmath>
#include <cstdint>

namespace nclab {

// Deterministic random source. We deliberately avoid std::*_distribution:
// their outputs are implementation-defined, and experiment replays must
// produce identical streams for a given seed on any standard library.
//
// Core generator: xoshiro256++ seeded through SplitMix64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t x = seed;
    for (auto& word : state_) word = SplitMix64(&x);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = Rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = Rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller; the second draw of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // 1 - U keeps the argument of log strictly positive.
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * kPi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Independent child stream. Distinct `stream` values give streams that do
  // not overlap in practice (seeds are mixed through SplitMix64 twice).
  Rng derived(std::uint64_t stream) const {
    return Rng(Mix(seed_, stream));
  }

  std::uint64_t seed() const { return seed_; }

  static std::uint64_t Mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = b + 0x9e3779b97f4a7c15ULL;
    const std::uint64_t hashed = SplitMix64(&x);
    x = a ^ hashed;
    return SplitMix64(&x);
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;

  static std::uint64_t Rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }

  static std::uint64_t SplitMix64(std::uint64_t* state) {
    std::uint64_t z = (*state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace nclab

#endif  // NCLAB_RNG_HPP_
