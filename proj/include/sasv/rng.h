// Copyright (c) 2026 The sasvkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SASV_RNG_H_
#define SASV_RNG_H_

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace sasv {

// splitmix64 step; used to derive independent sub-seeds from a root seed.
uint64_t splitmix64(uint64_t& state);

// Hash (seed, tag, index) into a child seed. Distinct tags give streams that
// are independent for all practical purposes.
uint64_t derive_seed(uint64_t seed, std::string_view tag, uint64_t index = 0);

// Deterministic RNG wrapper. All sampling in the project goes through this
// class so that output sequences are reproducible bit-for-bit: mt19937_64 has
// a standardized output sequence and the derived distributions below are our
// own, so nothing depends on library-specific distribution internals.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform();

  // Standard normal via Box-Muller; caches the second value of each pair.
  double gaussian();

  // Uniform integer in [0, n). n must be > 0.
  uint64_t integer(uint64_t n);

  // Convenience index draw.
  size_t index(size_t n) { return static_cast<size_t>(integer(n)); }

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

  // Vector of iid standard normals.
  std::vector<double> gaussian_vector(size_t n);

 private:
  std::mt19937_64 engine_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace sasv

#endif  // SASV_RNG_H_
