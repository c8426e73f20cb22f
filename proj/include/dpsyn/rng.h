//
// Copyright 2026 The dpsyn Authors
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

#ifndef DPSYN_RNG_H_
#define DPSYN_RNG_H_

#include <array>
#include <cstdint>
#include <random>
#include <string_view>

#include "dpsyn/common.h"

namespace dpsyn {

using Rng = std::mt19937_64;

inline uint64_t SplitMix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a, used to turn textual task keys ("vae/eps=5/split=1/gen=2") into
// task ids.
inline uint64_t HashKey(std::string_view key) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : key) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Deterministic stream keyed by (master_seed, task_id). The derivation only
// depends on the key, so streams do not depend on the order in which grid
// cells are executed.
inline Rng RngStream(uint64_t master_seed, uint64_t task_id) {
  uint64_t state = SplitMix64(master_seed) ^ SplitMix64(task_id ^ 0xa5a5a5a5a5a5a5a5ULL);
  std::array<uint32_t, 8> words;
  for (auto& w : words) {
    state = SplitMix64(state);
    w = static_cast<uint32_t>(state >> 32);
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

inline Rng RngStream(uint64_t master_seed, std::string_view task_key) {
  return RngStream(master_seed, HashKey(task_key));
}

// Child stream for a sub-task of an existing stream (consumes one draw).
inline Rng SplitRng(Rng& parent) { return RngStream(parent(), 0); }

inline double StandardNormal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

inline Vector StandardNormalVector(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

inline Matrix StandardNormalMatrix(Eigen::Index rows, Eigen::Index cols,
                                   Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  }
  return m;
}

// Draws an index from a (not necessarily normalized) non-negative weight
// vector.
inline int SampleCategorical(const std::vector<double>& weights, Rng& rng) {
  std::discrete_distribution<int> dist(weights.begin(), weights.end());
  return dist(rng);
}

}  // namespace dpsyn

#endif  // DPSYN_RNG_H_
