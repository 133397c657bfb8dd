/*
 * Copyright 2026 The FedDuA Simulator Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FEDDUA_RNG_HPP
#define FEDDUA_RNG_HPP

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <vector>

namespace feddua {

using Rng = std::mt19937_64;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Stream domains keep e.g. (client 3, round 0) sampling apart from
// (round 3) client selection.
enum class StreamDomain : std::uint64_t {
  kData = 1,
  kClientSampling = 2,
  kLocalStep = 3,
  kOracle = 4,
};

/// Independent generator for a key tuple. The same tuple always yields the
/// same stream, whatever else ran before it.
inline Rng make_stream(std::uint64_t seed, StreamDomain domain,
                       std::initializer_list<std::uint64_t> key = {}) {
  std::uint64_t h = detail::splitmix64(seed ^ 0x5eedULL);
  h = detail::splitmix64(h ^ static_cast<std::uint64_t>(domain));
  for (std::uint64_t k : key) h = detail::splitmix64(h ^ k);
  return Rng(h);
}

/// Uniform draw in [0, n) from raw 64-bit output, so sampling does not depend
/// on the standard library's distribution implementation.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

/// k distinct values from [0, n), returned in ascending order.
inline std::vector<int> sample_without_replacement(Rng& rng, int n, int k) {
  std::vector<int> pool(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < k; ++i) {
    const auto j = static_cast<std::size_t>(i) +
                   static_cast<std::size_t>(uniform_index(rng, static_cast<std::uint64_t>(n - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(k));
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace feddua

#endif  // FEDDUA_RNG_HPP
