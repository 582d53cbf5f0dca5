// Copyright 2026 The factlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FACTLAB_RNG_HPP_
#define FACTLAB_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <unordered_set>
#include <vector>

#include "factlab/util.hpp"

namespace factlab {

/// Deterministic random source. All sampling is implemented on top of the
/// raw mt19937_64 stream (the standard fully specifies the engine, unlike
/// the std distributions), so identical seeds give identical corpora and
/// training runs on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform integer in [0, n). Rejection-free except for a vanishing
  /// retry band (Lemire's multiply-shift method).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw ConfigError("Rng::below: empty range");
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      std::uint64_t threshold = (0 - n) % n;
      while (lo < threshold) {
        m = static_cast<unsigned __int128>(next_u64()) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  std::int64_t index(std::int64_t n) {
    return static_cast<std::int64_t>(below(static_cast<std::uint64_t>(n)));
  }

  /// Uniform in [0, 1) with 53 random bits.
  double real01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return real01() < p; }

  /// Standard normal via Box-Muller (no cached spare, so the draw count
  /// per call is fixed and state stays trivially serializable).
  double normal() {
    double u1 = real01();
    while (u1 <= 0.0) u1 = real01();
    double u2 = real01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// Normal(0, stddev) with samples beyond clip*stddev redrawn.
  double truncated_normal(double stddev, double clip = 3.0) {
    double x = normal();
    while (std::fabs(x) > clip) x = normal();
    return x * stddev;
  }

  /// In-place Fisher-Yates.
  template <class V>
  void shuffle(V& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(v[i - 1], v[j]);
    }
  }

  /// k distinct values from [0, n), in draw order (rejection sampling;
  /// intended for k << n).
  std::vector<std::int64_t> sample_distinct(std::int64_t n, std::int64_t k) {
    if (k > n) throw ConfigError("sample_distinct: k > n");
    std::vector<std::int64_t> out;
    out.reserve(static_cast<std::size_t>(k));
    std::unordered_set<std::int64_t> seen;
    while (static_cast<std::int64_t>(out.size()) < k) {
      std::int64_t x = index(n);
      if (seen.insert(x).second) out.push_back(x);
    }
    return out;
  }

  void save(std::ostream& os) const { os << eng_; }
  void load(std::istream& is) { is >> eng_; }

 private:
  std::mt19937_64 eng_;
};

}  // namespace factlab

#endif  // FACTLAB_RNG_HPP_
