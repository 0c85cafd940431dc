/*
 * Copyright 2026 The simpool Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License"); you
 * may not use this file except in compliance with the License.  You may
 * obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <string_view>

#include "simpool/errors.hpp"

namespace simpool {

namespace detail {

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// A named, seeded source of random draws.
///
/// Each stochastic concern (arrivals, durations, heartbeat phases, ...) owns
/// its own stream so that changing how often one concern draws never shifts
/// the sequence another concern sees. The engine is mt19937_64, whose output
/// sequence is fixed by the C++ standard; distributions are implemented here
/// rather than with <random>'s distribution classes, whose algorithms are
/// implementation-defined.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::string_view stream_id)
      : seed_(seed), stream_id_(stream_id), engine_(derive_seed(seed, stream_id)) {}

  std::uint64_t seed() const noexcept { return seed_; }
  const std::string& stream_id() const noexcept { return stream_id_; }

  static std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream_id) {
    return detail::splitmix64(seed ^ detail::splitmix64(detail::fnv1a64(stream_id)));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in the open interval (0, 1).
  double uniform01() {
    const std::uint64_t bits = engine_() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) {
      throw InvalidParameter("uniform_int: hi < lo");
    }
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) {
      return static_cast<std::int64_t>(engine_());
    }
    // Rejection sampling keeps the result unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % span;
    std::uint64_t x = engine_();
    while (x >= limit) {
      x = engine_();
    }
    return lo + static_cast<std::int64_t>(x % span);
  }

  double exponential(double mean) {
    if (!(mean > 0.0) || !std::isfinite(mean)) {
      throw InvalidParameter("exponential mean must be > 0");
    }
    return -mean * std::log(uniform01());
  }

  double standard_normal() {
    // Box-Muller, one variate per call.
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double lognormal(double mu, double sigma) {
    if (!(sigma >= 0.0)) {
      throw InvalidParameter("lognormal sigma must be >= 0");
    }
    return std::exp(mu + sigma * standard_normal());
  }

 private:
  std::uint64_t seed_;
  std::string stream_id_;
  std::mt19937_64 engine_;
};

inline double draw_exponential(RandomStream& stream, double mean) { return stream.exponential(mean); }

}  // namespace simpool
