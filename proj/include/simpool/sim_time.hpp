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

#include <compare>
#include <cstdint>
#include <limits>
#include <ostream>

namespace simpool {

/// Simulated time (or a span of it) in integer milliseconds.
///
/// Ten simulated years are about 3.2e11 ms, far inside the int64 range, so
/// plain arithmetic is used without overflow checks.
struct SimTime {
  std::int64_t millis{0};

  constexpr SimTime() = default;
  constexpr explicit SimTime(std::int64_t ms) : millis(ms) {}

  constexpr auto operator<=>(const SimTime&) const = default;

  constexpr SimTime& operator+=(SimTime o) {
    millis += o.millis;
    return *this;
  }
  constexpr SimTime& operator-=(SimTime o) {
    millis -= o.millis;
    return *this;
  }

  constexpr double seconds() const { return static_cast<double>(millis) / 1000.0; }
  constexpr double hours() const { return static_cast<double>(millis) / 3'600'000.0; }

  static constexpr SimTime max() { return SimTime{std::numeric_limits<std::int64_t>::max()}; }
};

constexpr SimTime operator+(SimTime a, SimTime b) { return SimTime{a.millis + b.millis}; }
constexpr SimTime operator-(SimTime a, SimTime b) { return SimTime{a.millis - b.millis}; }
constexpr SimTime operator*(SimTime a, std::int64_t k) { return SimTime{a.millis * k}; }
constexpr SimTime operator*(std::int64_t k, SimTime a) { return SimTime{a.millis * k}; }

constexpr SimTime milliseconds(std::int64_t n) { return SimTime{n}; }
constexpr SimTime seconds(std::int64_t n) { return SimTime{n * 1000}; }
constexpr SimTime minutes(std::int64_t n) { return SimTime{n * 60'000}; }
constexpr SimTime hours(std::int64_t n) { return SimTime{n * 3'600'000}; }

inline std::ostream& operator<<(std::ostream& os, SimTime t) { return os << t.millis << "ms"; }

/// Service costs below one millisecond (collector update processing at full
/// pool scale is a few hundred microseconds) are kept in microseconds.
struct Micros {
  std::int64_t value{0};

  constexpr Micros() = default;
  constexpr explicit Micros(std::int64_t us) : value(us) {}
  constexpr auto operator<=>(const Micros&) const = default;
};

constexpr std::int64_t to_micros(SimTime t) { return t.millis * 1000; }

// Rounds a real millisecond quantity to the nearest microsecond.
inline Micros micros_from_ms(double ms) {
  return Micros{static_cast<std::int64_t>(ms * 1000.0 + (ms >= 0 ? 0.5 : -0.5))};
}

// Smallest SimTime not earlier than the given microsecond instant.
constexpr SimTime ceil_to_ms(std::int64_t us) {
  return SimTime{us >= 0 ? (us + 999) / 1000 : -((-us) / 1000)};
}

}  // namespace simpool
