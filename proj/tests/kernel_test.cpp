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

#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "simpool/kernel.hpp"
#include "simpool/random.hpp"

namespace simpool {
namespace {

using K = Kernel<int>;

std::vector<int> drain(K& k, SimTime horizon) {
  std::vector<int> order;
  k.run_until(horizon, [&](const K::Record& ev) { order.push_back(ev.kind); });
  return order;
}

TEST(Kernel, FiresInTimeOrder) {
  K k;
  k.schedule(SimTime{5}, 1);
  k.schedule(SimTime{3}, 2);
  EXPECT_EQ(drain(k, SimTime{10}), (std::vector<int>{2, 1}));
}

TEST(Kernel, EqualTimesFollowInsertionOrder) {
  K k;
  const auto a = k.schedule(SimTime{5}, 1);
  const auto b = k.schedule(SimTime{5}, 2);
  EXPECT_LT(a, b);
  EXPECT_EQ(drain(k, SimTime{10}), (std::vector<int>{1, 2}));
}

TEST(Kernel, RejectsEventsInThePast) {
  K k;
  k.run_until(SimTime{3}, [](const K::Record&) {});
  EXPECT_THROW(k.schedule(SimTime{2}, 1), SchedulingInPast);
  EXPECT_THROW(k.run_until(SimTime{1}, [](const K::Record&) {}), SchedulingInPast);
}

TEST(Kernel, EmptyQueueAdvancesClock) {
  K k;
  EXPECT_EQ(k.run_until(SimTime{100}, [](const K::Record&) {}), 0u);
  EXPECT_EQ(k.now(), SimTime{100});
}

TEST(Kernel, StopsAtHorizon) {
  K k;
  for (int t : {1, 2, 3}) k.schedule(SimTime{t}, t);
  EXPECT_EQ(k.run_until(SimTime{2}, [](const K::Record&) {}), 2u);
  EXPECT_EQ(k.pending(), 1u);
  EXPECT_EQ(k.now(), SimTime{2});
}

TEST(Kernel, SelfReschedulingHeartbeat) {
  // Hand-stepped: a beat at 10, 20, ..., up to and including the horizon.
  const std::int64_t period = 10, horizon = 100;
  std::size_t expected = 0;
  for (std::int64_t t = period; t <= horizon; t += period) ++expected;

  K k;
  k.schedule(SimTime{period}, 0);
  std::vector<std::int64_t> seen;
  const auto n = k.run_until(SimTime{horizon}, [&](const K::Record& ev) {
    seen.push_back(ev.fire_at.millis);
    k.schedule(ev.fire_at + SimTime{period}, 0);
  });
  EXPECT_EQ(n, expected);
  EXPECT_EQ(n, 10u);
  for (std::size_t i = 0; i < seen.size(); ++i) EXPECT_EQ(seen[i], period * static_cast<std::int64_t>(i + 1));
}

TEST(Kernel, NothingDueRemainsAfterRun) {
  K k;
  for (int t = 0; t < 50; ++t) k.schedule(SimTime{(t * 37) % 101}, t);
  k.run_until(SimTime{60}, [](const K::Record&) {});
  EXPECT_EQ(k.processed_total() + k.pending(), 50u);
  std::size_t due = 0;
  for (int t = 0; t < 50; ++t) due += (t * 37) % 101 <= 60 ? 1 : 0;
  EXPECT_EQ(k.processed_total(), due);
}

TEST(Kernel, TraceDigestIsReproducible) {
  auto run = [](int salt) {
    K k;
    for (int i = 0; i < 20; ++i) k.schedule(SimTime{(i * 7) % 13}, i, static_cast<std::uint64_t>(i + salt));
    k.run_until(SimTime{20}, [](const K::Record&) {});
    return k.trace_digest();
  };
  EXPECT_EQ(run(0), run(0));
  EXPECT_NE(run(0), run(1));
}

TEST(Random, ExponentialRejectsNonPositiveMean) {
  RandomStream r(1, "durations");
  EXPECT_THROW(draw_exponential(r, 0.0), InvalidParameter);
  EXPECT_THROW(draw_exponential(r, -3.0), InvalidParameter);
}

TEST(Random, SameSeedAndStreamRepeat) {
  RandomStream a(42, "arrivals"), b(42, "arrivals");
  for (int i = 0; i < 10; ++i) EXPECT_EQ(draw_exponential(a, 300.0), draw_exponential(b, 300.0));
}

TEST(Random, StreamsAreIndependent) {
  RandomStream a(42, "arrivals"), b(42, "durations");
  int equal = 0;
  for (int i = 0; i < 10; ++i) equal += a.next_u64() == b.next_u64() ? 1 : 0;
  EXPECT_EQ(equal, 0);
}

TEST(Random, ExponentialSampleMean) {
  RandomStream r(2026, "durations");
  const int n = 100'000;
  double sum = 0;
  for (int i = 0; i < n; ++i) {
    const double x = draw_exponential(r, 300.0);
    ASSERT_GT(x, 0.0);
    sum += x;
  }
  EXPECT_NEAR(sum / n, 300.0, 0.02 * 300.0);
}

TEST(Random, UniformIntStaysInRange) {
  RandomStream r(5, "phase");
  for (int i = 0; i < 10'000; ++i) {
    const auto v = r.uniform_int(1, 6);
    ASSERT_GE(v, 1);
    ASSERT_LE(v, 6);
  }
  EXPECT_THROW(r.uniform_int(3, 2), InvalidParameter);
}

TEST(Random, KnownFirstDraw) {
  // The engine is fixed by the standard, so the first value for a given
  // derived seed is the same everywhere.
  std::mt19937_64 ref(RandomStream::derive_seed(1, "x"));
  RandomStream r(1, "x");
  EXPECT_EQ(r.next_u64(), ref());
}

TEST(SimTimeArithmetic, TenYearsFit) {
  const SimTime ten_years = hours(24 * 365 * 10);
  EXPECT_GT((ten_years + ten_years).millis, ten_years.millis);
  EXPECT_EQ(ceil_to_ms(1), SimTime{1});
  EXPECT_EQ(ceil_to_ms(1000), SimTime{1});
  EXPECT_EQ(ceil_to_ms(1001), SimTime{2});
  EXPECT_EQ(micros_from_ms(0.3699).value, 370);
}

}  // namespace
}  // namespace simpool
