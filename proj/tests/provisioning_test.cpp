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

#include <sstream>

#include "simpool/provisioning.hpp"
#include "support.hpp"

namespace simpool {
namespace {

using ::simpool::testing::kHour;
using ::simpool::testing::kMin;

TEST(GridProvision, FillsPledgeGap) {
  // 10,000 pledged, 6,000 live, single-core glideins, ample budget.
  EXPECT_EQ(grid_provision_count(10'000, 6'000, 1, 50, 100'000), 4'000);
  EXPECT_EQ(grid_provision_count(10'000, 6'000, 8, 50, 100'000), 500);
  EXPECT_EQ(grid_provision_count(10'000, 6'000, 1, 50, 600), 600);
}

TEST(GridProvision, NothingWithoutPressureOrGap) {
  EXPECT_EQ(grid_provision_count(10'000, 6'000, 1, 0, 100'000), 0);
  EXPECT_EQ(grid_provision_count(10'000, 10'000, 1, 50, 100'000), 0);
  EXPECT_EQ(grid_provision_count(10'000, 12'000, 1, 50, 100'000), 0);
  EXPECT_THROW(glideins_to_fill(10, 0, 0, 5), InvalidParameter);
}

TEST(BurstWindows, ValidationAndOrdering) {
  const auto w = validate_windows({{SimTime{100}, SimTime{10}, 5}, {SimTime{0}, SimTime{50}, 3}});
  EXPECT_EQ(w[0].start, SimTime{0});
  EXPECT_EQ(w[1].start, SimTime{100});
  EXPECT_TRUE(w[0].contains(SimTime{49}));
  EXPECT_FALSE(w[0].contains(SimTime{50}));
  // Adjacent windows are fine; overlapping ones are not.
  EXPECT_NO_THROW(validate_windows({{SimTime{0}, SimTime{50}, 1}, {SimTime{50}, SimTime{50}, 1}}));
  EXPECT_THROW(validate_windows({{SimTime{0}, SimTime{51}, 1}, {SimTime{50}, SimTime{50}, 1}}), InvalidParameter);
  EXPECT_THROW(validate_windows({{SimTime{0}, SimTime{0}, 1}}), InvalidParameter);
  EXPECT_THROW(validate_windows({{SimTime{-5}, SimTime{10}, 1}}), InvalidParameter);
  EXPECT_THROW(validate_windows({{SimTime{0}, SimTime{10}, -1}}), InvalidParameter);
}

TEST(BurstCsv, Parses) {
  std::istringstream in("start_ms,duration_ms,cores\r\n3600000,7200000,1000\n\n0,60000,8\n");
  const auto w = parse_burst_csv(in);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[0].cores, 8);
  EXPECT_EQ(w[1].start, hours(1));
  EXPECT_EQ(w[1].end(), hours(3));
}

TEST(BurstCsv, Errors) {
  auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return parse_burst_csv(in);
  };
  EXPECT_THROW(parse(""), ParseError);
  EXPECT_THROW(parse("start,duration,cores\n"), ParseError);
  EXPECT_THROW(parse("start_ms,duration_ms,cores\n1,2\n"), ParseError);
  EXPECT_THROW(parse("start_ms,duration_ms,cores\n1,2,x\n"), ParseError);
  EXPECT_THROW(parse("start_ms,duration_ms,cores\n1,2,3z\n"), ParseError);
  EXPECT_THROW(parse("start_ms,duration_ms,cores\n0,100,1\n50,100,1\n"), InvalidParameter);
  EXPECT_THROW(load_burst_csv("/nonexistent/bursts.csv"), IoError);
}

TEST(BurstGenerator, DeterministicAndDisjoint) {
  BurstGenerator g;
  RandomStream a(3, "bursts"), b(3, "bursts");
  const auto wa = generate_bursts(g, hours(24 * 30), a);
  const auto wb = generate_bursts(g, hours(24 * 30), b);
  ASSERT_FALSE(wa.empty());
  ASSERT_EQ(wa.size(), wb.size());
  for (std::size_t i = 0; i < wa.size(); ++i) {
    EXPECT_EQ(wa[i].start, wb[i].start);
    EXPECT_EQ(wa[i].cores, wb[i].cores);
    EXPECT_GE(wa[i].duration, g.min_duration);
    EXPECT_LE(wa[i].duration, g.max_duration);
    EXPECT_GE(wa[i].cores, 1);
  }
  EXPECT_NO_THROW(validate_windows(wa));
  g.max_duration = hours(1);
  EXPECT_THROW(generate_bursts(g, hours(1), a), InvalidParameter);
}

TEST(BurstSchedule, DutyAndIntegral) {
  const std::vector<BurstWindow> w{{hours(1), hours(2), 100}, {hours(10), hours(4), 50}};
  EXPECT_DOUBLE_EQ(schedule_duty_fraction(w, hours(12)), 4.0 / 12.0);  // second window clipped
  EXPECT_DOUBLE_EQ(schedule_core_integral(w, hours(12)), 100.0 * 2 * kHour + 50.0 * 2 * kHour);
  EXPECT_EQ(schedule_duty_fraction(w, SimTime{0}), 0.0);
}

Job idle_job(SimTime since) {
  Job j;
  j.state = JobState::Idle;
  j.idle_since = since;
  return j;
}

TEST(FlockRoute, ThresholdAndCapacity) {
  const FederationLink link{PoolId{0}, PoolId{1}, minutes(5)};
  EXPECT_EQ(flock_route(idle_job(SimTime{0}), link, minutes(6), 10), FlockDecision::RoutedToSubpool);
  EXPECT_EQ(flock_route(idle_job(SimTime{0}), link, minutes(5), 10), FlockDecision::RoutedToSubpool);
  EXPECT_EQ(flock_route(idle_job(SimTime{0}), link, minutes(4), 10), FlockDecision::StayPrimary);
  EXPECT_EQ(flock_route(idle_job(SimTime{0}), link, minutes(60), 0), FlockDecision::StayPrimary);
  Job running = idle_job(SimTime{0});
  running.state = JobState::Running;
  EXPECT_THROW(flock_route(running, link, minutes(6), 10), InvalidParameter);
}

// ---- in the simulation ------------------------------------------------------------

json hpc_doc(std::int64_t cores, int slot_cores, std::int64_t grace_ms, std::int64_t backlog) {
  json doc = ::simpool::testing::small_doc(2, 0, 50'000, 8 * kHour, 6 * kHour);
  doc["providers"] = json::array({{{"id", "hpc"},
                                   {"kind", "hpc"},
                                   {"grace_ms", grace_ms},
                                   {"submission_rate_per_min", 100'000},
                                   {"glidein", {{"startds", 1}, {"slots_per_startd", 1}, {"slot_cores", slot_cores}}},
                                   {"bursts", json::array({{{"start_ms", kHour},
                                                            {"duration_ms", 2 * kHour},
                                                            {"cores", cores}}})}}});
  doc["workloads"][0]["arrival"]["idle_per_schedd"] = backlog;
  doc["workloads"][0]["cores"] = {{"kind", "fixed"}, {"value", slot_cores}};
  return doc;
}

TEST(HpcBurst, GlideinCountFromCores) {
  Simulation sim(parse_config(hpc_doc(1000, 8, 0, 200)));
  sim.run();
  EXPECT_EQ(sim.counters().glideins_spawned, 1000u / 8u);
  std::int64_t peak = 0;
  for (const auto& [t, v] : ::simpool::testing::series_of(sim, "cores_hpc")) peak = std::max(peak, std::int64_t(v));
  EXPECT_EQ(peak, 1000);
  EXPECT_TRUE(sim.violations().empty());
}

TEST(HpcBurst, CoresOnlyInsideWindow) {
  Simulation sim(parse_config(hpc_doc(400, 1, 0, 500)));
  sim.run();
  for (const auto& [t, v] : ::simpool::testing::series_of(sim, "cores_hpc")) {
    if (t < hours(1) || t > hours(3)) {
      EXPECT_EQ(v, 0.0) << "t=" << t.millis;
    }
  }
  // Grace 0: every job still running at the window end is evicted.
  EXPECT_EQ(sim.counters().evicted, 400u);
  EXPECT_TRUE(sim.violations().empty());
}

TEST(HpcBurst, TwoWindowsTwoPeaks) {
  json doc = hpc_doc(300, 1, 0, 1000);
  doc["providers"][0]["bursts"] = json::array(
      {{{"start_ms", kHour}, {"duration_ms", kHour}, {"cores", 300}},
       {{"start_ms", 2 * kHour + 30 * kMin}, {"duration_ms", kHour}, {"cores", 300}}});
  Simulation sim(parse_config(doc));
  sim.run();
  const auto s = ::simpool::testing::series_of(sim, "cores_hpc");
  double first = 0, second = 0, between = 0;
  for (const auto& [t, v] : s) {
    if (t > hours(1) && t < hours(2)) first = std::max(first, v);
    if (t > hours(2) && t < hours(2) + minutes(30)) between = std::max(between, v);
    if (t > hours(2) + minutes(30) && t < hours(3) + minutes(30)) second = std::max(second, v);
  }
  EXPECT_EQ(first, 300.0);
  EXPECT_EQ(between, 0.0);
  EXPECT_EQ(second, 300.0);
  EXPECT_EQ(sim.counters().glideins_spawned, 600u);
}

TEST(HpcBurst, NoIdleJobsNoCoresInUse) {
  Simulation sim(parse_config(hpc_doc(400, 1, 0, 0)));
  sim.run();
  for (const auto& [t, v] : ::simpool::testing::series_of(sim, "cores_hpc")) EXPECT_EQ(v, 0.0);
}

TEST(HpcBurst, LongGraceLetsJobsFinish) {
  // 30-minute jobs, grace of an hour: nothing is evicted at the window end.
  json doc = hpc_doc(100, 1, kHour, 500);
  doc["workloads"][0]["duration_ms"] = {{"kind", "fixed"}, {"value", 30 * kMin}};
  Simulation sim(parse_config(doc));
  sim.run();
  EXPECT_EQ(sim.counters().evicted, 0u);
  EXPECT_GT(sim.counters().completed, 100u);
  EXPECT_TRUE(sim.violations().empty());
}

TEST(GridSite, ProvisionsPledgeWhileWorkIsIdle) {
  json doc = ::simpool::testing::small_doc(2, 64, 50'000, 4 * kHour, kHour);
  Simulation sim(parse_config(doc));
  sim.run();
  EXPECT_EQ(sim.provider(0).provisioned_cores, 64);
  EXPECT_EQ(sim.frames().back().cores_total, 64);
  EXPECT_TRUE(sim.violations().empty());
}

}  // namespace
}  // namespace simpool
