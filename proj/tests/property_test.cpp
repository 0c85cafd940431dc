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

#include "support.hpp"

namespace simpool {
namespace {

using ::simpool::testing::random_doc;

TEST(Properties, InvariantsHoldOnRandomPools) {
  for (std::uint64_t seed = 1; seed <= 120; ++seed) {
    SCOPED_TRACE("seed " + std::to_string(seed));
    const json doc = random_doc(seed);
    Simulation sim(parse_config(doc));
    sim.run();
    for (const auto& v : sim.violations()) ADD_FAILURE() << v;
    EXPECT_TRUE(sim.check_invariants().empty());

    const auto& c = sim.counters();
    EXPECT_EQ(c.submitted, sim.model().jobs.size());
    EXPECT_LE(c.completed, c.started);
    for (const auto& f : sim.frames()) {
      std::int64_t sum = 0;
      for (auto x : f.cores_by_provider) sum += x;
      ASSERT_EQ(sum, f.cores_total);
      ASSERT_GE(f.duty_top, 0.0);
      ASSERT_LE(f.duty_top, 1.0);
      ASSERT_GE(f.udp_drops, 0);
      ASSERT_GE(f.stale_fail, 0);
      std::int64_t by_schedd = 0;
      for (auto r : f.running_by_schedd) by_schedd += r;
      ASSERT_EQ(by_schedd, f.running_total);
    }
  }
}

TEST(Properties, ResolvedConfigReproducesRun) {
  for (std::uint64_t seed = 200; seed < 210; ++seed) {
    SCOPED_TRACE("seed " + std::to_string(seed));
    const ScenarioConfig cfg = parse_config(random_doc(seed));
    Simulation a(cfg);
    a.run();
    Simulation b(parse_config(to_json(cfg)));
    b.run();
    EXPECT_EQ(a.trace_digest(), b.trace_digest());
    EXPECT_EQ(a.frames(), b.frames());
  }
}

}  // namespace
}  // namespace simpool
