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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "simpool.hpp"

namespace simpool::testing {

constexpr std::int64_t kMin = 60'000;
constexpr std::int64_t kHour = 3'600'000;

/// A small pool: `schedds` schedds, a grid site of `slots` one-core slots
/// and a backlog stream of fixed-length jobs.
inline json small_doc(int schedds = 2, std::int64_t slots = 40, std::int64_t capacity_mb = 1000,
                      std::int64_t job_ms = 10 * kMin, std::int64_t horizon_ms = 2 * kHour) {
  return {{"name", "small"},
          {"horizon_ms", horizon_ms},
          {"seed", 7},
          {"check_invariants", true},
          {"schedds", json::array({{{"count", schedds}, {"memory_capacity_mb", capacity_mb}}})},
          {"pools", json::array({{{"id", "global"}}})},
          {"providers", json::array({{{"id", "grid"},
                                      {"kind", "grid"},
                                      {"pledged_cores", slots},
                                      {"glidein", {{"startds", 1}, {"slots_per_startd", 1}}}}})},
          {"workloads", json::array({{{"id", "prod"},
                                      {"arrival", {{"mode", "backlog"}, {"idle_per_schedd", 50}}},
                                      {"duration_ms", {{"kind", "fixed"}, {"value", job_ms}}}}})}};
}

// Random small infrastructures: a few schedds, a grid site, sometimes an HPC
// window or a federated subpool, random feature toggles.
inline json random_doc(std::uint64_t seed) {
  std::mt19937_64 g(seed);
  auto pick = [&](std::int64_t lo, std::int64_t hi) { return std::uniform_int_distribution<std::int64_t>(lo, hi)(g); };
  auto coin = [&] { return pick(0, 1) == 1; };

  json features = {{"separate_ccb_host", coin()},
                   {"update_filtering", coin()},
                   {"priority_query_routing", coin()}};
  if (coin()) features["multi_thread_negotiator"] = {{"threads", pick(2, 8)}};
  if (coin()) features["secondary_collectors"] = {{"count", pick(1, 3)}, {"batch_factor", pick(1, 20)}};
  if (coin()) features["udp_transport"] = {{"buffer", pick(1, 50)}};

  json pool = {{"id", "global"},
               {"heartbeat_interval_ms", pick(1, 5) * kMin},
               {"collector", {{"update_cost_ms", static_cast<double>(pick(1, 300))}}},
               {"negotiator", {{"cycle_delay_ms", pick(10, 120) * 1000}}},
               {"features", features}};
  if (coin()) pool["ccb"] = {{"max_connections", pick(0, 60)}};

  json providers = json::array({{{"id", "grid"},
                                 {"kind", "grid"},
                                 {"pledged_cores", pick(0, 120)},
                                 {"submission_rate_per_min", pick(1, 200)},
                                 {"grace_ms", pick(0, 2) * 10 * kMin},
                                 {"glidein", {{"startds", pick(1, 3)},
                                              {"slots_per_startd", pick(1, 4)},
                                              {"slot_cores", pick(1, 2)},
                                              {"lifetime_ms", pick(20, 200) * kMin}}}}});
  json pools = json::array({pool});
  json federation = json::array();
  if (coin()) {
    const bool federated = coin();
    json hpc = {{"id", "hpc"},
                {"kind", "hpc"},
                {"grace_ms", pick(0, 1) * 15 * kMin},
                {"glidein", {{"slots_per_startd", pick(1, 8)}}},
                {"bursts", json::array({{{"start_ms", pick(0, 60) * kMin},
                                         {"duration_ms", pick(10, 60) * kMin},
                                         {"cores", pick(1, 100)}}})}};
    if (coin()) hpc["start_delay_ms"] = {{"kind", "uniform"}, {"min", 0}, {"max", 5 * kMin}};
    if (federated) {
      hpc["pool"] = "sub";
      hpc["integration"] = "federated_subpool";
      pools.push_back({{"id", "sub"}, {"role", "subpool"}});
      federation.push_back({{"from", "global"}, {"to", "sub"}, {"threshold_ms", pick(0, 10) * kMin}});
    }
    providers.push_back(hpc);
  }

  json workloads = json::array();
  workloads.push_back({{"id", "prod"},
                       {"arrival", {{"mode", "backlog"}, {"idle_per_schedd", pick(0, 60)}}},
                       {"cores", {{"kind", "choice"}, {"values", {1, 2}}, {"weights", {3, 1}}}},
                       {"duration_ms", {{"kind", "exponential"}, {"mean", pick(5, 90) * kMin}}}});
  if (coin()) {
    workloads.push_back({{"id", "ana"},
                         {"label", "analysis"},
                         {"arrival", {{"mode", "rate"}, {"rate_per_s", 0.05 * static_cast<double>(pick(1, 20))},
                                      {"process", coin() ? "poisson" : "constant"}}},
                         {"duration_ms", {{"kind", "uniform"}, {"min", kMin}, {"max", 30 * kMin}}}});
  }

  return {{"name", "random-" + std::to_string(seed)},
          {"seed", seed},
          {"horizon_ms", 2 * kHour},
          {"check_invariants", true},
          {"schedds", json::array({{{"count", pick(1, 4)}, {"memory_capacity_mb", pick(5, 100)}}})},
          {"pools", pools},
          {"providers", providers},
          {"workloads", workloads},
          {"federation", federation},
          {"metrics", {{"interval_ms", 5 * kMin}}}};
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("simpool-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Series series_of(const Simulation& sim, const std::string& column) {
  return extract_series(sim.layout(), sim.frames(), column);
}

}  // namespace simpool::testing
