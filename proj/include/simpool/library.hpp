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

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "simpool/config.hpp"

namespace simpool {

/// A canned experiment. Entries with variants run each variant (the base
/// document with a merge patch applied) into its own subdirectory.
struct LibraryEntry {
  std::string name;
  std::string description;
  json document;
  std::vector<std::pair<std::string, json>> variants;

  ScenarioConfig config() const { return parse_config(document); }

  ScenarioConfig variant(const std::string& id) const {
    for (const auto& [vid, patch] : variants) {
      if (vid == id) {
        json doc = document;
        doc.merge_patch(patch);
        return parse_config(doc);
      }
    }
    throw ConfigError("scenario '" + name + "' has no variant '" + id + "'");
  }
};

namespace library_detail {

inline json expect(const std::string& series, const std::string& stat, std::optional<double> min,
                   std::optional<double> max, std::optional<std::int64_t> window = std::nullopt,
                   std::optional<double> tolerance = std::nullopt) {
  json e{{"series", series}, {"stat", stat}};
  if (min) e["min"] = *min;
  if (max) e["max"] = *max;
  if (window) e["window"] = *window;
  if (tolerance) e["tolerance"] = *tolerance;
  return e;
}

inline json sleep_jobs(std::int64_t backlog, std::int64_t duration_ms) {
  return {{"id", "sleep"},
          {"label", "production"},
          {"arrival", {{"mode", "backlog"}, {"idle_per_schedd", backlog}}},
          {"cores", 1},
          {"memory_mb", 1},
          {"duration_ms", {{"kind", "fixed"}, {"value", duration_ms}}}};
}

inline json grid(const std::string& id, std::int64_t pledge, int startds, int slots_per_startd, int slot_cores = 1) {
  return {{"id", id},
          {"kind", "grid"},
          {"pledged_cores", pledge},
          {"glidein",
           {{"startds", startds}, {"slots_per_startd", slots_per_startd}, {"slot_cores", slot_cores},
            {"slot_memory_mb", 2000}}}};
}

constexpr std::int64_t kHour = 3'600'000;

// Ten schedds, 1 MB per running job, more slots than the schedds can use.
inline json schedd_bottleneck(std::int64_t schedd_mb, std::int64_t pledge, int startds, std::int64_t backlog) {
  const double cap = 10.0 * static_cast<double>(schedd_mb);
  return {{"name", "schedd-bottleneck"},
          {"horizon_ms", 12 * kHour},
          {"seed", 1},
          {"schedds", json::array({{{"count", 10}, {"memory_capacity_mb", schedd_mb}, {"ram_per_running_job_mb", 1}}})},
          {"pools", json::array({{{"id", "global"},
                                  {"collector", {{"calibrate", {{"target_slots", 4 * pledge}}}}}}})},
          {"providers", json::array({grid("grid", pledge, startds, 8)})},
          {"workloads", json::array({sleep_jobs(backlog, 6 * kHour)})},
          {"expectations", json::array({expect("running_total", "plateau", cap, cap, 30, 1e-9)})}};
}

inline json ccb_bottleneck(std::int64_t cap) {
  return {{"name", "ccb-bottleneck"},
          {"horizon_ms", 12 * kHour},
          {"seed", 1},
          {"schedds", json::array({{{"count", 20}, {"memory_capacity_mb", 500}, {"ram_per_running_job_mb", 1}}})},
          {"pools", json::array({{{"id", "global"},
                                  {"features", {{"separate_ccb_host", true}}},
                                  {"ccb", {{"max_connections", cap}}},
                                  {"collector", {{"calibrate", {{"target_slots", 40'000}}}}}}})},
          {"providers", json::array({grid("grid", 12'000, 10, 1)})},
          {"workloads", json::array({sleep_jobs(1000, 6 * kHour)})}};
}

inline json collector_saturation(std::int64_t target, std::int64_t offered, int startds) {
  return {{"name", "collector-saturation"},
          {"horizon_ms", 24 * kHour},
          {"seed", 1},
          {"schedds", json::array({{{"count", 10}, {"memory_capacity_mb", 10 * target}, {"ram_per_running_job_mb", 1}}})},
          {"pools", json::array({{{"id", "global"},
                                  {"features", {{"update_filtering", true}, {"udp_transport", true},
                                                {"separate_ccb_host", true}}},
                                  {"collector", {{"calibrate", {{"target_slots", target},
                                                                {"mean_job_duration_ms", 6 * kHour},
                                                                {"heartbeat_interval_ms", 300'000},
                                                                {"filtering", true}}}}}}})},
          {"providers", json::array({grid("grid", offered, startds, 1)})},
          {"workloads", json::array({{{"id", "production"},
                                      {"arrival", {{"mode", "backlog"}, {"idle_per_schedd", target / 10 + 1000}}},
                                      {"cores", 1},
                                      {"memory_mb", 1},
                                      {"duration_ms", {{"kind", "exponential"}, {"mean", 6.0 * kHour}}}}})},
          {"expectations", json::array({expect("duty_top", "peak", 0.95, std::nullopt),
                                        expect("running_total", "plateau", 0.9 * static_cast<double>(target),
                                               1.1 * static_cast<double>(target), 60, 0.05)})}};
}

// Fixed sub-saturation scale for flipping one optimization at a time.
inline json ablation() {
  return {{"name", "optimizations-ablation"},
          {"horizon_ms", 8 * kHour},
          {"seed", 1},
          {"schedds", json::array({{{"count", 10}, {"memory_capacity_mb", 1000}, {"ram_per_running_job_mb", 1}}})},
          {"pools", json::array({{{"id", "global"},
                                  {"collector", {{"update_cost_ms", 20.0}}},
                                  {"monitoring", {{"query_interval_ms", 60'000}, {"queries_per_interval", 1}}}}})},
          {"providers", json::array({grid("grid", 4000, 10, 1)})},
          {"workloads", json::array({sleep_jobs(1000, 1 * kHour)})}};
}

inline json nersc_burst() {
  json hpc = {{"id", "nersc"},
              {"kind", "hpc"},
              {"integration", "site_extension"},
              {"grace_ms", 0},
              {"glidein", {{"startds", 1}, {"slots_per_startd", 8}, {"slot_cores", 1}, {"slot_memory_mb", 2000}}},
              {"bursts", json::array({{{"start_ms", 4 * kHour}, {"duration_ms", 3 * kHour}, {"cores", 1000}},
                                      {{"start_ms", 11 * kHour}, {"duration_ms", 2 * kHour}, {"cores", 1000}},
                                      {{"start_ms", 17 * kHour}, {"duration_ms", 4 * kHour}, {"cores", 1000}}})}};
  return {{"name", "nersc-burst"},
          {"horizon_ms", 24 * kHour},
          {"seed", 1},
          {"schedds", json::array({{{"count", 10}, {"memory_capacity_mb", 1000}, {"ram_per_running_job_mb", 1}}})},
          {"pools", json::array({{{"id", "global"}}})},
          {"providers", json::array({grid("grid", 4000, 1, 8), hpc})},
          {"workloads", json::array({{{"id", "production"},
                                      {"arrival", {{"mode", "backlog"}, {"idle_per_schedd", 1000}}},
                                      {"cores", 1},
                                      {"memory_mb", 1000},
                                      {"duration_ms", {{"kind", "exponential"}, {"mean", 6.0 * kHour}}}}})},
          {"expectations", json::array({expect("cores_total", "peak", 4900, 5100),
                                        expect("cores_nersc", "peak", 980, 1000)})}};
}

inline json federated_hpc() {
  json hpc = {{"id", "hpc"},
              {"kind", "hpc"},
              {"pool", "hpc-pool"},
              {"integration", "federated_subpool"},
              {"grace_ms", 0},
              {"glidein", {{"startds", 1}, {"slots_per_startd", 8}, {"slot_cores", 1}, {"slot_memory_mb", 2000}}},
              {"bursts", json::array({{{"start_ms", 2 * kHour}, {"duration_ms", 4 * kHour}, {"cores", 1000}}})}};
  return {{"name", "federated-hpc"},
          {"horizon_ms", 8 * kHour},
          {"seed", 1},
          {"schedds", json::array({{{"count", 4}, {"memory_capacity_mb", 2000}, {"ram_per_running_job_mb", 1}}})},
          {"pools", json::array({{{"id", "global"}}, {{"id", "hpc-pool"}, {"role", "subpool"}}})},
          {"providers", json::array({grid("grid", 2000, 1, 8), hpc})},
          {"federation", json::array({{{"from", "global"}, {"to", "hpc-pool"}, {"threshold_ms", 300'000}}})},
          {"workloads", json::array({{{"id", "production"},
                                      {"arrival", {{"mode", "backlog"}, {"idle_per_schedd", 1000}}},
                                      {"cores", 1},
                                      {"memory_mb", 1000},
                                      {"duration_ms", {{"kind", "exponential"}, {"mean", 2.0 * kHour}}}}})},
          {"expectations", json::array({expect("cores_hpc", "peak", 980, 1000), expect("cores_grid", "peak", 1960, 2000)})}};
}

}  // namespace library_detail

inline std::vector<LibraryEntry> scenario_library() {
  using namespace library_detail;
  std::vector<LibraryEntry> lib;
  lib.push_back({"schedd-bottleneck",
                 "Ten 50 GB schedds at 1 MB per running job with a 600k-slot supply: running jobs stop at 500,000.",
                 schedd_bottleneck(50'000, 600'000, 16, 10'000),
                 {}});
  lib.push_back({"schedd-bottleneck-1to100",
                 "The schedd-memory bottleneck at 1:100 scale: ten 500 MB schedds stop at 5,000 running jobs.",
                 schedd_bottleneck(500, 6'000, 4, 1'000),
                 {}});
  {
    json d = ccb_bottleneck(6'000);
    d["expectations"] = json::array({expect("running_total", "plateau", 6000, 6000, 30, 1e-9),
                                     expect("ccb_reg", "plateau", 6000, 6000, 30, 1e-9)});
    lib.push_back({"ccb-bottleneck",
                   "Connection broker capped at 6,000 sockets in front of 12,000 startds and 10,000 schedd slots.",
                   d,
                   {}});
    json r = ccb_bottleneck(20'000);
    r["name"] = "ccb-bottleneck-raised";
    r["expectations"] = json::array({expect("running_total", "plateau", 10000, 10000, 30, 1e-9)});
    lib.push_back({"ccb-bottleneck-raised",
                   "The CCB scenario with the cap raised to 20,000: schedd memory (10,000 jobs) limits instead.",
                   r,
                   {}});
  }
  lib.push_back({"collector-saturation-1to100",
                 "Collector calibrated to saturate at 8,000 slots, offered 16,000 slots.",
                 collector_saturation(8'000, 16'000, 10),
                 {}});
  {
    json d = collector_saturation(800'000, 1'600'000, 100);
    d["name"] = "collector-saturation";
    lib.push_back({"collector-saturation",
                   "Collector calibrated to saturate at 800,000 slots, offered 1,600,000 slots.",
                   d,
                   {}});
  }
  lib.push_back({"optimizations-ablation",
                 "Sub-saturation pool with each central-manager optimization switched on by itself.",
                 ablation(),
                 {{"baseline", json::object()},
                  {"separate_ccb_host", {{"pools", json::array({{{"id", "global"},
                                                                 {"collector", {{"update_cost_ms", 20.0}}},
                                                                 {"features", {{"separate_ccb_host", true}}}}})}}},
                  {"multi_thread_negotiator",
                   {{"pools", json::array({{{"id", "global"},
                                            {"collector", {{"update_cost_ms", 20.0}}},
                                            {"features", {{"multi_thread_negotiator", {{"threads", 4}}}}}}})}}},
                  {"secondary_collectors",
                   {{"pools", json::array({{{"id", "global"},
                                            {"collector", {{"update_cost_ms", 20.0}}},
                                            {"features", {{"secondary_collectors", {{"count", 4}, {"batch_factor", 10}}}}}}})}}},
                  {"update_filtering", {{"pools", json::array({{{"id", "global"},
                                                                {"collector", {{"update_cost_ms", 20.0}}},
                                                                {"features", {{"update_filtering", true}}}}})}}},
                  {"udp_transport", {{"pools", json::array({{{"id", "global"},
                                                             {"collector", {{"update_cost_ms", 20.0}}},
                                                             {"features", {{"udp_transport", true}}}}})}}},
                  {"priority_query_routing",
                   {{"pools", json::array({{{"id", "global"},
                                            {"collector", {{"update_cost_ms", 20.0}}},
                                            {"features", {{"priority_query_routing", true},
                                                          {"secondary_collectors", {{"count", 1}, {"batch_factor", 10}}}}}}})}}}}});
  lib.push_back({"nersc-burst",
                 "A 4,000-core grid pledge plus three 1,000-core HPC bursts of two to four hours.",
                 nersc_burst(),
                 {}});
  {
    json site = {{"pools", json::array({{{"id", "global"}}, {{"id", "hpc-pool"}, {"role", "subpool"}}})},
                 {"federation", json::array()}};
    json fed = federated_hpc();
    json site_providers = fed["providers"];
    site_providers[1]["pool"] = "global";
    site_providers[1]["integration"] = "site_extension";
    site["providers"] = site_providers;
    lib.push_back({"federated-hpc",
                   "An HPC allocation reached through flocking into a subpool, and the same allocation joined to the "
                   "global pool as a site extension.",
                   fed,
                   {{"federated", json::object()}, {"site-extension", site}}});
  }
  return lib;
}

inline std::optional<LibraryEntry> find_scenario(const std::string& name) {
  for (auto& e : scenario_library()) {
    if (e.name == name) return e;
  }
  return std::nullopt;
}

}  // namespace simpool
