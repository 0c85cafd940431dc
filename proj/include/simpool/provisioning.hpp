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

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "simpool/errors.hpp"
#include "simpool/pool_model.hpp"
#include "simpool/random.hpp"
#include "simpool/sim_time.hpp"

namespace simpool {

enum class ProviderKind : std::uint8_t { GridSite, HpcFacility };

// How an HPC facility's slots reach the workload: joining the global pool
// through a grid site's CE, or as a separate pool that receives flocked jobs.
enum class Integration : std::uint8_t { SiteExtension, FederatedSubpool };

struct BurstWindow {
  SimTime start;
  SimTime duration;
  std::int64_t cores = 0;

  SimTime end() const { return start + duration; }
  bool contains(SimTime t) const { return t >= start && t < end(); }
};

struct FederationLink {
  PoolId from;
  PoolId subpool;
  SimTime flock_threshold;
};

/// Checks durations and overlap; returns the windows sorted by start.
inline std::vector<BurstWindow> validate_windows(std::vector<BurstWindow> windows) {
  std::sort(windows.begin(), windows.end(), [](const BurstWindow& a, const BurstWindow& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i].duration.millis <= 0) {
      throw InvalidParameter("burst window " + std::to_string(i) + " has non-positive duration");
    }
    if (windows[i].start.millis < 0) {
      throw InvalidParameter("burst window " + std::to_string(i) + " starts before t=0");
    }
    if (windows[i].cores < 0) {
      throw InvalidParameter("burst window " + std::to_string(i) + " has negative cores");
    }
    if (i > 0 && windows[i].start < windows[i - 1].end()) {
      throw InvalidParameter("burst windows overlap at t=" + std::to_string(windows[i].start.millis) + " ms");
    }
  }
  return windows;
}

/// Parses `start_ms,duration_ms,cores` rows (header required).
inline std::vector<BurstWindow> parse_burst_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("burst schedule: empty file");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "start_ms,duration_ms,cores") {
    throw ParseError("burst schedule: expected header 'start_ms,duration_ms,cores', got '" + line + "'");
  }
  std::vector<BurstWindow> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      continue;
    }
    std::istringstream row(line);
    std::string a, b, c;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c)) {
      throw ParseError("burst schedule line " + std::to_string(lineno) + ": expected 3 fields");
    }
    try {
      std::size_t pa = 0, pb = 0, pc = 0;
      const long long s = std::stoll(a, &pa);
      const long long d = std::stoll(b, &pb);
      const long long k = std::stoll(c, &pc);
      if (pa != a.size() || pb != b.size() || pc != c.size()) {
        throw std::invalid_argument("trailing characters");
      }
      out.push_back({SimTime{s}, SimTime{d}, k});
    } catch (const std::exception&) {
      throw ParseError("burst schedule line " + std::to_string(lineno) + ": non-integer field");
    }
  }
  return validate_windows(std::move(out));
}

inline std::vector<BurstWindow> load_burst_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open burst schedule '" + path + "'");
  }
  return parse_burst_csv(in);
}

/// Optional random schedule for sweep studies: exponential gaps between
/// windows, log-normal core counts, uniform durations.
struct BurstGenerator {
  SimTime mean_gap = hours(12);
  SimTime min_duration = hours(2);
  SimTime max_duration = hours(4);
  double log_cores_mu = 9.0;
  double log_cores_sigma = 0.5;
};

inline std::vector<BurstWindow> generate_bursts(const BurstGenerator& g, SimTime horizon, RandomStream& rng) {
  if (g.max_duration < g.min_duration || g.min_duration.millis <= 0) {
    throw InvalidParameter("burst generator durations must satisfy 0 < min <= max");
  }
  std::vector<BurstWindow> out;
  SimTime t{0};
  while (true) {
    t += SimTime{static_cast<std::int64_t>(rng.exponential(static_cast<double>(g.mean_gap.millis)))};
    if (t >= horizon) {
      break;
    }
    const SimTime d{rng.uniform_int(g.min_duration.millis, g.max_duration.millis)};
    const auto cores = static_cast<std::int64_t>(rng.lognormal(g.log_cores_mu, g.log_cores_sigma));
    out.push_back({t, d, std::max<std::int64_t>(cores, 1)});
    t += d;
  }
  return out;
}

/// Fraction of [0, horizon) covered by windows.
inline double schedule_duty_fraction(const std::vector<BurstWindow>& windows, SimTime horizon) {
  if (horizon.millis <= 0) {
    return 0.0;
  }
  std::int64_t covered = 0;
  for (const auto& w : windows) {
    const std::int64_t a = std::clamp(w.start.millis, std::int64_t{0}, horizon.millis);
    const std::int64_t b = std::clamp(w.end().millis, std::int64_t{0}, horizon.millis);
    covered += b - a;
  }
  return static_cast<double>(covered) / static_cast<double>(horizon.millis);
}

/// Sum of cores x duration (core-milliseconds) within [0, horizon).
inline double schedule_core_integral(const std::vector<BurstWindow>& windows, SimTime horizon) {
  double total = 0.0;
  for (const auto& w : windows) {
    const std::int64_t a = std::clamp(w.start.millis, std::int64_t{0}, horizon.millis);
    const std::int64_t b = std::clamp(w.end().millis, std::int64_t{0}, horizon.millis);
    total += static_cast<double>(w.cores) * static_cast<double>(b - a);
  }
  return total;
}

/// Number of glideins to submit so that live cores approach `target_cores`
/// without exceeding it, limited by the per-tick submission budget.
inline std::int64_t glideins_to_fill(std::int64_t target_cores, std::int64_t live_cores, std::int64_t glidein_cores,
                                     std::int64_t budget) {
  if (glidein_cores <= 0) {
    throw InvalidParameter("glidein must provide at least one core");
  }
  if (live_cores >= target_cores || budget <= 0) {
    return 0;
  }
  return std::min((target_cores - live_cores) / glidein_cores, budget);
}

/// Steady grid pledge: top up only while the pool has idle work.
inline std::int64_t grid_provision_count(std::int64_t pledged_cores, std::int64_t live_cores,
                                         std::int64_t glidein_cores, std::int64_t pool_pressure,
                                         std::int64_t budget) {
  if (pool_pressure <= 0) {
    return 0;
  }
  return glideins_to_fill(pledged_cores, live_cores, glidein_cores, budget);
}

enum class FlockDecision : std::uint8_t { RoutedToSubpool, StayPrimary };

inline FlockDecision flock_route(const Job& job, const FederationLink& link, SimTime at,
                                 std::size_t subpool_viewed_unclaimed) {
  if (job.state != JobState::Idle) {
    throw InvalidParameter("flock_route: job is not idle");
  }
  if (subpool_viewed_unclaimed == 0) {
    return FlockDecision::StayPrimary;
  }
  return at - job.idle_since >= link.flock_threshold ? FlockDecision::RoutedToSubpool : FlockDecision::StayPrimary;
}

}  // namespace simpool
