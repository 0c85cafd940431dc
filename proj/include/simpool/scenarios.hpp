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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "simpool/config.hpp"
#include "simpool/errors.hpp"
#include "simpool/metrics.hpp"
#include "simpool/simulation.hpp"

namespace simpool {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Running a scenario

struct ExpectationResult {
  Expectation expectation;
  std::optional<double> value;  // absent when no plateau was found
  bool ok = false;
};

struct RunResult {
  SummaryStats summary;
  std::vector<ExpectationResult> expectations;
  std::vector<std::string> violations;  // failed expectations and invariants
  SimCounters counters;
  std::uint64_t trace_digest = 0;
  std::int64_t udp_drops_total = 0;
  std::int64_t stale_fail_total = 0;

  bool ok() const { return violations.empty(); }
};

inline std::vector<ExpectationResult> evaluate_expectations(const ScenarioConfig& cfg, const SeriesLayout& layout,
                                                            const std::vector<MetricsFrame>& frames) {
  std::vector<ExpectationResult> out;
  for (const Expectation& e : cfg.expectations) {
    ExpectationResult r{e, std::nullopt, false};
    Series s;
    try {
      s = extract_series(layout, frames, e.series);
    } catch (const InvalidParameter&) {
      out.push_back(r);
      continue;
    }
    const auto st = summarize_series(s, static_cast<std::size_t>(e.window.value_or(cfg.metrics.plateau_window)),
                                     e.tolerance.value_or(cfg.metrics.plateau_tolerance));
    if (e.stat == "plateau") {
      if (st.plateau) r.value = st.plateau->value;
    } else if (e.stat == "peak") {
      r.value = st.peak;
    } else if (e.stat == "mean") {
      r.value = st.mean;
    } else {
      r.value = st.last;
    }
    r.ok = r.value.has_value() && !s.empty() && (!e.min || *r.value >= *e.min) && (!e.max || *r.value <= *e.max);
    out.push_back(r);
  }
  return out;
}

inline std::string describe(const ExpectationResult& r) {
  std::ostringstream os;
  os << r.expectation.stat << "(" << r.expectation.series << ") = ";
  if (r.value) {
    os << format_real(*r.value);
  } else {
    os << "none";
  }
  os << ", expected";
  if (r.expectation.min) os << " >= " << format_real(*r.expectation.min);
  if (r.expectation.min && r.expectation.max) os << " and";
  if (r.expectation.max) os << " <= " << format_real(*r.expectation.max);
  return os.str();
}

inline json summary_to_json(const ScenarioConfig& cfg, const RunResult& r) {
  json j;
  j["scenario"] = cfg.name;
  j["seed"] = cfg.seed;
  j["horizon_ms"] = cfg.horizon.millis;
  json series = json::object();
  for (const auto& [name, st] : r.summary.series) {
    json s;
    if (st.plateau) {
      s["plateau"] = {{"value", st.plateau->value}, {"start_ms", st.plateau->start.millis}, {"samples", st.plateau->samples}};
    } else {
      s["plateau"] = nullptr;
    }
    s["peak"] = st.peak;
    s["mean"] = st.mean;
    s["last"] = st.last;
    series[name] = s;
  }
  j["series"] = series;
  const SimCounters& c = r.counters;
  j["counters"] = {{"submitted", c.submitted},
                   {"submit_rejected", c.submit_rejected},
                   {"started", c.started},
                   {"completed", c.completed},
                   {"evicted", c.evicted},
                   {"flocked", c.flocked},
                   {"transition_updates", c.transition_updates},
                   {"heartbeat_updates", c.heartbeat_updates},
                   {"initial_updates", c.initial_updates},
                   {"invalidations", c.invalidations},
                   {"claims_ok", c.claims_ok},
                   {"claims_stale", c.claims_stale},
                   {"claims_other", c.claims_other},
                   {"ccb_attempts", c.ccb_attempts},
                   {"ccb_rejections", c.ccb_rejections},
                   {"nego_cycles", c.nego_cycles},
                   {"glideins_spawned", c.glideins_spawned}};
  j["expectations"] = json::array();
  for (const auto& e : r.expectations) {
    j["expectations"].push_back({{"series", e.expectation.series},
                                 {"stat", e.expectation.stat},
                                 {"value", e.value ? json(*e.value) : json(nullptr)},
                                 {"ok", e.ok}});
  }
  char digest[32];
  std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(r.trace_digest));
  j["trace_digest"] = digest;
  j["ok"] = r.ok();
  return j;
}

/// Runs a simulation in memory and evaluates its expectations.
inline RunResult simulate(const ScenarioConfig& cfg, std::vector<MetricsFrame>* frames_out = nullptr,
                          SeriesLayout* layout_out = nullptr) {
  Simulation sim(cfg);
  sim.run();
  RunResult r;
  r.summary = summarize(sim.layout(), sim.frames(), static_cast<std::size_t>(cfg.metrics.plateau_window),
                        cfg.metrics.plateau_tolerance);
  r.expectations = evaluate_expectations(cfg, sim.layout(), sim.frames());
  for (const auto& e : r.expectations) {
    if (!e.ok) r.violations.push_back(describe(e));
  }
  for (const auto& v : sim.violations()) r.violations.push_back("invariant: " + v);
  r.counters = sim.counters();
  r.trace_digest = sim.trace_digest();
  for (const auto& f : sim.frames()) {
    r.udp_drops_total += f.udp_drops;
    r.stale_fail_total += f.stale_fail;
  }
  if (frames_out) *frames_out = sim.frames();
  if (layout_out) *layout_out = sim.layout();
  return r;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir.string() + "'" + (ec ? ": " + ec.message() : ""));
  }
}

/// Runs `cfg` and writes metrics.csv, summary.json and resolved-config.json
/// into `out_dir`. Output files are written before expectations are judged.
inline RunResult run_scenario(const ScenarioConfig& cfg, const fs::path& out_dir) {
  ensure_dir(out_dir);
  write_text(out_dir / "resolved-config.json", to_json(cfg).dump(2) + "\n");
  std::vector<MetricsFrame> frames;
  SeriesLayout layout;
  RunResult r = simulate(cfg, &frames, &layout);
  write_series((out_dir / "metrics.csv").string(), layout, frames);
  write_text(out_dir / "summary.json", summary_to_json(cfg, r).dump(2) + "\n");
  return r;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepPoint {
  std::string value;
  fs::path dir;
  RunResult result;
};

/// Splits "a,b,c" into trimmed, non-empty items.
inline std::vector<std::string> split_values(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

/// Returns `resolved` with the numeric field at `pointer` set to `value`.
inline json with_parameter(const json& resolved, const std::string& pointer, const std::string& value) {
  json::json_pointer ptr;
  try {
    ptr = json::json_pointer(pointer);
  } catch (const json::exception& e) {
    throw ValidationError(pointer, std::string("malformed parameter path: ") + e.what());
  }
  if (!resolved.contains(ptr)) throw ValidationError(pointer, "parameter path does not exist in the resolved config");
  const json& cur = resolved.at(ptr);
  if (!cur.is_number()) throw ValidationError(pointer, "parameter path does not address a numeric field");
  double v = 0;
  std::size_t used = 0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != value.size() || !std::isfinite(v)) throw ValidationError(pointer, "sweep value '" + value + "' is not a number");
  json out = resolved;
  if (cur.is_number_integer() && std::floor(v) == v) {
    out[ptr] = static_cast<std::int64_t>(v);
  } else {
    out[ptr] = v;
  }
  return out;
}

inline std::string sweep_dir_name(const std::string& pointer, const std::string& value) {
  std::string leaf = pointer.substr(pointer.find_last_of('/') + 1);
  if (leaf.empty()) leaf = "param";
  std::string name = leaf + "-" + value;
  for (char& c : name) {
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  }
  return name;
}

inline std::string sweep_summary_csv(const std::string& pointer, const std::vector<SweepPoint>& points) {
  std::ostringstream os;
  os << "param,value,dir,running_plateau,running_peak,running_last,duty_top_peak,duty_top_mean,udp_drops_total,"
        "stale_fail_total,nego_ms_last,ok\n";
  for (const auto& p : points) {
    const auto& s = p.result.summary.series;
    const auto& run = s.at("running_total");
    const auto& duty = s.at("duty_top");
    os << pointer << ',' << p.value << ',' << p.dir.filename().string() << ','
       << (run.plateau ? format_real(run.plateau->value) : std::string()) << ',' << format_real(run.peak) << ','
       << format_real(run.last) << ',' << format_real(duty.peak) << ',' << format_real(duty.mean) << ','
       << p.result.udp_drops_total << ',' << p.result.stale_fail_total << ',' << format_real(s.at("nego_ms").last)
       << ',' << (p.result.ok() ? 1 : 0) << '\n';
  }
  return os.str();
}

/// One fresh simulation per value; each run sees only its own config.
inline std::vector<SweepPoint> sweep(const ScenarioConfig& base, const std::string& pointer,
                                     const std::vector<std::string>& values, const fs::path& out_dir) {
  if (values.empty()) throw ValidationError(pointer, "no sweep values given");
  const json resolved = to_json(base);
  std::vector<json> docs;
  for (const auto& v : values) docs.push_back(with_parameter(resolved, pointer, v));
  ensure_dir(out_dir);
  std::vector<SweepPoint> points;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const ScenarioConfig cfg = parse_config(docs[i]);
    const fs::path dir = out_dir / sweep_dir_name(pointer, values[i]);
    points.push_back({values[i], dir, run_scenario(cfg, dir)});
  }
  write_text(out_dir / "sweep-summary.csv", sweep_summary_csv(pointer, points));
  return points;
}

}  // namespace simpool
