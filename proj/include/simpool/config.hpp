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
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "simpool/central_manager.hpp"
#include "simpool/errors.hpp"
#include "simpool/pool_model.hpp"
#include "simpool/provisioning.hpp"
#include "simpool/random.hpp"
#include "simpool/sim_time.hpp"
#include "simpool/workload.hpp"

namespace simpool {

using json = nlohmann::ordered_json;

// The six central-manager optimizations, each independently switchable.
struct FeatureToggles {
  bool separate_ccb_host = false;
  bool multi_thread_negotiator = false;
  int negotiator_threads = 4;
  bool secondary_collectors = false;
  int secondary_count = 1;
  int batch_factor = 10;
  bool update_filtering = false;
  bool udp_transport = false;
  std::int64_t udp_buffer = 10'000;
  bool priority_query_routing = false;

  int effective_threads() const { return multi_thread_negotiator ? negotiator_threads : 1; }
  int effective_secondaries() const { return secondary_collectors ? secondary_count : 0; }
};

struct CalibrationSpec {
  std::int64_t target_slots = 8000;
  SimTime mean_job_duration = hours(6);
  std::optional<SimTime> heartbeat_interval;  // defaults to the pool's
  std::optional<bool> filtering;              // defaults to the pool's toggle
};

struct CollectorConfig {
  double update_cost_ms = 10.0;
  std::optional<CalibrationSpec> calibrate;
  double query_high_cost_ms = 50.0;
  double query_low_cost_ms = 200.0;
};

struct NegotiatorConfig {
  int count = 1;  // 0 disables matchmaking in this pool
  double match_cost_ms = 1.0;
  SimTime cycle_delay = seconds(60);
};

struct CcbConfig {
  std::optional<std::int64_t> max_connections;
  SimTime retry_backoff = seconds(60);
  // Collector time charged per registration attempt when the broker shares
  // the central-manager host.
  double shared_host_cost_ms = 5.0;
};

struct MonitoringConfig {
  SimTime query_interval = seconds(60);
  int queries_per_interval = 1;
};

enum class PoolRole : std::uint8_t { Global, Subpool };

struct PoolConfig {
  std::string id = "global";
  PoolRole role = PoolRole::Global;
  SimTime heartbeat_interval = minutes(5);
  CollectorConfig collector;
  NegotiatorConfig negotiator;
  CcbConfig ccb;
  MonitoringConfig monitoring;
  FeatureToggles features;
};

struct ScheddConfig {
  std::string id;
  std::int64_t memory_capacity_mb = 50'000;
  std::int64_t ram_per_running_job_mb = 1;
  std::optional<std::int64_t> idle_queue_cap;
  std::vector<std::string> pools;  // empty: the global pool
};

struct ProviderConfig {
  std::string id;
  ProviderKind kind = ProviderKind::GridSite;
  std::string pool;  // empty: the global pool
  std::int64_t pledged_cores = 0;
  std::vector<BurstWindow> bursts;
  Integration integration = Integration::SiteExtension;
  GlideinSpec glidein;
  double submission_rate_per_min = 600.0;
  SimTime grace = hours(6);
  SimTime provision_interval = seconds(60);
  std::optional<Distribution> start_delay_ms;
};

struct FederationConfig {
  std::string from;
  std::string to;
  SimTime threshold = minutes(5);
};

struct WorkloadConfig {
  std::string id;
  StreamLabel label = StreamLabel::Production;
  std::vector<std::string> target_schedds;  // empty after resolution is an error
  ArrivalMode mode = ArrivalMode::Backlog;
  std::int64_t backlog_per_schedd = 1000;
  double rate_per_s = 1.0;
  RateProcess process = RateProcess::Constant;
  SimTime start{0};
  std::optional<SimTime> stop;
  Distribution cores = Distribution::fixed(1);
  Distribution memory_mb = Distribution::fixed(2000);
  Distribution duration_ms = Distribution::exponential(6.0 * 3'600'000.0);
};

struct MetricsConfig {
  SimTime interval = seconds(60);
  std::optional<SimTime> duty_window;  // defaults to interval
  std::int64_t plateau_window = 10;
  double plateau_tolerance = 0.01;

  SimTime effective_duty_window() const { return duty_window.value_or(interval); }
};

/// Executable expectation on a summary statistic of one metrics column.
struct Expectation {
  std::string series;
  std::string stat = "plateau";  // plateau | peak | mean | last
  std::optional<double> min;
  std::optional<double> max;
  std::optional<std::int64_t> window;
  std::optional<double> tolerance;
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::string description;
  SimTime horizon = hours(12);
  std::uint64_t seed = 1;
  std::vector<ScheddConfig> schedds;
  std::vector<PoolConfig> pools;
  std::vector<ProviderConfig> providers;
  std::vector<WorkloadConfig> workloads;
  std::vector<FederationConfig> federation;
  MetricsConfig metrics;
  std::vector<Expectation> expectations;
  bool check_invariants = false;

  std::optional<std::size_t> pool_index(const std::string& id) const {
    for (std::size_t i = 0; i < pools.size(); ++i) {
      if (pools[i].id == id) return i;
    }
    return std::nullopt;
  }
  std::optional<std::size_t> schedd_index(const std::string& id) const {
    for (std::size_t i = 0; i < schedds.size(); ++i) {
      if (schedds[i].id == id) return i;
    }
    return std::nullopt;
  }
  std::size_t global_pool() const {
    for (std::size_t i = 0; i < pools.size(); ++i) {
      if (pools[i].role == PoolRole::Global) return i;
    }
    return 0;
  }
};

namespace detail {

inline std::string join_path(const std::string& base, const std::string& key) {
  std::string k;
  for (char c : key) {
    if (c == '~') k += "~0";
    else if (c == '/') k += "~1";
    else k += c;
  }
  return base + "/" + k;
}

inline std::string join_path(const std::string& base, std::size_t i) { return base + "/" + std::to_string(i); }

/// Strict reader over one JSON object: every key must be consumed.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw ValidationError(path_.empty() ? "/" : path_, "expected an object");
    }
  }

  ~ObjectReader() = default;

  const std::string& path() const { return path_; }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string at(const std::string& key) const { return join_path(path_, key); }

  template <class T>
  void number(const std::string& key, T& out, std::optional<T> lo = std::nullopt, std::optional<T> hi = std::nullopt) {
    const json* v = get(key);
    if (!v) return;
    if constexpr (std::is_integral_v<T>) {
      if (!v->is_number_integer() && !(v->is_number_float() && std::floor(v->get<double>()) == v->get<double>())) {
        throw ValidationError(at(key), "expected an integer");
      }
      if (v->is_number_float()) {
        out = static_cast<T>(v->get<double>());
      } else if (v->is_number_unsigned()) {
        out = static_cast<T>(v->get<std::uint64_t>());
      } else {
        out = static_cast<T>(v->get<std::int64_t>());
      }
    } else {
      if (!v->is_number()) throw ValidationError(at(key), "expected a number");
      out = v->get<T>();
      if (!std::isfinite(static_cast<double>(out))) throw ValidationError(at(key), "must be finite");
    }
    if (lo && out < *lo) throw ValidationError(at(key), "must be >= " + to_str(*lo));
    if (hi && out > *hi) throw ValidationError(at(key), "must be <= " + to_str(*hi));
  }

  void time(const std::string& key, SimTime& out, std::int64_t min_ms = 0) {
    std::int64_t ms = out.millis;
    number<std::int64_t>(key, ms, min_ms);
    out = SimTime{ms};
  }

  void boolean(const std::string& key, bool& out) {
    const json* v = get(key);
    if (!v) return;
    if (!v->is_boolean()) throw ValidationError(at(key), "expected a boolean");
    out = v->get<bool>();
  }

  void string(const std::string& key, std::string& out) {
    const json* v = get(key);
    if (!v) return;
    if (!v->is_string()) throw ValidationError(at(key), "expected a string");
    out = v->get<std::string>();
  }

  template <class E>
  void enumeration(const std::string& key, E& out, std::initializer_list<std::pair<const char*, E>> options) {
    const json* v = get(key);
    if (!v) return;
    if (!v->is_string()) throw ValidationError(at(key), "expected a string");
    const auto s = v->get<std::string>();
    std::string allowed;
    for (const auto& [name, value] : options) {
      if (s == name) {
        out = value;
        return;
      }
      allowed += (allowed.empty() ? "" : ", ") + std::string(name);
    }
    throw ValidationError(at(key), "unknown value '" + s + "' (expected one of: " + allowed + ")");
  }

  /// Rejects keys that were never asked for.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.contains(it.key())) {
        throw ValidationError(at(it.key()), "unknown key");
      }
    }
  }

 private:
  template <class T>
  static std::string to_str(T v) {
    std::ostringstream os;
    os << v;
    return os.str();
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void check_id(const std::string& id, const std::string& path) {
  if (id.empty()) throw ValidationError(path, "id must not be empty");
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                    c == '-' || c == '.';
    if (!ok) throw ValidationError(path, "id '" + id + "' may only contain letters, digits, '_', '-' and '.'");
  }
}

inline Distribution parse_distribution(const json& j, const std::string& path) {
  if (j.is_number()) {
    return Distribution::fixed(j.get<double>());
  }
  ObjectReader r(j, path);
  std::string kind = "fixed";
  r.string("kind", kind);
  Distribution d;
  if (kind == "fixed") {
    d.kind = Distribution::Kind::Fixed;
    if (!r.has("value")) throw ValidationError(r.at("value"), "required");
    r.number<double>("value", d.a);
  } else if (kind == "exponential") {
    d.kind = Distribution::Kind::Exponential;
    if (!r.has("mean")) throw ValidationError(r.at("mean"), "required");
    r.number<double>("mean", d.a);
    if (!(d.a > 0)) throw ValidationError(r.at("mean"), "must be > 0");
  } else if (kind == "uniform") {
    d.kind = Distribution::Kind::Uniform;
    if (!r.has("min") || !r.has("max")) throw ValidationError(r.path(), "uniform requires min and max");
    r.number<double>("min", d.a);
    r.number<double>("max", d.b);
    if (d.b < d.a) throw ValidationError(r.at("max"), "must be >= min");
  } else if (kind == "choice") {
    d.kind = Distribution::Kind::Choice;
    for (const char* key : {"values", "weights"}) {
      const json* v = r.get(key);
      if (!v || !v->is_array()) throw ValidationError(r.at(key), "expected an array of numbers");
      auto& dst = std::string(key) == "values" ? d.values : d.weights;
      for (std::size_t i = 0; i < v->size(); ++i) {
        if (!(*v)[i].is_number()) throw ValidationError(join_path(r.at(key), i), "expected a number");
        dst.push_back((*v)[i].get<double>());
      }
    }
    try {
      d.validate();
    } catch (const InvalidParameter& e) {
      throw ValidationError(r.path(), e.what());
    }
  } else {
    throw ValidationError(r.at("kind"), "unknown distribution '" + kind + "'");
  }
  r.finish();
  return d;
}

inline json distribution_to_json(const Distribution& d) {
  switch (d.kind) {
    case Distribution::Kind::Fixed: return json{{"kind", "fixed"}, {"value", d.a}};
    case Distribution::Kind::Exponential: return json{{"kind", "exponential"}, {"mean", d.a}};
    case Distribution::Kind::Uniform: return json{{"kind", "uniform"}, {"min", d.a}, {"max", d.b}};
    case Distribution::Kind::Choice: return json{{"kind", "choice"}, {"values", d.values}, {"weights", d.weights}};
  }
  return json{};
}

inline std::vector<std::string> parse_string_list(const json* v, const std::string& path) {
  std::vector<std::string> out;
  if (!v) return out;
  if (!v->is_array()) throw ValidationError(path, "expected an array of strings");
  for (std::size_t i = 0; i < v->size(); ++i) {
    if (!(*v)[i].is_string()) throw ValidationError(join_path(path, i), "expected a string");
    out.push_back((*v)[i].get<std::string>());
  }
  return out;
}

inline const json& require_array(const json* v, const std::string& path) {
  if (!v || !v->is_array()) throw ValidationError(path, "expected an array");
  return *v;
}

inline FeatureToggles parse_features(const json& j, const std::string& path) {
  FeatureToggles f;
  ObjectReader r(j, path);
  r.boolean("separate_ccb_host", f.separate_ccb_host);
  r.boolean("update_filtering", f.update_filtering);
  r.boolean("priority_query_routing", f.priority_query_routing);
  // Parameterized toggles accept false, true (defaults) or an object.
  auto toggle = [&](const char* key, bool& on, auto&& read_params) {
    const json* v = r.get(key);
    if (!v) return;
    if (v->is_boolean()) {
      on = v->get<bool>();
      return;
    }
    ObjectReader sub(*v, r.at(key));
    on = true;
    read_params(sub);
    sub.finish();
  };
  toggle("multi_thread_negotiator", f.multi_thread_negotiator,
         [&](ObjectReader& s) { s.number<int>("threads", f.negotiator_threads, 1); });
  toggle("secondary_collectors", f.secondary_collectors, [&](ObjectReader& s) {
    s.number<int>("count", f.secondary_count, 1);
    s.number<int>("batch_factor", f.batch_factor, 1);
  });
  toggle("udp_transport", f.udp_transport,
         [&](ObjectReader& s) { s.number<std::int64_t>("buffer", f.udp_buffer, std::int64_t{0}); });
  r.finish();
  return f;
}

inline json features_to_json(const FeatureToggles& f) {
  json j;
  j["separate_ccb_host"] = f.separate_ccb_host;
  j["multi_thread_negotiator"] = f.multi_thread_negotiator ? json{{"threads", f.negotiator_threads}} : json(false);
  j["secondary_collectors"] = f.secondary_collectors
                                  ? json{{"count", f.secondary_count}, {"batch_factor", f.batch_factor}}
                                  : json(false);
  j["update_filtering"] = f.update_filtering;
  j["udp_transport"] = f.udp_transport ? json{{"buffer", f.udp_buffer}} : json(false);
  j["priority_query_routing"] = f.priority_query_routing;
  return j;
}

inline PoolConfig parse_pool(const json& j, const std::string& path, std::size_t index) {
  PoolConfig p;
  p.id = index == 0 ? "global" : "pool" + std::to_string(index);
  p.role = index == 0 ? PoolRole::Global : PoolRole::Subpool;
  ObjectReader r(j, path);
  r.string("id", p.id);
  check_id(p.id, r.at("id"));
  r.enumeration("role", p.role, {{"global", PoolRole::Global}, {"subpool", PoolRole::Subpool}});
  r.time("heartbeat_interval_ms", p.heartbeat_interval, 1);
  if (const json* f = r.get("features")) p.features = parse_features(*f, r.at("features"));
  if (const json* c = r.get("collector")) {
    ObjectReader cr(*c, r.at("collector"));
    cr.number<double>("update_cost_ms", p.collector.update_cost_ms, 0.0);
    cr.number<double>("query_high_cost_ms", p.collector.query_high_cost_ms, 0.0);
    cr.number<double>("query_low_cost_ms", p.collector.query_low_cost_ms, 0.0);
    if (const json* cal = cr.get("calibrate")) {
      ObjectReader kr(*cal, cr.at("calibrate"));
      CalibrationSpec spec;
      if (!kr.has("target_slots")) throw ValidationError(kr.at("target_slots"), "required");
      kr.number<std::int64_t>("target_slots", spec.target_slots, std::int64_t{1});
      kr.time("mean_job_duration_ms", spec.mean_job_duration, 1);
      if (kr.has("heartbeat_interval_ms")) {
        SimTime hb = p.heartbeat_interval;
        kr.time("heartbeat_interval_ms", hb, 1);
        spec.heartbeat_interval = hb;
      }
      if (kr.has("filtering")) {
        bool f = false;
        kr.boolean("filtering", f);
        spec.filtering = f;
      }
      kr.finish();
      if (cr.has("update_cost_ms")) {
        throw ValidationError(cr.at("calibrate"), "give either update_cost_ms or calibrate, not both");
      }
      p.collector.calibrate = spec;
    }
    cr.finish();
  }
  if (const json* n = r.get("negotiator")) {
    ObjectReader nr(*n, r.at("negotiator"));
    nr.number<int>("count", p.negotiator.count, 0);
    nr.number<double>("match_cost_ms", p.negotiator.match_cost_ms, 0.0);
    nr.time("cycle_delay_ms", p.negotiator.cycle_delay, 1);
    nr.finish();
  }
  if (const json* c = r.get("ccb")) {
    ObjectReader cr(*c, r.at("ccb"));
    if (const json* m = cr.get("max_connections"); m && !m->is_null()) {
      if (!m->is_number_integer() || m->get<std::int64_t>() < 0) {
        throw ValidationError(cr.at("max_connections"), "expected null or a non-negative integer");
      }
      p.ccb.max_connections = m->get<std::int64_t>();
    }
    cr.time("retry_backoff_ms", p.ccb.retry_backoff, 1);
    cr.number<double>("shared_host_cost_ms", p.ccb.shared_host_cost_ms, 0.0);
    cr.finish();
  }
  if (const json* m = r.get("monitoring")) {
    ObjectReader mr(*m, r.at("monitoring"));
    mr.time("query_interval_ms", p.monitoring.query_interval, 1);
    mr.number<int>("queries_per_interval", p.monitoring.queries_per_interval, 0);
    mr.finish();
  }
  r.finish();
  // Calibration is resolved into a concrete per-update cost.
  if (p.collector.calibrate) {
    const auto& c = *p.collector.calibrate;
    p.collector.update_cost_ms =
        calibrate_collector(c.target_slots, c.mean_job_duration, c.heartbeat_interval.value_or(p.heartbeat_interval),
                            c.filtering.value_or(p.features.update_filtering));
  }
  return p;
}

inline GlideinSpec parse_glidein(const json& j, const std::string& path) {
  GlideinSpec g;
  ObjectReader r(j, path);
  r.number<int>("startds", g.startds, 1);
  r.number<int>("slots_per_startd", g.slots_per_startd, 1);
  r.number<int>("slot_cores", g.slot_cores, 1);
  r.number<std::int64_t>("slot_memory_mb", g.slot_memory_mb, std::int64_t{0});
  r.time("lifetime_ms", g.lifetime, 1);
  r.finish();
  return g;
}

inline std::vector<BurstWindow> parse_windows(const json& arr, const std::string& path) {
  std::vector<BurstWindow> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    ObjectReader r(arr[i], join_path(path, i));
    BurstWindow w;
    r.time("start_ms", w.start);
    if (!r.has("duration_ms")) throw ValidationError(r.at("duration_ms"), "required");
    r.time("duration_ms", w.duration, 1);
    r.number<std::int64_t>("cores", w.cores, std::int64_t{0});
    r.finish();
    out.push_back(w);
  }
  try {
    return validate_windows(std::move(out));
  } catch (const InvalidParameter& e) {
    throw ValidationError(path, e.what());
  }
}

inline ProviderConfig parse_provider(const json& j, const std::string& path, std::size_t index, std::uint64_t seed,
                                     SimTime horizon, const std::filesystem::path& base_dir) {
  ProviderConfig p;
  p.id = "provider" + std::to_string(index);
  ObjectReader r(j, path);
  r.string("id", p.id);
  check_id(p.id, r.at("id"));
  r.enumeration("kind", p.kind, {{"grid", ProviderKind::GridSite}, {"hpc", ProviderKind::HpcFacility}});
  r.string("pool", p.pool);
  r.number<std::int64_t>("pledged_cores", p.pledged_cores, std::int64_t{0});
  r.enumeration("integration", p.integration,
                {{"site_extension", Integration::SiteExtension}, {"federated_subpool", Integration::FederatedSubpool}});
  if (const json* g = r.get("glidein")) p.glidein = parse_glidein(*g, r.at("glidein"));
  r.number<double>("submission_rate_per_min", p.submission_rate_per_min, 0.0);
  r.time("grace_ms", p.grace);
  r.time("provision_interval_ms", p.provision_interval, 1);
  if (const json* d = r.get("start_delay_ms")) p.start_delay_ms = parse_distribution(*d, r.at("start_delay_ms"));
  int sources = 0;
  if (const json* b = r.get("bursts")) {
    p.bursts = parse_windows(require_array(b, r.at("bursts")), r.at("bursts"));
    ++sources;
  }
  if (const json* csv = r.get("bursts_csv")) {
    if (!csv->is_string()) throw ValidationError(r.at("bursts_csv"), "expected a path string");
    std::filesystem::path file = csv->get<std::string>();
    if (file.is_relative()) file = base_dir / file;
    try {
      p.bursts = load_burst_csv(file.string());
    } catch (const Error& e) {
      throw ValidationError(r.at("bursts_csv"), e.what());
    }
    ++sources;
  }
  if (const json* g = r.get("burst_generator")) {
    ObjectReader gr(*g, r.at("burst_generator"));
    BurstGenerator gen;
    gr.time("mean_gap_ms", gen.mean_gap, 1);
    gr.time("min_duration_ms", gen.min_duration, 1);
    gr.time("max_duration_ms", gen.max_duration, 1);
    gr.number<double>("log_cores_mu", gen.log_cores_mu);
    gr.number<double>("log_cores_sigma", gen.log_cores_sigma, 0.0);
    gr.finish();
    if (gen.max_duration < gen.min_duration) throw ValidationError(gr.at("max_duration_ms"), "must be >= min_duration_ms");
    RandomStream rng(seed, "provider/" + p.id + "/bursts");
    p.bursts = generate_bursts(gen, horizon, rng);
    ++sources;
  }
  r.finish();
  if (sources > 1) {
    throw ValidationError(path, "give at most one of bursts, bursts_csv, burst_generator");
  }
  if (p.kind == ProviderKind::GridSite && !p.bursts.empty()) {
    throw ValidationError(r.at("bursts"), "grid sites have no burst schedule");
  }
  if (p.kind == ProviderKind::HpcFacility && p.pledged_cores != 0) {
    throw ValidationError(r.at("pledged_cores"), "HPC facilities have no steady pledge; use bursts");
  }
  if (p.kind == ProviderKind::GridSite && j.contains("integration")) {
    throw ValidationError(r.at("integration"), "integration mode applies to HPC facilities only");
  }
  return p;
}

inline ScheddConfig parse_schedd_fields(ObjectReader& r, ScheddConfig s) {
  r.number<std::int64_t>("memory_capacity_mb", s.memory_capacity_mb, std::int64_t{0});
  if (r.has("ram_per_running_job_mb")) {
    r.number<std::int64_t>("ram_per_running_job_mb", s.ram_per_running_job_mb);
    if (s.ram_per_running_job_mb <= 0) {
      throw ValidationError(r.at("ram_per_running_job_mb"), "must be > 0");
    }
  }
  if (r.has("idle_queue_cap")) {
    std::int64_t cap = 0;
    r.number<std::int64_t>("idle_queue_cap", cap, std::int64_t{0});
    s.idle_queue_cap = cap;
  }
  s.pools = parse_string_list(r.get("pools"), r.at("pools"));
  return s;
}

inline WorkloadConfig parse_workload(const json& j, const std::string& path, std::size_t index) {
  WorkloadConfig w;
  w.id = "stream" + std::to_string(index);
  ObjectReader r(j, path);
  r.string("id", w.id);
  check_id(w.id, r.at("id"));
  r.enumeration("label", w.label,
                {{"production", StreamLabel::Production}, {"analysis", StreamLabel::Analysis},
                 {"tier0", StreamLabel::Tier0}});
  if (r.has("target_schedds")) {
    w.target_schedds = parse_string_list(r.get("target_schedds"), r.at("target_schedds"));
    if (w.target_schedds.empty()) throw ValidationError(r.at("target_schedds"), "target list must not be empty");
  }
  if (const json* a = r.get("arrival")) {
    ObjectReader ar(*a, r.at("arrival"));
    ar.enumeration("mode", w.mode, {{"backlog", ArrivalMode::Backlog}, {"rate", ArrivalMode::Rate}});
    if (w.mode == ArrivalMode::Backlog) {
      ar.number<std::int64_t>("idle_per_schedd", w.backlog_per_schedd, std::int64_t{0});
    } else {
      ar.number<double>("rate_per_s", w.rate_per_s);
      if (!(w.rate_per_s > 0)) throw ValidationError(ar.at("rate_per_s"), "must be > 0");
      ar.enumeration("process", w.process, {{"constant", RateProcess::Constant}, {"poisson", RateProcess::Poisson}});
    }
    ar.time("start_ms", w.start);
    if (ar.has("stop_ms")) {
      SimTime stop{0};
      ar.time("stop_ms", stop);
      w.stop = stop;
    }
    ar.finish();
  }
  auto dist = [&](const char* key, Distribution& d) {
    if (const json* v = r.get(key)) d = parse_distribution(*v, r.at(key));
  };
  dist("cores", w.cores);
  dist("memory_mb", w.memory_mb);
  dist("duration_ms", w.duration_ms);
  r.finish();
  if (w.duration_ms.kind == Distribution::Kind::Fixed && w.duration_ms.a < 1) {
    throw ValidationError(r.at("duration_ms"), "durations must be >= 1 ms");
  }
  if (w.cores.kind == Distribution::Kind::Fixed && w.cores.a < 1) {
    throw ValidationError(r.at("cores"), "cores must be >= 1");
  }
  return w;
}

}  // namespace detail

/// Parses and validates a scenario document (strict: unknown keys are
/// rejected). `base_dir` resolves relative burst CSV paths.
inline ScenarioConfig parse_config(const json& doc, const std::filesystem::path& base_dir = ".") {
  using namespace detail;
  ScenarioConfig c;
  ObjectReader r(doc, "");
  r.string("name", c.name);
  r.string("description", c.description);
  r.time("horizon_ms", c.horizon);
  r.number<std::uint64_t>("seed", c.seed);
  r.boolean("check_invariants", c.check_invariants);

  // schedds (with optional `count` expansion)
  {
    const json& arr = require_array(r.get("schedds"), "/schedds");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string path = join_path("/schedds", i);
      ObjectReader sr(arr[i], path);
      std::int64_t count = 1;
      const bool counted = sr.has("count");
      sr.number<std::int64_t>("count", count, std::int64_t{1}, std::int64_t{100'000});
      std::string id;
      sr.string("id", id);
      ScheddConfig base = parse_schedd_fields(sr, ScheddConfig{});
      sr.finish();
      for (std::int64_t k = 0; k < count; ++k) {
        ScheddConfig s = base;
        if (counted) {
          s.id = (id.empty() ? "schedd" : id + "-") + std::to_string(k);
          if (id.empty()) s.id = "schedd" + std::to_string(c.schedds.size());
        } else {
          s.id = id.empty() ? "schedd" + std::to_string(c.schedds.size()) : id;
        }
        check_id(s.id, join_path(path, "id"));
        c.schedds.push_back(std::move(s));
      }
    }
    if (c.schedds.empty()) throw ValidationError("/schedds", "at least one schedd is required");
  }
  {
    const json& arr = require_array(r.get("pools"), "/pools");
    for (std::size_t i = 0; i < arr.size(); ++i) c.pools.push_back(parse_pool(arr[i], join_path("/pools", i), i));
    if (c.pools.empty()) throw ValidationError("/pools", "at least one pool is required");
  }
  if (const json* arr = r.get("providers")) {
    require_array(arr, "/providers");
    for (std::size_t i = 0; i < arr->size(); ++i) {
      c.providers.push_back(parse_provider((*arr)[i], join_path("/providers", i), i, c.seed, c.horizon, base_dir));
    }
  }
  {
    const json& arr = require_array(r.get("workloads"), "/workloads");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      c.workloads.push_back(parse_workload(arr[i], join_path("/workloads", i), i));
    }
    if (c.workloads.empty()) throw ValidationError("/workloads", "at least one workload stream is required");
  }
  if (const json* arr = r.get("federation")) {
    require_array(arr, "/federation");
    for (std::size_t i = 0; i < arr->size(); ++i) {
      ObjectReader fr((*arr)[i], join_path("/federation", i));
      FederationConfig f;
      fr.string("from", f.from);
      fr.string("to", f.to);
      fr.time("threshold_ms", f.threshold);
      fr.finish();
      c.federation.push_back(f);
    }
  }
  if (const json* m = r.get("metrics")) {
    ObjectReader mr(*m, "/metrics");
    mr.time("interval_ms", c.metrics.interval, 1);
    if (mr.has("duty_window_ms")) {
      SimTime w{1};
      mr.time("duty_window_ms", w, 1);
      c.metrics.duty_window = w;
    }
    mr.number<std::int64_t>("plateau_window", c.metrics.plateau_window, std::int64_t{2});
    mr.number<double>("plateau_tolerance", c.metrics.plateau_tolerance);
    if (!(c.metrics.plateau_tolerance > 0)) throw ValidationError("/metrics/plateau_tolerance", "must be > 0");
    mr.finish();
  }
  if (const json* arr = r.get("expectations")) {
    require_array(arr, "/expectations");
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const std::string path = join_path("/expectations", i);
      ObjectReader er((*arr)[i], path);
      Expectation e;
      er.string("series", e.series);
      if (e.series.empty()) throw ValidationError(er.at("series"), "required");
      er.string("stat", e.stat);
      if (e.stat != "plateau" && e.stat != "peak" && e.stat != "mean" && e.stat != "last") {
        throw ValidationError(er.at("stat"), "expected plateau, peak, mean or last");
      }
      auto opt_num = [&](const char* key, std::optional<double>& dst) {
        if (er.has(key)) {
          double v = 0;
          er.number<double>(key, v);
          dst = v;
        }
      };
      opt_num("min", e.min);
      opt_num("max", e.max);
      opt_num("tolerance", e.tolerance);
      if (er.has("window")) {
        std::int64_t w = 0;
        er.number<std::int64_t>("window", w, std::int64_t{2});
        e.window = w;
      }
      er.finish();
      c.expectations.push_back(e);
    }
  }
  r.finish();

  // Cross-references.
  std::set<std::string> ids;
  for (std::size_t i = 0; i < c.pools.size(); ++i) {
    if (!ids.insert(c.pools[i].id).second) throw ValidationError(join_path(join_path("/pools", i), "id"), "duplicate pool id");
  }
  if (std::count_if(c.pools.begin(), c.pools.end(), [](const PoolConfig& p) { return p.role == PoolRole::Global; }) != 1) {
    throw ValidationError("/pools", "exactly one pool must have role 'global'");
  }
  const std::string global_id = c.pools[c.global_pool()].id;
  ids.clear();
  for (std::size_t i = 0; i < c.schedds.size(); ++i) {
    auto& s = c.schedds[i];
    if (!ids.insert(s.id).second) throw ValidationError(join_path(join_path("/schedds", i), "id"), "duplicate schedd id '" + s.id + "'");
    if (s.pools.empty()) s.pools.push_back(global_id);
    for (std::size_t k = 0; k < s.pools.size(); ++k) {
      if (!c.pool_index(s.pools[k])) {
        throw ValidationError(join_path(join_path(join_path("/schedds", i), "pools"), k), "unknown pool '" + s.pools[k] + "'");
      }
    }
  }
  ids.clear();
  for (std::size_t i = 0; i < c.providers.size(); ++i) {
    auto& p = c.providers[i];
    const std::string path = join_path("/providers", i);
    if (!ids.insert(p.id).second) throw ValidationError(join_path(path, "id"), "duplicate provider id");
    if (p.pool.empty()) p.pool = global_id;
    const auto pi = c.pool_index(p.pool);
    if (!pi) throw ValidationError(join_path(path, "pool"), "unknown pool '" + p.pool + "'");
    if (p.kind == ProviderKind::HpcFacility) {
      const bool sub = c.pools[*pi].role == PoolRole::Subpool;
      if (p.integration == Integration::SiteExtension && sub) {
        throw ValidationError(join_path(path, "pool"), "site_extension slots join the global pool");
      }
      if (p.integration == Integration::FederatedSubpool && !sub) {
        throw ValidationError(join_path(path, "pool"), "federated_subpool providers must feed a subpool");
      }
    }
  }
  ids.clear();
  for (std::size_t i = 0; i < c.workloads.size(); ++i) {
    auto& w = c.workloads[i];
    const std::string path = join_path("/workloads", i);
    if (!ids.insert(w.id).second) throw ValidationError(join_path(path, "id"), "duplicate workload id");
    if (w.target_schedds.empty()) {
      for (const auto& s : c.schedds) w.target_schedds.push_back(s.id);
    }
    for (std::size_t k = 0; k < w.target_schedds.size(); ++k) {
      if (!c.schedd_index(w.target_schedds[k])) {
        throw ValidationError(join_path(join_path(path, "target_schedds"), k), "unknown schedd '" + w.target_schedds[k] + "'");
      }
    }
  }
  for (std::size_t i = 0; i < c.federation.size(); ++i) {
    const auto& f = c.federation[i];
    const std::string path = join_path("/federation", i);
    const auto from = c.pool_index(f.from);
    const auto to = c.pool_index(f.to);
    if (!from) throw ValidationError(join_path(path, "from"), "unknown pool '" + f.from + "'");
    if (!to) throw ValidationError(join_path(path, "to"), "unknown pool '" + f.to + "'");
    if (c.pools[*to].role != PoolRole::Subpool) throw ValidationError(join_path(path, "to"), "flocking target must be a subpool");
    if (*from == *to) throw ValidationError(join_path(path, "to"), "a pool cannot flock to itself");
  }
  return c;
}

inline ScenarioConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".") {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  return parse_config(doc, base_dir);
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ScenarioConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_text_file(path), path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

/// Fully resolved document: every default spelled out, calibration and
/// burst sources replaced by their concrete values.
inline json to_json(const ScenarioConfig& c) {
  using detail::distribution_to_json;
  json j;
  j["name"] = c.name;
  if (!c.description.empty()) j["description"] = c.description;
  j["horizon_ms"] = c.horizon.millis;
  j["seed"] = c.seed;
  j["check_invariants"] = c.check_invariants;
  j["schedds"] = json::array();
  for (const auto& s : c.schedds) {
    json o{{"id", s.id}, {"memory_capacity_mb", s.memory_capacity_mb}, {"ram_per_running_job_mb", s.ram_per_running_job_mb}};
    if (s.idle_queue_cap) o["idle_queue_cap"] = *s.idle_queue_cap;
    o["pools"] = s.pools;
    j["schedds"].push_back(o);
  }
  j["pools"] = json::array();
  for (const auto& p : c.pools) {
    json o;
    o["id"] = p.id;
    o["role"] = p.role == PoolRole::Global ? "global" : "subpool";
    o["heartbeat_interval_ms"] = p.heartbeat_interval.millis;
    o["collector"] = {{"update_cost_ms", p.collector.update_cost_ms},
                      {"query_high_cost_ms", p.collector.query_high_cost_ms},
                      {"query_low_cost_ms", p.collector.query_low_cost_ms}};
    o["negotiator"] = {{"count", p.negotiator.count},
                       {"match_cost_ms", p.negotiator.match_cost_ms},
                       {"cycle_delay_ms", p.negotiator.cycle_delay.millis}};
    o["ccb"] = {{"max_connections", p.ccb.max_connections ? json(*p.ccb.max_connections) : json(nullptr)},
                {"retry_backoff_ms", p.ccb.retry_backoff.millis},
                {"shared_host_cost_ms", p.ccb.shared_host_cost_ms}};
    o["monitoring"] = {{"query_interval_ms", p.monitoring.query_interval.millis},
                       {"queries_per_interval", p.monitoring.queries_per_interval}};
    o["features"] = detail::features_to_json(p.features);
    j["pools"].push_back(o);
  }
  j["providers"] = json::array();
  for (const auto& p : c.providers) {
    json o;
    o["id"] = p.id;
    o["kind"] = p.kind == ProviderKind::GridSite ? "grid" : "hpc";
    o["pool"] = p.pool;
    if (p.kind == ProviderKind::GridSite) {
      o["pledged_cores"] = p.pledged_cores;
    } else {
      o["integration"] = p.integration == Integration::SiteExtension ? "site_extension" : "federated_subpool";
      o["bursts"] = json::array();
      for (const auto& w : p.bursts) {
        o["bursts"].push_back({{"start_ms", w.start.millis}, {"duration_ms", w.duration.millis}, {"cores", w.cores}});
      }
    }
    o["glidein"] = {{"startds", p.glidein.startds},
                    {"slots_per_startd", p.glidein.slots_per_startd},
                    {"slot_cores", p.glidein.slot_cores},
                    {"slot_memory_mb", p.glidein.slot_memory_mb},
                    {"lifetime_ms", p.glidein.lifetime.millis}};
    o["submission_rate_per_min"] = p.submission_rate_per_min;
    o["grace_ms"] = p.grace.millis;
    o["provision_interval_ms"] = p.provision_interval.millis;
    if (p.start_delay_ms) o["start_delay_ms"] = distribution_to_json(*p.start_delay_ms);
    j["providers"].push_back(o);
  }
  j["workloads"] = json::array();
  for (const auto& w : c.workloads) {
    json o;
    o["id"] = w.id;
    o["label"] = w.label == StreamLabel::Production ? "production" : w.label == StreamLabel::Analysis ? "analysis" : "tier0";
    o["target_schedds"] = w.target_schedds;
    json a;
    if (w.mode == ArrivalMode::Backlog) {
      a = {{"mode", "backlog"}, {"idle_per_schedd", w.backlog_per_schedd}};
    } else {
      a = {{"mode", "rate"}, {"rate_per_s", w.rate_per_s}, {"process", w.process == RateProcess::Constant ? "constant" : "poisson"}};
    }
    a["start_ms"] = w.start.millis;
    if (w.stop) a["stop_ms"] = w.stop->millis;
    o["arrival"] = a;
    o["cores"] = distribution_to_json(w.cores);
    o["memory_mb"] = distribution_to_json(w.memory_mb);
    o["duration_ms"] = distribution_to_json(w.duration_ms);
    j["workloads"].push_back(o);
  }
  j["federation"] = json::array();
  for (const auto& f : c.federation) {
    j["federation"].push_back({{"from", f.from}, {"to", f.to}, {"threshold_ms", f.threshold.millis}});
  }
  j["metrics"] = {{"interval_ms", c.metrics.interval.millis},
                  {"duty_window_ms", c.metrics.effective_duty_window().millis},
                  {"plateau_window", c.metrics.plateau_window},
                  {"plateau_tolerance", c.metrics.plateau_tolerance}};
  j["expectations"] = json::array();
  for (const auto& e : c.expectations) {
    json o{{"series", e.series}, {"stat", e.stat}};
    if (e.min) o["min"] = *e.min;
    if (e.max) o["max"] = *e.max;
    if (e.window) o["window"] = *e.window;
    if (e.tolerance) o["tolerance"] = *e.tolerance;
    j["expectations"].push_back(o);
  }
  return j;
}

}  // namespace simpool
