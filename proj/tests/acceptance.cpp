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

// End-to-end acceptance checks. Prints one PASS or FAIL line per criterion
// (with indented detail lines) and exits 0 once every check has run.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "support.hpp"

namespace {

using namespace simpool;
using ::simpool::testing::kHour;
using ::simpool::testing::read_file;

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    notes.push_back(std::string(ok ? "ok    " : "FAIL  ") + what);
  }
};

std::string fmt(const char* f, double a) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

template <typename... T>
std::string cat(const T&... parts) {
  std::ostringstream os;
  (os << ... << parts);
  return os.str();
}

struct Timed {
  std::unique_ptr<Simulation> sim;
  double seconds = 0;
};

Timed run_timed(ScenarioConfig cfg) {
  Timed t;
  const auto start = Clock::now();
  t.sim = std::make_unique<Simulation>(std::move(cfg));
  t.sim->run();
  t.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return t;
}

std::optional<Plateau> plateau(const Simulation& sim, const std::string& col, std::size_t window, double tol) {
  return detect_plateau(::simpool::testing::series_of(sim, col), window, tol);
}

double mean_of(const Series& s) {
  double sum = 0;
  for (const auto& [_, v] : s) sum += v;
  return s.empty() ? 0.0 : sum / static_cast<double>(s.size());
}

ScenarioConfig library(const std::string& name) {
  auto e = find_scenario(name);
  if (!e) throw ConfigError("missing library scenario " + name);
  return e->config();
}

// ---- 1 --------------------------------------------------------------------------------

Outcome schedd_bottleneck() {
  Outcome o;
  const ScenarioConfig full = library("schedd-bottleneck");
  // Oracle: ten schedds, each capped at floor(memory / per-job RAM).
  std::int64_t cap = 0;
  for (const auto& s : full.schedds) cap += schedd_capacity(s.memory_capacity_mb, s.ram_per_running_job_mb);
  const Timed t = run_timed(full);
  const auto p = plateau(*t.sim, "running_total", 30, 1e-9);
  o.check(cap == 500'000, cat("cap oracle 10 x floor(50000/1) = ", cap));
  o.check(p && p->value == static_cast<double>(cap),
          cat("full-scale plateau = ", p ? fmt("%.0f", p->value) : std::string("none"), ", expected ", cap));
  o.check(t.seconds <= 300.0, fmt("full-scale wall time %.1f s for 12 simulated hours (limit 300 s)", t.seconds));

  const Timed small = run_timed(library("schedd-bottleneck-1to100"));
  const auto ps = plateau(*small.sim, "running_total", 30, 1e-9);
  o.check(ps && ps->value == 5000.0, cat("1:100 plateau = ", ps ? fmt("%.0f", ps->value) : std::string("none"),
                                         ", expected 5000"));
  o.check(small.seconds <= 5.0, fmt("1:100 wall time %.2f s (limit 5 s)", small.seconds));
  return o;
}

// ---- 2 --------------------------------------------------------------------------------

Outcome schedd_fleet() {
  Outcome o;
  const std::int64_t doubled = 20 * schedd_capacity(50'000, 1);
  o.check(doubled == 1'000'000, cat("cap arithmetic 20 x 50000 = ", doubled));

  // Twenty schedds: the schedd cap (1M) no longer binds, the 600k slot
  // supply does.
  auto entry = *find_scenario("schedd-bottleneck");
  json doc = entry.document;
  doc["schedds"][0]["count"] = 20;
  doc["expectations"] = json::array();
  const ScenarioConfig cfg = parse_config(doc);
  // Supply comes in whole glideins.
  std::int64_t supply = 0;
  for (const auto& p : cfg.providers) supply += p.pledged_cores / p.glidein.total_cores() * p.glidein.total_cores();
  const double expected = static_cast<double>(std::min(doubled, supply));
  const Timed t = run_timed(cfg);
  const auto p = plateau(*t.sim, "running_total", 30, 1e-9);
  o.check(p && p->value > 500'000.0 && p->value == expected,
          cat("20-schedd plateau = ", p ? fmt("%.0f", p->value) : std::string("none"), ", expected ",
              fmt("%.0f", expected), " (off 500000)"));
  return o;
}

// ---- 3 --------------------------------------------------------------------------------

Outcome ccb() {
  Outcome o;
  const Timed capped = run_timed(library("ccb-bottleneck"));
  const auto run = plateau(*capped.sim, "running_total", 30, 1e-9);
  const auto reg = plateau(*capped.sim, "ccb_reg", 30, 1e-9);
  o.check(run && run->value == 6000.0, cat("cap 6000: running plateau = ", run ? fmt("%.0f", run->value) : "none"));
  o.check(reg && reg->value == 6000.0, cat("cap 6000: registered plateau = ", reg ? fmt("%.0f", reg->value) : "none"));

  const ScenarioConfig raised = library("ccb-bottleneck-raised");
  // Next constraint: total schedd capacity versus slot supply.
  std::int64_t schedd_cap = 0;
  for (const auto& s : raised.schedds) schedd_cap += schedd_capacity(s.memory_capacity_mb, s.ram_per_running_job_mb);
  std::int64_t supply = 0;
  for (const auto& p : raised.providers) supply += p.pledged_cores / p.glidein.total_cores() * p.glidein.total_cores();
  const double next = static_cast<double>(std::min({schedd_cap, supply, *raised.pools[0].ccb.max_connections}));
  const Timed r = run_timed(raised);
  const auto rp = plateau(*r.sim, "running_total", 30, 1e-9);
  o.check(rp && rp->value == next, cat("cap 20000: running plateau = ", rp ? fmt("%.0f", rp->value) : "none",
                                       ", next constraint ", fmt("%.0f", next)));
  return o;
}

// ---- 4 --------------------------------------------------------------------------------

std::optional<SimTime> first_frame(const Simulation& sim, const std::function<bool(const MetricsFrame&)>& pred) {
  for (const auto& f : sim.frames()) {
    if (pred(f)) return f.at;
  }
  return std::nullopt;
}

std::string at_or_none(const std::optional<SimTime>& t) {
  return t ? fmt("%.0f min", static_cast<double>(t->millis) / 60'000.0) : std::string("never");
}

Outcome collector_saturation() {
  Outcome o;
  const double c_expected = calibrate_collector(8'000, hours(6), minutes(5), true);
  std::vector<double> duty_means;
  std::unique_ptr<Simulation> last;
  double slowest = 0;
  for (std::int64_t offered : {2'000, 4'000, 8'000, 16'000}) {
    json doc = library_detail::collector_saturation(8'000, offered, 10);
    doc["expectations"] = json::array();
    const ScenarioConfig cfg = parse_config(doc);
    if (std::abs(cfg.pools[0].collector.update_cost_ms - c_expected) > 1e-12) {
      o.check(false, "collector cost differs from calibrate_collector(8000, 6 h, 5 min, on)");
    }
    Timed t = run_timed(cfg);
    slowest = std::max(slowest, t.seconds);
    duty_means.push_back(mean_of(::simpool::testing::series_of(*t.sim, "duty_top")));
    o.notes.push_back(cat("      offered ", offered, ": mean duty ", fmt("%.4f", duty_means.back()), ", wall ",
                          fmt("%.1f s", t.seconds)));
    last = std::move(t.sim);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < duty_means.size(); ++i) monotone = monotone && duty_means[i] >= duty_means[i - 1];
  o.check(monotone && duty_means.back() >= 0.95,
          cat("(a) duty non-decreasing in offered slots, reaching ", fmt("%.4f", duty_means.back()), " (>= 0.95)"));

  const auto p = plateau(*last, "running_total", 60, 0.05);
  o.check(p && std::abs(p->value - 8000.0) <= 800.0,
          cat("(b) running plateau at 16k offered = ", p ? fmt("%.0f", p->value) : std::string("none"),
              ", expected 8000 +/- 10%"));

  const auto t_duty = first_frame(*last, [](const MetricsFrame& f) { return f.duty_top >= 0.95; });
  const auto t_drop = first_frame(*last, [](const MetricsFrame& f) { return f.udp_drops > 0; });
  const auto t_stale = first_frame(*last, [](const MetricsFrame& f) { return f.stale_fail > 0; });
  const bool ordered = t_duty && t_drop && t_stale && p && *t_duty <= *t_drop && *t_drop <= *t_stale &&
                       *t_stale <= p->start;
  o.check(ordered, cat("(c) duty>=0.95 at ", at_or_none(t_duty), ", first drops at ", at_or_none(t_drop),
                       ", first stale claims at ", at_or_none(t_stale), ", plateau from ",
                       at_or_none(p ? std::optional<SimTime>(p->start) : std::nullopt)));
  o.check(slowest <= 120.0, fmt("slowest sweep point %.1f s (limit 120 s)", slowest));
  return o;
}

// ---- 5 --------------------------------------------------------------------------------

ScenarioConfig ablation(const std::string& variant) { return find_scenario("optimizations-ablation")->variant(variant); }

double frames_mean(const Simulation& sim, const std::string& col) {
  return mean_of(::simpool::testing::series_of(sim, col));
}

Outcome ablation_suite() {
  Outcome o;
  const Timed base = run_timed(ablation("baseline"));
  const Timed filt = run_timed(ablation("update_filtering"));
  const Timed sec = run_timed(ablation("secondary_collectors"));
  const Timed prio = run_timed(ablation("priority_query_routing"));
  const ScenarioConfig base_cfg = ablation("baseline");
  const double c_ms = base_cfg.pools[0].collector.update_cost_ms;

  // (d) Updates attributable to completed jobs: running jobs have only sent
  // their claim update so far.
  const auto per_job = [](const SimCounters& c) {
    const double attributable = static_cast<double>(c.transition_updates) - static_cast<double>(c.started - c.completed);
    return attributable / static_cast<double>(c.completed);
  };
  const SimCounters& cb = base.sim->counters();
  const SimCounters& cf = filt.sim->counters();
  o.check(per_job(cb) == 2.0 && static_cast<double>(cf.transition_updates) / static_cast<double>(cf.completed) == 1.0,
          cat("(d) updates per completed job: ", fmt("%.6f", per_job(cb)), " off, ",
              fmt("%.6f", static_cast<double>(cf.transition_updates) / static_cast<double>(cf.completed)), " on"));
  // Rate model: each suppressed transition saves one update's service time.
  const double window_ms = static_cast<double>(base_cfg.metrics.effective_duty_window().millis) *
                           static_cast<double>(base.sim->frames().size());
  const double predicted =
      (static_cast<double>(cb.transition_updates) - static_cast<double>(cf.transition_updates)) * c_ms / window_ms;
  const double measured = frames_mean(*base.sim, "duty_top") - frames_mean(*filt.sim, "duty_top");
  o.check(predicted > 0 && std::abs(measured - predicted) <= 0.05 * predicted,
          cat("(d) duty reduction ", fmt("%.5f", measured), " vs rate-model ", fmt("%.5f", predicted)));

  // (c)
  const double d_base = frames_mean(*base.sim, "duty_top");
  const double d_sec = frames_mean(*sec.sim, "duty_top");
  o.check(d_sec <= 0.5 * d_base, cat("(c) top duty ", fmt("%.4f", d_base), " -> ", fmt("%.4f", d_sec),
                                     " with 4 secondaries, batch 10 (reduction ",
                                     fmt("%.1f%%", 100.0 * (1.0 - d_sec / d_base)), ")"));

  // (b) Oracle plus the in-simulation cycle.
  const SimTime one = match_duration(10'000, Micros{1000}, 1);
  const SimTime four = match_duration(10'000, Micros{1000}, 4);
  o.check(one.millis == 10'000 && four.millis == 2'500 && one.millis == 4 * four.millis,
          cat("(b) 10000 candidates: ", one.millis, " ms with 1 thread, ", four.millis, " ms with 4"));
  {
    const ScenarioConfig mt = ablation("multi_thread_negotiator");
    Simulation sim(mt);
    // First cycle that actually scanned jobs.
    for (std::int64_t m = 1; m <= 60; ++m) {
      sim.run_until(minutes(m));
      const auto& l = sim.pool(0).negotiators[0].last;
      if (l && l->candidates_scanned > 0) break;
    }
    const auto& r = sim.pool(0).negotiators[0].last;
    const Micros cost = micros_from_ms(mt.pools[0].negotiator.match_cost_ms);
    o.check(r && r->candidates_scanned > 0 && r->match_time == match_duration(r->candidates_scanned, cost, 4),
            cat("(b) in-simulation match phase ", r ? r->match_time.millis : -1, " ms for ",
                r ? r->candidates_scanned : 0, " candidates on 4 threads"));
  }

  // (f)
  const auto low_top = prio.sim->pool(0).top.busy_total_us(WorkClass::QueryLow);
  const auto low_base = base.sim->pool(0).top.busy_total_us(WorkClass::QueryLow);
  o.check(low_top == 0 && low_base > 0,
          cat("(f) top Low-query service time ", low_base, " us -> ", low_top, " us with routing"));

  // (e) Deterministic arrivals at twice the service rate over ten minutes.
  const auto drop_fraction = [](std::size_t buffer, std::uint64_t& n) {
    Collector::Params p;
    p.update_cost = Micros{10'000};
    p.udp_buffer_capacity = buffer;
    Collector c(p);
    n = 0;
    for (std::int64_t us = 0; us < 600'000'000; us += 5'000, ++n) {
      c.ingest({SlotId{static_cast<std::uint32_t>(n % 1000)}, SlotState::Unclaimed, ceil_to_ms(us), Transport::Udp,
                false},
               ceil_to_ms(us));
    }
    return static_cast<double>(c.drops()) / static_cast<double>(n);
  };
  // Queueing oracle: of N arrivals over T, at most T/c + B are accepted.
  const auto oracle = [](double n, double buffer) { return std::max(0.0, 1.0 - (600'000.0 / 10.0 + buffer) / n); };
  std::uint64_t n10 = 0, nbig = 0;
  const double f10 = drop_fraction(10, n10);
  const double fbig = drop_fraction(1'000'000, nbig);
  o.check(std::abs(f10 - 0.5) <= 0.05 && std::abs(f10 - oracle(double(n10), 10)) <= 1e-3 &&
              std::abs(fbig - oracle(double(nbig), 1e6)) <= 1e-3 && fbig < f10,
          cat("(e) drop fraction ", fmt("%.4f", f10), " at buffer 10 (oracle ", fmt("%.4f", oracle(double(n10), 10)),
              "), ", fmt("%.4f", fbig), " at buffer 1e6 (oracle ", fmt("%.4f", oracle(double(nbig), 1e6)), ")"));
  return o;
}

// ---- 6 --------------------------------------------------------------------------------

Outcome bursts() {
  Outcome o;
  const ScenarioConfig cfg = library("nersc-burst");
  const Timed t = run_timed(cfg);
  const Simulation& sim = *t.sim;
  std::int64_t baseline = 0, burst_peak = 0;
  std::size_t hpc = 0;
  for (std::size_t i = 0; i < cfg.providers.size(); ++i) {
    const auto& p = cfg.providers[i];
    if (p.kind == ProviderKind::GridSite) baseline += p.pledged_cores;
    if (p.kind == ProviderKind::HpcFacility) {
      hpc = i;
      for (const auto& w : p.bursts) burst_peak = std::max(burst_peak, w.cores);
    }
  }
  const auto total = summarize_series(::simpool::testing::series_of(sim, "cores_total"), 2, 0.01);
  const auto nersc = summarize_series(::simpool::testing::series_of(sim, "cores_" + cfg.providers[hpc].id), 2, 0.01);
  const double want = static_cast<double>(baseline + burst_peak);
  o.check(std::abs(total.peak - want) <= 0.02 * want,
          cat("cores_total peak ", fmt("%.0f", total.peak), " vs baseline+burst ", fmt("%.0f", want)));
  o.check(std::abs(nersc.peak - double(burst_peak)) <= 0.02 * double(burst_peak),
          cat("HPC peak ", fmt("%.0f", nersc.peak), " vs burst ", burst_peak));
  const double duty = schedule_duty_fraction(cfg.providers[hpc].bursts, cfg.horizon);
  o.check(nersc.mean <= duty * double(burst_peak), cat("HPC time-average ", fmt("%.1f", nersc.mean), " <= duty ",
                                                       fmt("%.4f", duty), " x peak = ",
                                                       fmt("%.1f", duty * double(burst_peak))));
  bool sums = true;
  for (const auto& f : sim.frames()) {
    std::int64_t s = 0;
    for (auto c : f.cores_by_provider) s += c;
    sums = sums && s == f.cores_total;
  }
  o.check(sums, cat("per-provider cores sum to the total in all ", sim.frames().size(), " frames"));
  return o;
}

// ---- 7 --------------------------------------------------------------------------------

Outcome determinism(const fs::path& out) {
  Outcome o;
  for (const char* name : {"nersc-burst", "collector-saturation-1to100"}) {
    const fs::path a = out / "determinism" / name / "a";
    const fs::path b = out / "determinism" / name / "b";
    const fs::path c = out / "determinism" / name / "c";
    run_scenario(library(name), a);
    const ScenarioConfig resolved = load_config(a / "resolved-config.json");
    run_scenario(resolved, b);
    run_scenario(load_config(a / "resolved-config.json"), c);
    bool same = true;
    for (const char* f : {"metrics.csv", "summary.json", "resolved-config.json"}) {
      same = same && read_file(b / f) == read_file(c / f) && read_file(a / f) == read_file(b / f);
    }
    o.check(same && !read_file(b / "metrics.csv").empty(),
            cat(name, ": byte-identical metrics.csv and summary.json across reruns of resolved-config.json"));
  }
  return o;
}

// ---- 8 --------------------------------------------------------------------------------

Outcome conservation() {
  Outcome o;
  const auto start = Clock::now();
  std::size_t runs = 0;
  for (const auto& e : scenario_library()) {
    if (e.name == "collector-saturation") {
      o.notes.push_back("      skipped collector-saturation (full scale)");
      continue;
    }
    std::vector<std::pair<std::string, ScenarioConfig>> cfgs;
    if (e.variants.empty()) cfgs.emplace_back(e.name, e.config());
    for (const auto& [id, _] : e.variants) cfgs.emplace_back(e.name + "/" + id, e.variant(id));
    for (auto& [label, cfg] : cfgs) {
      cfg.check_invariants = true;
      Simulation sim(cfg);
      sim.run();
      ++runs;
      o.check(sim.violations().empty(),
              cat(label, ": ", sim.violations().size(), " violations over ", sim.frames().size(), " frames",
                  sim.violations().empty() ? std::string() : " (first: " + sim.violations().front() + ")"));
    }
  }
  std::size_t bad_seeds = 0;
  const std::uint64_t seeds = 120;
  for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
    Simulation sim(parse_config(::simpool::testing::random_doc(1000 + seed)));
    sim.run();
    ++runs;
    if (!sim.violations().empty()) ++bad_seeds;
  }
  o.check(bad_seeds == 0, cat(seeds, " randomized configurations, ", bad_seeds, " with violations"));
  const double wall = std::chrono::duration<double>(Clock::now() - start).count();
  o.check(wall <= 300.0, fmt("suite wall time %.1f s (limit 300 s)", wall) + cat(" over ", runs, " runs"));
  return o;
}

void report(int n, const std::string& title, const std::function<Outcome()>& f) {
  Outcome o;
  try {
    o = f();
  } catch (const std::exception& e) {
    o.pass = false;
    o.notes.push_back(std::string("FAIL  error: ") + e.what());
  }
  std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << ": " << title << '\n';
  for (const auto& line : o.notes) std::cout << "      " << line << '\n';
  std::cout.flush();
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "simpool-acceptance";
  fs::remove_all(out);
  fs::create_directories(out);
  report(1, "schedd-memory bottleneck", schedd_bottleneck);
  report(2, "schedd fleet enlargement", schedd_fleet);
  report(3, "CCB bottleneck", ccb);
  report(4, "collector saturation endpoint", collector_saturation);
  report(5, "optimization ablation", ablation_suite);
  report(6, "burst provisioning", bursts);
  report(7, "determinism", [&] { return determinism(out); });
  report(8, "conservation suite", conservation);
  return 0;
}
