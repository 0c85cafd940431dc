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
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "simpool/central_manager.hpp"
#include "simpool/config.hpp"
#include "simpool/kernel.hpp"
#include "simpool/metrics.hpp"
#include "simpool/pool_model.hpp"
#include "simpool/provisioning.hpp"
#include "simpool/random.hpp"
#include "simpool/workload.hpp"

namespace simpool {

enum class EventKind : std::uint8_t {
  JobComplete,
  NegoStart,
  NegoMatch,
  NegoClaim,
  Heartbeat,
  CcbRetry,
  GlideinExpire,
  GraceExpire,
  ProvisionTick,
  BurstStart,
  BurstEnd,
  GlideinStart,
  ArrivalTick,
  BacklogStart,
  MonitoringQuery,
  Sample,
};

struct SimCounters {
  std::uint64_t submitted = 0;
  std::uint64_t submit_rejected = 0;  // idle-queue cap
  std::uint64_t started = 0;
  std::uint64_t completed = 0;
  std::uint64_t evicted = 0;
  std::uint64_t flocked = 0;
  std::uint64_t transition_updates = 0;
  std::uint64_t heartbeat_updates = 0;
  std::uint64_t initial_updates = 0;
  std::uint64_t invalidations = 0;
  std::uint64_t claims_ok = 0;
  std::uint64_t claims_stale = 0;
  std::uint64_t claims_other = 0;
  std::uint64_t ccb_attempts = 0;
  std::uint64_t ccb_rejections = 0;
  std::uint64_t nego_cycles = 0;
  std::uint64_t glideins_spawned = 0;
};

/// Runtime state of one pool's central manager.
struct PoolRuntime {
  struct Secondary {
    Collector collector;
    std::vector<UpdateMessage> batch;
  };
  struct Negotiator {
    SimTime cycle_start;
    MatchReport report;
    std::vector<std::uint32_t> match_epochs;
    std::optional<MatchReport> last;
  };
  struct Digest {
    std::int64_t at_us;
    std::size_t secondary;
    std::vector<UpdateMessage> msgs;
  };

  PoolId id;
  const PoolConfig* cfg = nullptr;
  Collector top;
  std::vector<Secondary> secondaries;
  std::vector<Digest> outbox;
  Ccb ccb;
  CandidatePool candidates;
  NegotiatorParams nego;
  std::vector<Negotiator> negotiators;
  std::size_t low_query_rr = 0;
  // Jobs flocked in from other pools, per schedd.
  std::vector<std::deque<Schedd::QueueEntry>> flock_queues;
  std::int64_t idle_jobs = 0;
  std::optional<SimTime> last_cycle;
  std::vector<std::size_t> inbound_links;  // federation entries targeting this pool
};

struct ProviderRuntime {
  const ProviderConfig* cfg = nullptr;
  ProviderId id;
  PoolId pool;
  std::int64_t provisioned_cores = 0;  // live slots of non-retiring glideins
  std::int64_t pending_cores = 0;      // glideins waiting out their start delay
  std::int64_t cores_in_use = 0;
  int active_window = -1;
  std::vector<GlideinId> glideins;
  std::vector<std::vector<GlideinId>> window_glideins;
  RandomStream delay_rng;
  bool ticking = false;
};

/// The whole simulated infrastructure for one scenario run.
class Simulation {
 public:
  explicit Simulation(ScenarioConfig cfg)
      : cfg_(std::move(cfg)), phase_rng_(cfg_.seed, "startd/heartbeat-phase") {
    build();
  }

  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  void run() { run_until(cfg_.horizon); }

  void run_until(SimTime t) {
    kernel_.run_until(std::min(t, cfg_.horizon), [this](const Kernel<EventKind>::Record& ev) { dispatch(ev); });
  }

  const ScenarioConfig& config() const noexcept { return cfg_; }
  SimTime now() const noexcept { return kernel_.now(); }
  const std::vector<MetricsFrame>& frames() const noexcept { return frames_; }
  const SeriesLayout& layout() const noexcept { return layout_; }
  const SimCounters& counters() const noexcept { return counters_; }
  const PoolModel& model() const noexcept { return model_; }
  const PoolRuntime& pool(std::size_t i) const { return *pools_.at(i); }
  std::size_t pool_count() const noexcept { return pools_.size(); }
  const ProviderRuntime& provider(std::size_t i) const { return providers_.at(i); }
  std::uint64_t trace_digest() const noexcept { return kernel_.trace_digest(); }
  std::uint64_t events_processed() const noexcept { return kernel_.processed_total(); }
  // Violations found by per-frame invariant checks (when enabled).
  const std::vector<std::string>& violations() const noexcept { return violations_; }

  /// Checks the conservation and cap invariants against the current state.
  std::vector<std::string> check_invariants() const {
    std::vector<std::string> v;
    const std::string at = " at t=" + std::to_string(now().millis) + "ms";
    std::uint64_t idle = 0, running = 0, completed = 0;
    for (const Job& j : model_.jobs) {
      if (j.state == JobState::Idle) ++idle;
      else if (j.state == JobState::Running) ++running;
      else ++completed;
      if (j.state == JobState::Running) {
        const Slot& s = model_.slots[j.slot->value];
        if (!s.job || *s.job != j.id) v.push_back("running job " + std::to_string(j.id.value) + " not bound to its slot" + at);
      }
      if (j.state == JobState::Completed && j.completed_at != j.started_at + j.duration) {
        v.push_back("job " + std::to_string(j.id.value) + " completion time mismatch" + at);
      }
    }
    if (idle + running + completed != model_.jobs.size() || model_.jobs.size() != counters_.submitted) {
      v.push_back("job conservation broken" + at);
    }
    std::uint64_t bound = 0;
    std::vector<std::int64_t> live_cores(providers_.size(), 0), busy_cores(providers_.size(), 0);
    for (const Slot& s : model_.slots) {
      if (s.state == SlotState::Busy || (s.state == SlotState::Retiring && s.job)) {
        if (!s.job) v.push_back("busy slot " + std::to_string(s.id.value) + " has no job" + at);
      }
      if (s.job) {
        ++bound;
        busy_cores[s.provider.value] += s.cores;
        if (model_.jobs[s.job->value].state != JobState::Running) {
          v.push_back("slot " + std::to_string(s.id.value) + " bound to a non-running job" + at);
        }
      }
      if (s.state == SlotState::Unclaimed && s.claimed_by) v.push_back("unclaimed slot has a claimant" + at);
      if (s.live()) live_cores[s.provider.value] += s.cores;
      if ((s.state == SlotState::Claimed || s.state == SlotState::Busy) && !model_.startds[s.startd.value].ccb_registered) {
        v.push_back("slot " + std::to_string(s.id.value) + " claimed through an unregistered startd" + at);
      }
    }
    if (bound != running) v.push_back("busy slot count differs from running jobs" + at);
    std::int64_t sched_running = 0;
    for (const Schedd& s : model_.schedds) {
      sched_running += static_cast<std::int64_t>(s.running_count);
      if (static_cast<std::int64_t>(s.running_count) > schedd_capacity(s)) {
        v.push_back("schedd " + s.name + " above its running-job capacity" + at);
      }
    }
    if (sched_running != static_cast<std::int64_t>(running)) v.push_back("schedd running counts disagree" + at);
    for (const auto& p : pools_) {
      if (p->ccb.max_connections() && p->ccb.registered_count() > *p->ccb.max_connections()) {
        v.push_back("CCB above its connection cap in pool " + p->cfg->id + at);
      }
    }
    for (std::size_t i = 0; i < providers_.size(); ++i) {
      const auto& pr = providers_[i];
      if (busy_cores[i] != pr.cores_in_use) v.push_back("cores-in-use counter drift for " + pr.cfg->id + at);
      if (pr.cores_in_use > live_cores[i]) v.push_back("cores in use exceed live cores for " + pr.cfg->id + at);
      if (pr.cfg->kind == ProviderKind::GridSite) {
        if (pr.provisioned_cores > pr.cfg->pledged_cores) v.push_back("grid provider " + pr.cfg->id + " above pledge" + at);
      } else {
        const std::int64_t cap = pr.active_window >= 0 ? pr.cfg->bursts[pr.active_window].cores : 0;
        if (pr.provisioned_cores > cap) v.push_back("HPC provider " + pr.cfg->id + " above its window" + at);
      }
    }
    return v;
  }

 private:
  using Record = Kernel<EventKind>::Record;

  static std::uint64_t pack(std::uint64_t hi, std::uint64_t lo) { return (hi << 32) | (lo & 0xffffffffULL); }
  static std::uint32_t hi32(std::uint64_t x) { return static_cast<std::uint32_t>(x >> 32); }
  static std::uint32_t lo32(std::uint64_t x) { return static_cast<std::uint32_t>(x); }

  void build() {
    const SimTime duty_window = cfg_.metrics.effective_duty_window();
    const SimTime history = std::max(hours(2), duty_window + duty_window);
    for (std::size_t i = 0; i < cfg_.pools.size(); ++i) {
      const PoolConfig& pc = cfg_.pools[i];
      auto rt = std::make_unique<PoolRuntime>();
      rt->id = PoolId{static_cast<std::uint32_t>(i)};
      rt->cfg = &pc;
      Collector::Params cp;
      cp.update_cost = micros_from_ms(pc.collector.update_cost_ms);
      cp.query_high_cost = micros_from_ms(pc.collector.query_high_cost_ms);
      cp.query_low_cost = micros_from_ms(pc.collector.query_low_cost_ms);
      cp.udp_buffer_capacity = static_cast<std::size_t>(pc.features.udp_buffer);
      cp.history = history;
      rt->top = Collector(cp);
      cp.role = CollectorRole::Secondary;
      for (int s = 0; s < pc.features.effective_secondaries(); ++s) rt->secondaries.push_back({Collector(cp), {}});
      std::optional<std::size_t> cap;
      if (pc.ccb.max_connections) cap = static_cast<std::size_t>(*pc.ccb.max_connections);
      rt->ccb = Ccb(cap, pc.features.separate_ccb_host);
      rt->nego.threads = pc.features.effective_threads();
      rt->nego.match_cost_per_candidate = micros_from_ms(pc.negotiator.match_cost_ms);
      rt->nego.cycle_delay = pc.negotiator.cycle_delay;
      rt->negotiators.resize(static_cast<std::size_t>(pc.negotiator.count));
      rt->flock_queues.resize(cfg_.schedds.size());
      pools_.push_back(std::move(rt));
    }
    for (std::size_t f = 0; f < cfg_.federation.size(); ++f) {
      pools_[*cfg_.pool_index(cfg_.federation[f].to)]->inbound_links.push_back(f);
    }
    for (auto& rt : pools_) {
      PoolRuntime* p = rt.get();
      p->top.set_view_listener([this, p](SlotId id, const ViewEntry&, const ViewEntry& after) {
        on_view_change(*p, id, after);
      });
      for (std::size_t s = 0; s < p->secondaries.size(); ++s) {
        p->secondaries[s].collector.set_processed_listener([this, p, s](const UpdateMessage& m, std::int64_t fin) {
          on_secondary_processed(*p, s, m, fin);
        });
      }
    }

    for (const ScheddConfig& sc : cfg_.schedds) {
      std::vector<PoolId> pools;
      for (const auto& pid : sc.pools) pools.push_back(PoolId{static_cast<std::uint32_t>(*cfg_.pool_index(pid))});
      const ScheddId id = model_.add_schedd(sc.id, sc.memory_capacity_mb, sc.ram_per_running_job_mb, pools);
      if (sc.idle_queue_cap) model_.schedd(id).idle_queue_cap = static_cast<std::size_t>(*sc.idle_queue_cap);
    }
    model_.on_slot_dead = [this](const Slot& s) { on_slot_dead(s); };

    for (std::size_t i = 0; i < cfg_.providers.size(); ++i) {
      const ProviderConfig& pc = cfg_.providers[i];
      ProviderRuntime pr{&pc, ProviderId{static_cast<std::uint32_t>(i)},
                         PoolId{static_cast<std::uint32_t>(*cfg_.pool_index(pc.pool))}, 0, 0, 0, -1, {}, {},
                         RandomStream(cfg_.seed, "provider/" + pc.id + "/start-delay")};
      pr.window_glideins.resize(pc.bursts.size());
      providers_.push_back(std::move(pr));
    }

    for (std::size_t w = 0; w < cfg_.workloads.size(); ++w) {
      const WorkloadConfig& wc = cfg_.workloads[w];
      WorkloadSpec spec;
      spec.id = wc.id;
      spec.label = wc.label;
      for (const auto& t : wc.target_schedds) spec.targets.push_back(ScheddId{static_cast<std::uint32_t>(*cfg_.schedd_index(t))});
      spec.mode = wc.mode;
      spec.backlog_per_schedd = wc.backlog_per_schedd;
      spec.rate_per_s = wc.rate_per_s;
      spec.process = wc.process;
      spec.start = wc.start;
      spec.stop = wc.stop;
      spec.cores = wc.cores;
      spec.memory_mb = wc.memory_mb;
      spec.duration_ms = wc.duration_ms;
      streams_.emplace_back(std::move(spec), cfg_.seed);
      stream_idle_.emplace_back(cfg_.schedds.size(), 0);
    }
    last_arrival_.resize(streams_.size());

    layout_.providers.clear();
    for (const auto& p : cfg_.providers) layout_.providers.push_back(p.id);
    const PoolRuntime& g = *pools_[cfg_.global_pool()];
    for (std::size_t s = 0; s < g.secondaries.size(); ++s) layout_.secondaries.push_back("secondary" + std::to_string(s + 1));
    for (const auto& s : cfg_.schedds) layout_.schedds.push_back(s.id);

    // Initial events. Order matters only for equal-time tie-breaks.
    for (std::size_t w = 0; w < streams_.size(); ++w) {
      const auto& spec = streams_[w].spec();
      if (spec.mode == ArrivalMode::Backlog) {
        schedule(spec.start, EventKind::BacklogStart, w);
      } else {
        schedule_next_arrival(w);
      }
    }
    for (std::size_t i = 0; i < providers_.size(); ++i) {
      const ProviderConfig& pc = *providers_[i].cfg;
      if (pc.kind == ProviderKind::GridSite) {
        schedule(SimTime{0}, EventKind::ProvisionTick, i);
      } else {
        for (std::size_t w = 0; w < pc.bursts.size(); ++w) {
          schedule(pc.bursts[w].start, EventKind::BurstStart, pack(i, w));
          schedule(pc.bursts[w].end(), EventKind::BurstEnd, pack(i, w));
        }
      }
    }
    for (std::size_t p = 0; p < pools_.size(); ++p) {
      for (std::size_t k = 0; k < pools_[p]->negotiators.size(); ++k) {
        schedule(SimTime{0}, EventKind::NegoStart, pack(p, k));
      }
      if (pools_[p]->cfg->monitoring.queries_per_interval > 0) {
        schedule(pools_[p]->cfg->monitoring.query_interval, EventKind::MonitoringQuery, p);
      }
    }
    schedule(cfg_.metrics.interval, EventKind::Sample, 0);
  }

  void schedule(SimTime at, EventKind k, std::uint64_t target) {
    if (at > cfg_.horizon) return;
    kernel_.schedule(at, k, target);
  }

  void dispatch(const Record& ev) {
    switch (ev.kind) {
      case EventKind::JobComplete: on_job_complete(ev.target); break;
      case EventKind::NegoStart: on_nego_start(hi32(ev.target), lo32(ev.target)); break;
      case EventKind::NegoMatch: on_nego_match(hi32(ev.target), lo32(ev.target)); break;
      case EventKind::NegoClaim: on_nego_claim(hi32(ev.target), lo32(ev.target)); break;
      case EventKind::Heartbeat: on_heartbeat(StartdId{lo32(ev.target)}); break;
      case EventKind::CcbRetry: on_ccb_retry(StartdId{lo32(ev.target)}); break;
      case EventKind::GlideinExpire: retire(GlideinId{lo32(ev.target)}); break;
      case EventKind::GraceExpire: evict_remaining(GlideinId{lo32(ev.target)}); break;
      case EventKind::ProvisionTick: on_provision_tick(ev.target); break;
      case EventKind::BurstStart: on_burst_start(hi32(ev.target), lo32(ev.target)); break;
      case EventKind::BurstEnd: on_burst_end(hi32(ev.target), lo32(ev.target)); break;
      case EventKind::GlideinStart: on_glidein_start(ev.target); break;
      case EventKind::ArrivalTick: on_arrival(ev.target); break;
      case EventKind::BacklogStart: replenish_stream(ev.target); break;
      case EventKind::MonitoringQuery: on_monitoring(ev.target); break;
      case EventKind::Sample: on_sample(); break;
    }
  }

  // ---- collectors -------------------------------------------------------

  /// Brings the top collector up to `at`, first feeding it every digest the
  /// secondaries finished by then. With `flush`, partial batches are sent too.
  void sync_pool(PoolRuntime& p, SimTime at, bool flush = false) {
    const std::int64_t at_us = to_micros(at);
    for (std::size_t s = 0; s < p.secondaries.size(); ++s) {
      auto& sec = p.secondaries[s];
      sec.collector.advance_us(at_us);
      if (flush && !sec.batch.empty()) {
        p.outbox.push_back({at_us, s, std::move(sec.batch)});
        sec.batch.clear();
      }
    }
    if (!p.outbox.empty()) {
      std::stable_sort(p.outbox.begin(), p.outbox.end(), [](const PoolRuntime::Digest& a, const PoolRuntime::Digest& b) {
        return a.at_us != b.at_us ? a.at_us < b.at_us : a.secondary < b.secondary;
      });
      const std::int64_t c = p.top.params().update_cost.value;
      const std::int64_t bf = p.cfg->features.batch_factor;
      for (auto& d : p.outbox) {
        const auto n = static_cast<std::int64_t>(d.msgs.size());
        p.top.ingest_digest(std::move(d.msgs), d.at_us, Micros{(n * c + bf - 1) / bf});
      }
      p.outbox.clear();
    }
    p.top.advance_us(at_us);
  }

  void on_secondary_processed(PoolRuntime& p, std::size_t s, const UpdateMessage& m, std::int64_t finish_us) {
    auto& sec = p.secondaries[s];
    sec.batch.push_back(m);
    if (static_cast<int>(sec.batch.size()) >= p.cfg->features.batch_factor) {
      p.outbox.push_back({finish_us, s, std::move(sec.batch)});
      sec.batch.clear();
    }
  }

  void send_update(PoolRuntime& p, UpdateMessage m, SimTime at) {
    if (!p.secondaries.empty()) {
      p.secondaries[m.slot.value % p.secondaries.size()].collector.ingest(m, at);
      return;
    }
    sync_pool(p, at);
    p.top.ingest(m, at);
  }

  Transport update_transport(const PoolRuntime& p) const {
    return p.cfg->features.udp_transport ? Transport::Udp : Transport::Tcp;
  }

  /// Advertises a state transition unless filtering suppresses it.
  void advertise(const Slot& s, SlotState from, SlotState to, SimTime at) {
    PoolRuntime& p = *pools_[s.pool.value];
    if (!filter_update(from, to, p.cfg->features.update_filtering)) return;
    ++counters_.transition_updates;
    send_update(p, {s.id, s.state, at, update_transport(p), false}, at);
  }

  // ---- candidates -------------------------------------------------------

  static CandidatePool::Shape shape_of(const Slot& s) { return {s.cores, s.memory_mb}; }

  void set_candidate(PoolRuntime& p, const Slot& s, bool want) {
    if (in_candidates_.size() <= s.id.value) in_candidates_.resize(model_.slots.size(), 0);
    auto& have = in_candidates_[s.id.value];
    if (want && !have) {
      p.candidates.insert(s.id, shape_of(s));
      have = 1;
    } else if (!want && have) {
      p.candidates.erase(s.id, shape_of(s));
      have = 0;
    }
  }

  bool viewed_candidate(const PoolRuntime& p, const Slot& s) const {
    const ViewEntry* e = p.top.view(s.id);
    return e && e->state == SlotState::Unclaimed && model_.startds[s.startd.value].ccb_registered;
  }

  void on_view_change(PoolRuntime& p, SlotId id, const ViewEntry& after) {
    const Slot& s = model_.slots[id.value];
    set_candidate(p, s, after.present && after.state == SlotState::Unclaimed &&
                            model_.startds[s.startd.value].ccb_registered);
  }

  // ---- CCB --------------------------------------------------------------

  void register_startd(StartdId sid, SimTime at) {
    Startd& d = model_.startd(sid);
    if (!d.alive || d.ccb_registered) return;
    PoolRuntime& p = *pools_[d.pool.value];
    ++counters_.ccb_attempts;
    if (!p.ccb.on_dedicated_host()) {
      sync_pool(p, at);
      p.top.submit_work(WorkClass::CcbRegistration, micros_from_ms(p.cfg->ccb.shared_host_cost_ms), at);
    }
    if (p.ccb.register_startd(sid) == CcbOutcome::Registered) {
      d.ccb_registered = true;
      for (SlotId s : d.slots) {
        const Slot& sl = model_.slot(s);
        if (sl.live()) set_candidate(p, sl, viewed_candidate(p, sl));
      }
    } else {
      ++counters_.ccb_rejections;
      schedule(at + p.cfg->ccb.retry_backoff, EventKind::CcbRetry, sid.value);
    }
  }

  void on_ccb_retry(StartdId sid) { register_startd(sid, now()); }

  void on_slot_dead(const Slot& s) {
    PoolRuntime& p = *pools_[s.pool.value];
    ++counters_.invalidations;
    // Shutdown invalidations travel reliably.
    send_update(p, {s.id, SlotState::Dead, now(), Transport::Tcp, true}, now());
    Startd& d = model_.startd(s.startd);
    if (!d.alive && d.ccb_registered) {
      p.ccb.release(d.id);
      d.ccb_registered = false;
    }
  }

  // ---- glideins -----------------------------------------------------------

  void spawn(std::size_t provider, int window) {
    ProviderRuntime& pr = providers_[provider];
    const ProviderConfig& pc = *pr.cfg;
    GlideinSpec spec = pc.glidein;
    if (window >= 0) {
      const SimTime left = pc.bursts[static_cast<std::size_t>(window)].end() - now();
      if (left.millis <= 0) return;
      spec.lifetime = std::min(spec.lifetime, left);
    }
    const GlideinId gid = model_.spawn_glidein(spec, pr.id, pr.pool, now(), window);
    ++counters_.glideins_spawned;
    pr.provisioned_cores += spec.total_cores();
    pr.glideins.push_back(gid);
    if (window >= 0) pr.window_glideins[static_cast<std::size_t>(window)].push_back(gid);
    in_candidates_.resize(model_.slots.size(), 0);
    PoolRuntime& p = *pools_[pr.pool.value];
    const SimTime hb = p.cfg->heartbeat_interval;
    const Glidein& g = model_.glidein(gid);
    for (StartdId sid : g.startds) {
      register_startd(sid, now());
      for (SlotId s : model_.startd(sid).slots) {
        ++counters_.initial_updates;
        send_update(p, {s, SlotState::Unclaimed, now(), update_transport(p), false}, now());
      }
      // Spread heartbeats over the interval so a batch of pilots does not
      // report in lockstep.
      schedule(now() + SimTime{phase_rng_.uniform_int(1, hb.millis)}, EventKind::Heartbeat, sid.value);
    }
    schedule(now() + spec.lifetime, EventKind::GlideinExpire, gid.value);
  }

  void on_heartbeat(StartdId sid) {
    const Startd& d = model_.startd(sid);
    if (!d.alive) return;
    PoolRuntime& p = *pools_[d.pool.value];
    for (SlotId s : d.slots) {
      const Slot& sl = model_.slot(s);
      if (!sl.live()) continue;
      ++counters_.heartbeat_updates;
      send_update(p, {s, sl.state, now(), update_transport(p), false}, now());
    }
    schedule(now() + p.cfg->heartbeat_interval, EventKind::Heartbeat, sid.value);
  }

  void retire(GlideinId gid) {
    Glidein& g = model_.glidein(gid);
    if (!g.alive || g.retiring) return;
    ProviderRuntime& pr = providers_[g.provider.value];
    std::int64_t live = 0;
    for (SlotId s : g.slots) {
      if (model_.slot(s).live()) live += model_.slot(s).cores;
    }
    pr.provisioned_cores -= live;
    const auto transitions = model_.retire_glidein(gid);
    for (const auto& t : transitions) {
      if (t.to == SlotState::Retiring && model_.slot(t.slot).state == SlotState::Retiring) {
        advertise(model_.slot(t.slot), t.from, t.to, now());
      }
    }
    if (pr.cfg->grace.millis == 0) {
      evict_remaining(gid);
    } else if (model_.glidein(gid).alive) {
      schedule(now() + pr.cfg->grace, EventKind::GraceExpire, gid.value);
    }
  }

  void evict_remaining(GlideinId gid) {
    const Glidein& g = model_.glidein(gid);
    const std::vector<SlotId> slots = g.slots;
    for (SlotId s : slots) {
      Slot& sl = model_.slot(s);
      if (!sl.live()) continue;
      if (sl.job) {
        const Job& j = model_.job(*sl.job);
        const std::uint32_t stream = j.stream;
        const ScheddId sched = j.schedd;
        const JobId jid = j.id;
        providers_[sl.provider.value].cores_in_use -= sl.cores;
        model_.evict(s, now());
        const Job& after = model_.job(jid);
        ++counters_.evicted;
        ++stream_idle_[stream][sched.value];
        ++pools_[after.pool.value]->idle_jobs;
      } else {
        model_.evict(s, now());
      }
    }
  }

  // ---- provisioning ---------------------------------------------------------

  std::int64_t submission_budget(const ProviderConfig& pc) const {
    const double per_tick = pc.submission_rate_per_min * static_cast<double>(pc.provision_interval.millis) / 60'000.0;
    return static_cast<std::int64_t>(per_tick);
  }

  void provision(std::size_t i) {
    ProviderRuntime& pr = providers_[i];
    const ProviderConfig& pc = *pr.cfg;
    const std::int64_t live = pr.provisioned_cores + pr.pending_cores;
    const std::int64_t per = pc.glidein.total_cores();
    std::int64_t n = 0;
    if (pc.kind == ProviderKind::GridSite) {
      n = grid_provision_count(pc.pledged_cores, live, per, pools_[pr.pool.value]->idle_jobs, submission_budget(pc));
    } else if (pr.active_window >= 0) {
      n = glideins_to_fill(pc.bursts[static_cast<std::size_t>(pr.active_window)].cores, live, per, submission_budget(pc));
    }
    for (std::int64_t k = 0; k < n; ++k) {
      if (pc.start_delay_ms) {
        const auto delay = static_cast<std::int64_t>(std::max(0.0, pc.start_delay_ms->sample(pr.delay_rng)));
        pending_.push_back({i, pr.active_window});
        pr.pending_cores += per;
        schedule(now() + SimTime{delay}, EventKind::GlideinStart, pending_.size() - 1);
      } else {
        spawn(i, pc.kind == ProviderKind::HpcFacility ? pr.active_window : -1);
      }
    }
  }

  void on_provision_tick(std::size_t i) {
    ProviderRuntime& pr = providers_[i];
    pr.ticking = false;
    provision(i);
    if (pr.cfg->kind == ProviderKind::GridSite || pr.active_window >= 0) {
      pr.ticking = true;
      schedule(now() + pr.cfg->provision_interval, EventKind::ProvisionTick, i);
    }
  }

  void on_burst_start(std::size_t i, std::size_t w) {
    ProviderRuntime& pr = providers_[i];
    pr.active_window = static_cast<int>(w);
    if (pr.ticking) {
      provision(i);
    } else {
      on_provision_tick(i);
    }
  }

  void on_burst_end(std::size_t i, std::size_t w) {
    ProviderRuntime& pr = providers_[i];
    if (pr.active_window == static_cast<int>(w)) pr.active_window = -1;
    for (GlideinId g : pr.window_glideins[w]) retire(g);
  }

  void on_glidein_start(std::size_t k) {
    const auto [i, window] = pending_[k];
    ProviderRuntime& pr = providers_[i];
    pr.pending_cores -= pr.cfg->glidein.total_cores();
    if (pr.cfg->kind == ProviderKind::HpcFacility && pr.active_window != window) return;
    spawn(i, window);
  }

  // ---- workload ---------------------------------------------------------------

  bool stream_active(const WorkloadSpec& spec) const {
    return now() >= spec.start && (!spec.stop || now() < *spec.stop);
  }

  bool submit(std::size_t w, ScheddId target) {
    WorkloadStream& ws = streams_[w];
    const JobShape shape = ws.sample_job();
    const auto jid = model_.submit(target, static_cast<std::uint32_t>(w), shape.cores, shape.memory_mb, shape.duration, now());
    if (!jid) {
      ++counters_.submit_rejected;
      return false;
    }
    ++counters_.submitted;
    ++stream_idle_[w][target.value];
    ++pools_[model_.job(*jid).pool.value]->idle_jobs;
    return true;
  }

  /// Tops every target schedd of a backlog stream back up to its depth.
  void replenish_stream(std::size_t w) {
    const WorkloadSpec& spec = streams_[w].spec();
    if (spec.mode != ArrivalMode::Backlog || !stream_active(spec)) return;
    for (ScheddId t : spec.targets) {
      while (stream_idle_[w][t.value] < spec.backlog_per_schedd) {
        if (!submit(w, t)) break;
      }
    }
  }

  void replenish_all() {
    for (std::size_t w = 0; w < streams_.size(); ++w) replenish_stream(w);
  }

  void schedule_next_arrival(std::size_t w) {
    WorkloadStream& ws = streams_[w];
    const WorkloadSpec& spec = ws.spec();
    SimTime next;
    if (spec.process == RateProcess::Constant) {
      next = ws.constant_arrival(ws.arrivals_so_far + 1);
    } else {
      next = (ws.arrivals_so_far == 0 ? spec.start : last_arrival_[w]) + ws.poisson_gap();
    }
    if (spec.stop && next > *spec.stop) return;
    last_arrival_[w] = next;
    schedule(next, EventKind::ArrivalTick, w);
  }

  void on_arrival(std::size_t w) {
    WorkloadStream& ws = streams_[w];
    ++ws.arrivals_so_far;
    submit(w, ws.next_target());
    schedule_next_arrival(w);
  }

  // ---- negotiation ------------------------------------------------------------

  bool entry_valid(const Schedd::QueueEntry& e, PoolId pool) const {
    const Job& j = model_.jobs[e.job.value];
    return j.state == JobState::Idle && j.epoch == e.epoch && j.pool == pool;
  }

  /// Moves long-idle jobs of linked pools into this subpool's queues, no
  /// more than the subpool could plausibly run this cycle.
  void flock_into(PoolRuntime& sub) {
    for (std::size_t li : sub.inbound_links) {
      const FederationConfig& fc = cfg_.federation[li];
      PoolRuntime& from = *pools_[*cfg_.pool_index(fc.from)];
      const FederationLink link{from.id, sub.id, fc.threshold};
      std::int64_t waiting = 0;
      for (const auto& q : sub.flock_queues) {
        for (const auto& e : q) waiting += entry_valid(e, sub.id) ? 1 : 0;
      }
      std::int64_t budget = static_cast<std::int64_t>(sub.candidates.size()) - waiting;
      for (Schedd& s : model_.schedds) {
        if (budget <= 0) break;
        if (s.pools.empty() || s.pools.front() != from.id) continue;
        for (auto& e : s.idle_queue) {
          if (budget <= 0) break;
          if (!entry_valid(e, from.id)) continue;
          Job& j = model_.jobs[e.job.value];
          if (flock_route(j, link, now(), sub.top.viewed_unclaimed()) != FlockDecision::RoutedToSubpool) {
            if (j.evictions == 0) break;  // younger jobs follow
            continue;
          }
          j.pool = sub.id;
          ++j.epoch;
          sub.flock_queues[s.id.value].push_back({j.id, j.epoch});
          --from.idle_jobs;
          ++sub.idle_jobs;
          ++counters_.flocked;
          --budget;
        }
      }
    }
  }

  void on_nego_start(std::size_t pi, std::size_t k) {
    PoolRuntime& p = *pools_[pi];
    p.negotiators[k].cycle_start = now();
    if (!p.inbound_links.empty()) flock_into(p);
    sync_pool(p, now(), true);
    const std::int64_t done_us = p.top.submit_query(QueryPriority::High, now());
    schedule(ceil_to_ms(done_us), EventKind::NegoMatch, pack(pi, k));
  }

  void on_nego_match(std::size_t pi, std::size_t k) {
    PoolRuntime& p = *pools_[pi];
    auto& n = p.negotiators[k];
    sync_pool(p, now());
    MatchReport r;
    r.query_time = now() - n.cycle_start;
    std::vector<JobSource> sources;
    const std::size_t count = p.negotiators.size();
    for (Schedd& s : model_.schedds) {
      if (s.id.value % count != k) continue;
      const bool home = !s.pools.empty() && s.pools.front() == p.id;
      auto& fq = p.flock_queues[s.id.value];
      if (!home && fq.empty()) continue;
      if (home) model_.compact_queue_front(s);
      while (!fq.empty() && !entry_valid(fq.front(), p.id)) fq.pop_front();
      JobSource src;
      src.schedd = s.id;
      src.headroom = schedd_capacity(s) - static_cast<std::int64_t>(s.running_count);
      auto* hq = home ? &s.idle_queue : nullptr;
      src.next = [this, hq, &fq, pid = p.id, i = std::size_t{0}, phase = 0]() mutable -> std::optional<const Job*> {
        while (true) {
          auto* q = phase == 0 ? hq : &fq;
          if (q == nullptr || i >= q->size()) {
            if (phase == 1) return std::nullopt;
            phase = 1;
            i = 0;
            continue;
          }
          const auto& e = (*q)[i++];
          if (entry_valid(e, pid)) return &model_.jobs[e.job.value];
        }
      };
      sources.push_back(std::move(src));
    }
    match_jobs(sources, p.candidates, r);
    n.match_epochs.clear();
    for (const auto& [jid, sid] : r.matches) {
      n.match_epochs.push_back(model_.job(jid).epoch);
      // The view still says Unclaimed; the next cycle's query sees it again
      // unless an update arrives first.
      p.candidates.insert(sid, shape_of(model_.slot(sid)));
    }
    r.match_time = match_duration(r.candidates_scanned, p.nego.match_cost_per_candidate, p.nego.threads);
    n.report = std::move(r);
    schedule(now() + n.report.match_time, EventKind::NegoClaim, pack(pi, k));
  }

  void on_nego_claim(std::size_t pi, std::size_t k) {
    PoolRuntime& p = *pools_[pi];
    auto& n = p.negotiators[k];
    MatchReport& r = n.report;
    for (std::size_t m = 0; m < r.matches.size(); ++m) {
      const auto [jid, sid] = r.matches[m];
      Job& j = model_.job(jid);
      Slot& s = model_.slot(sid);
      Schedd& sd = model_.schedd(j.schedd);
      const bool job_ok = j.state == JobState::Idle && j.epoch == n.match_epochs[m] && j.pool == p.id;
      const bool room = static_cast<std::int64_t>(sd.running_count) < schedd_capacity(sd);
      if (!job_ok || !room || !model_.startds[s.startd.value].ccb_registered) {
        ++r.claims_other;
        continue;
      }
      if (s.state != SlotState::Unclaimed) {
        // The view said Unclaimed; the slot disagrees.
        ++r.claims_stale;
        continue;
      }
      model_.claim(sid, j.schedd);
      const SimTime done = model_.start_job(j.schedd, jid, sid, now());
      ++r.claims_ok;
      ++counters_.started;
      --stream_idle_[j.stream][j.schedd.value];
      --p.idle_jobs;
      providers_[s.provider.value].cores_in_use += s.cores;
      advertise(s, SlotState::Matched, SlotState::Claimed, now());
      schedule(done, EventKind::JobComplete, pack(j.epoch, jid.value));
    }
    counters_.claims_ok += r.claims_ok;
    counters_.claims_stale += r.claims_stale;
    counters_.claims_other += r.claims_other;
    ++counters_.nego_cycles;
    p.last_cycle = r.duration();
    n.last = r;
    replenish_all();
    schedule(now() + p.nego.cycle_delay, EventKind::NegoStart, pack(pi, k));
  }

  void on_job_complete(std::uint64_t target) {
    const JobId jid{lo32(target)};
    Job& j = model_.job(jid);
    if (j.state != JobState::Running || j.epoch != hi32(target)) return;
    const SlotId sid = *j.slot;
    const int cores = model_.slot(sid).cores;
    providers_[model_.slot(sid).provider.value].cores_in_use -= cores;
    const SlotTransition t = model_.complete_job(jid, now());
    ++counters_.completed;
    if (t.to == SlotState::Unclaimed) advertise(model_.slot(sid), t.from, t.to, now());
  }

  void on_monitoring(std::size_t pi) {
    PoolRuntime& p = *pools_[pi];
    for (int q = 0; q < p.cfg->monitoring.queries_per_interval; ++q) {
      const std::size_t c = route_query(p.secondaries.size(), QueryKind::from(QueryOrigin::Monitoring),
                                        p.cfg->features.priority_query_routing, p.low_query_rr);
      if (c == 0) {
        sync_pool(p, now());
        p.top.submit_query(QueryPriority::Low, now());
      } else {
        p.secondaries[c - 1].collector.submit_query(QueryPriority::Low, now());
      }
    }
    schedule(now() + p.cfg->monitoring.query_interval, EventKind::MonitoringQuery, pi);
  }

  // ---- sampling ---------------------------------------------------------------

  void on_sample() {
    for (auto& p : pools_) sync_pool(*p, now());
    MetricsFrame f;
    f.at = now();
    for (const Schedd& s : model_.schedds) {
      f.running_total += static_cast<std::int64_t>(s.running_count);
      f.idle_total += static_cast<std::int64_t>(s.idle_count);
      f.running_by_schedd.push_back(static_cast<std::int64_t>(s.running_count));
    }
    for (const auto& pr : providers_) {
      f.cores_by_provider.push_back(pr.cores_in_use);
      f.cores_total += pr.cores_in_use;
    }
    for (const Slot& s : model_.slots) {
      if (s.state == SlotState::Unclaimed) ++f.unclaimed_true;
    }
    std::uint64_t drops = 0;
    for (const auto& p : pools_) {
      f.unclaimed_viewed += static_cast<std::int64_t>(p->top.viewed_unclaimed());
      f.ccb_reg += static_cast<std::int64_t>(p->ccb.registered_count());
      drops += p->top.drops();
      for (const auto& s : p->secondaries) drops += s.collector.drops();
    }
    const PoolRuntime& g = *pools_[cfg_.global_pool()];
    const SimTime window = cfg_.metrics.effective_duty_window();
    f.duty_top = quantize6(g.top.duty_cycle(now(), window));
    for (const auto& s : g.secondaries) f.duty_secondary.push_back(quantize6(s.collector.duty_cycle(now(), window)));
    f.udp_drops = static_cast<std::int64_t>(drops - prev_drops_);
    f.stale_fail = static_cast<std::int64_t>(counters_.claims_stale - prev_stale_);
    prev_drops_ = drops;
    prev_stale_ = counters_.claims_stale;
    f.nego_ms = g.last_cycle ? g.last_cycle->millis : 0;
    frames_.push_back(std::move(f));
    if (cfg_.check_invariants) {
      auto v = check_invariants();
      violations_.insert(violations_.end(), v.begin(), v.end());
    }
    schedule(now() + cfg_.metrics.interval, EventKind::Sample, 0);
  }

  struct PendingSpawn {
    std::size_t provider;
    int window;
  };

  ScenarioConfig cfg_;
  Kernel<EventKind> kernel_;
  PoolModel model_;
  std::vector<std::unique_ptr<PoolRuntime>> pools_;
  std::vector<ProviderRuntime> providers_;
  std::vector<WorkloadStream> streams_;
  std::vector<std::vector<std::int64_t>> stream_idle_;
  std::vector<SimTime> last_arrival_;
  std::vector<PendingSpawn> pending_;
  std::vector<std::uint8_t> in_candidates_;
  RandomStream phase_rng_;
  SimCounters counters_;
  SeriesLayout layout_;
  std::vector<MetricsFrame> frames_;
  std::vector<std::string> violations_;
  std::uint64_t prev_drops_ = 0;
  std::uint64_t prev_stale_ = 0;
};

}  // namespace simpool
