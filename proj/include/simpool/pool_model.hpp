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

#include <compare>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "simpool/errors.hpp"
#include "simpool/sim_time.hpp"

namespace simpool {

template <class Tag>
struct Id {
  std::uint32_t value = 0;

  constexpr auto operator<=>(const Id&) const = default;
};

using JobId = Id<struct JobTag>;
using SlotId = Id<struct SlotTag>;
using StartdId = Id<struct StartdTag>;
using GlideinId = Id<struct GlideinTag>;
using ScheddId = Id<struct ScheddTag>;
using PoolId = Id<struct PoolTag>;
using ProviderId = Id<struct ProviderTag>;

enum class JobState : std::uint8_t { Idle, Running, Completed };

enum class SlotState : std::uint8_t { Unclaimed, Matched, Claimed, Busy, Retiring, Dead };

inline std::string_view to_string(SlotState s) {
  switch (s) {
    case SlotState::Unclaimed: return "Unclaimed";
    case SlotState::Matched: return "Matched";
    case SlotState::Claimed: return "Claimed";
    case SlotState::Busy: return "Busy";
    case SlotState::Retiring: return "Retiring";
    case SlotState::Dead: return "Dead";
  }
  return "?";
}

struct Job {
  JobId id;
  ScheddId schedd;
  std::uint32_t stream = 0;
  int req_cores = 1;
  std::int64_t req_memory_mb = 0;
  SimTime duration{1};
  JobState state = JobState::Idle;
  SimTime submitted_at;
  SimTime started_at;
  SimTime completed_at;
  // Start of the current idle period; flocking thresholds are measured from it.
  SimTime idle_since;
  std::optional<SlotId> slot;
  PoolId home_pool;
  PoolId pool;  // pool whose negotiator currently owns this job
  std::uint32_t evictions = 0;
  // Bumped on every (re)start and requeue; stale completion events and stale
  // idle-queue entries compare against it.
  std::uint32_t epoch = 0;
};

struct Slot {
  SlotId id;
  StartdId startd;
  GlideinId glidein;
  PoolId pool;
  ProviderId provider;
  int cores = 1;
  std::int64_t memory_mb = 0;
  SlotState state = SlotState::Unclaimed;
  std::optional<ScheddId> claimed_by;
  std::optional<JobId> job;

  bool live() const { return state != SlotState::Dead; }
};

struct Startd {
  StartdId id;
  GlideinId glidein;
  PoolId pool;
  std::vector<SlotId> slots;
  bool ccb_registered = false;
  bool alive = true;
  std::uint32_t live_slots = 0;
};

/// Shape of one pilot. k > 1 startds per pilot is the "uberglidein" used to
/// multiply a pool's size in scale tests.
struct GlideinSpec {
  int startds = 1;
  int slots_per_startd = 1;
  int slot_cores = 1;
  std::int64_t slot_memory_mb = 2000;
  SimTime lifetime = hours(48);

  int total_slots() const { return startds * slots_per_startd; }
  std::int64_t total_cores() const { return static_cast<std::int64_t>(total_slots()) * slot_cores; }
};

struct Glidein {
  GlideinId id;
  ProviderId provider;
  PoolId pool;
  GlideinSpec spec;
  SimTime spawned_at;
  std::vector<StartdId> startds;
  std::vector<SlotId> slots;
  bool alive = true;
  bool retiring = false;
  SimTime retire_deadline;
  int window = -1;  // HPC burst window index, -1 for steady providers
  std::uint32_t live_slots = 0;
};

struct Schedd {
  ScheddId id;
  std::string name;
  std::int64_t memory_capacity_mb = 50'000;
  std::int64_t ram_per_running_job_mb = 1;
  std::optional<std::size_t> idle_queue_cap;
  std::vector<PoolId> pools;

  struct QueueEntry {
    JobId job;
    std::uint32_t epoch;
  };
  // FIFO of idle jobs; entries whose epoch no longer matches the job are
  // skipped lazily.
  std::deque<QueueEntry> idle_queue;
  std::size_t idle_count = 0;
  std::size_t running_count = 0;
};

/// Maximum number of simultaneously running jobs a schedd's memory allows.
inline std::int64_t schedd_capacity(std::int64_t memory_capacity_mb, std::int64_t ram_per_running_job_mb) {
  if (ram_per_running_job_mb <= 0) {
    throw InvalidParameter("ram_per_running_job_mb must be > 0");
  }
  if (memory_capacity_mb < 0) {
    throw InvalidParameter("memory_capacity_mb must be >= 0");
  }
  return memory_capacity_mb / ram_per_running_job_mb;
}

inline std::int64_t schedd_capacity(const Schedd& s) {
  return schedd_capacity(s.memory_capacity_mb, s.ram_per_running_job_mb);
}

struct SlotTransition {
  SlotId slot;
  SlotState from;
  SlotState to;
};

/// Entity store and the state-machine rules for jobs, slots, startds,
/// glideins and schedds. Scheduling of follow-up events is left to the
/// caller; every operation reports what changed.
class PoolModel {
 public:
  std::vector<Job> jobs;
  std::vector<Slot> slots;
  std::vector<Startd> startds;
  std::vector<Glidein> glideins;
  std::vector<Schedd> schedds;

  Job& job(JobId id) { return jobs.at(id.value); }
  const Job& job(JobId id) const { return jobs.at(id.value); }
  Slot& slot(SlotId id) { return slots.at(id.value); }
  const Slot& slot(SlotId id) const { return slots.at(id.value); }
  Startd& startd(StartdId id) { return startds.at(id.value); }
  Glidein& glidein(GlideinId id) { return glideins.at(id.value); }
  Schedd& schedd(ScheddId id) { return schedds.at(id.value); }
  const Schedd& schedd(ScheddId id) const { return schedds.at(id.value); }

  ScheddId add_schedd(std::string name, std::int64_t memory_capacity_mb, std::int64_t ram_per_running_job_mb,
                      std::vector<PoolId> pools = {PoolId{0}}) {
    Schedd s;
    s.id = ScheddId{static_cast<std::uint32_t>(schedds.size())};
    s.name = std::move(name);
    s.memory_capacity_mb = memory_capacity_mb;
    s.ram_per_running_job_mb = ram_per_running_job_mb;
    s.pools = std::move(pools);
    schedds.push_back(std::move(s));
    return schedds.back().id;
  }

  /// Appends an idle job to the schedd queue. Returns nullopt when the
  /// schedd's idle-queue cap rejects it.
  std::optional<JobId> submit(ScheddId sid, std::uint32_t stream, int req_cores, std::int64_t req_memory_mb,
                              SimTime duration, SimTime at) {
    Schedd& s = schedd(sid);
    if (s.idle_queue_cap && s.idle_count >= *s.idle_queue_cap) {
      return std::nullopt;
    }
    if (req_cores < 1) {
      throw InvalidParameter("job req_cores must be >= 1");
    }
    if (duration.millis <= 0) {
      throw InvalidParameter("job duration must be > 0");
    }
    Job j;
    j.id = JobId{static_cast<std::uint32_t>(jobs.size())};
    j.schedd = sid;
    j.stream = stream;
    j.req_cores = req_cores;
    j.req_memory_mb = req_memory_mb;
    j.duration = duration;
    j.submitted_at = at;
    j.idle_since = at;
    j.home_pool = s.pools.empty() ? PoolId{0} : s.pools.front();
    j.pool = j.home_pool;
    jobs.push_back(j);
    s.idle_queue.push_back({j.id, j.epoch});
    ++s.idle_count;
    return j.id;
  }

  GlideinId spawn_glidein(const GlideinSpec& spec, ProviderId provider, PoolId pool, SimTime at, int window = -1) {
    if (spec.startds < 1 || spec.slots_per_startd < 1 || spec.slot_cores < 1) {
      throw InvalidParameter("glidein needs >= 1 startd, >= 1 slot per startd and >= 1 core per slot");
    }
    Glidein g;
    g.id = GlideinId{static_cast<std::uint32_t>(glideins.size())};
    g.provider = provider;
    g.pool = pool;
    g.spec = spec;
    g.spawned_at = at;
    g.window = window;
    for (int k = 0; k < spec.startds; ++k) {
      Startd d;
      d.id = StartdId{static_cast<std::uint32_t>(startds.size())};
      d.glidein = g.id;
      d.pool = pool;
      for (int i = 0; i < spec.slots_per_startd; ++i) {
        Slot s;
        s.id = SlotId{static_cast<std::uint32_t>(slots.size())};
        s.startd = d.id;
        s.glidein = g.id;
        s.pool = pool;
        s.provider = provider;
        s.cores = spec.slot_cores;
        s.memory_mb = spec.slot_memory_mb;
        slots.push_back(s);
        d.slots.push_back(s.id);
        g.slots.push_back(s.id);
      }
      d.live_slots = static_cast<std::uint32_t>(d.slots.size());
      g.startds.push_back(d.id);
      startds.push_back(std::move(d));
    }
    g.live_slots = static_cast<std::uint32_t>(g.slots.size());
    glideins.push_back(std::move(g));
    return glideins.back().id;
  }

  /// Negotiator match followed by the schedd's claim activation:
  /// Unclaimed -> Matched -> Claimed. Returns false (and changes nothing)
  /// when the slot is not truly Unclaimed.
  bool claim(SlotId sid, ScheddId by, std::vector<SlotTransition>* out = nullptr) {
    Slot& s = slot(sid);
    if (s.state != SlotState::Unclaimed) {
      return false;
    }
    s.state = SlotState::Matched;
    if (out) out->push_back({sid, SlotState::Unclaimed, SlotState::Matched});
    s.state = SlotState::Claimed;
    s.claimed_by = by;
    if (out) out->push_back({sid, SlotState::Matched, SlotState::Claimed});
    return true;
  }

  /// Binds an idle job to a slot the schedd has claimed. Returns the time
  /// at which the job will complete.
  SimTime start_job(ScheddId sid, JobId jid, SlotId slot_id, SimTime at) {
    Schedd& s = schedd(sid);
    Job& j = job(jid);
    Slot& sl = slot(slot_id);
    if (j.state != JobState::Idle) {
      throw InvalidParameter("start_job: job " + std::to_string(jid.value) + " is not idle");
    }
    if (sl.state != SlotState::Claimed || sl.claimed_by != sid) {
      throw SlotNotClaimed("start_job: slot " + std::to_string(slot_id.value) + " is not claimed by schedd " +
                           s.name);
    }
    if (static_cast<std::int64_t>(s.running_count) >= schedd_capacity(s)) {
      throw CapacityExceeded("start_job: schedd " + s.name + " is at its running-job capacity");
    }
    if (sl.cores < j.req_cores || sl.memory_mb < j.req_memory_mb) {
      throw RequirementsMismatch("start_job: job " + std::to_string(jid.value) + " does not fit slot " +
                                 std::to_string(slot_id.value));
    }
    j.state = JobState::Running;
    j.started_at = at;
    j.slot = slot_id;
    ++j.epoch;
    sl.state = SlotState::Busy;
    sl.job = jid;
    --s.idle_count;
    ++s.running_count;
    return at + j.duration;
  }

  /// Finishes a running job and frees its slot. A Busy slot becomes
  /// Unclaimed; a Retiring slot (its glidein is draining) becomes Dead.
  SlotTransition complete_job(JobId jid, SimTime at) {
    Job& j = job(jid);
    if (j.state != JobState::Running) {
      throw NotRunning("complete_job: job " + std::to_string(jid.value) + " is not running");
    }
    Slot& sl = slot(*j.slot);
    Schedd& s = schedd(j.schedd);
    j.state = JobState::Completed;
    j.completed_at = at;
    --s.running_count;
    sl.job.reset();
    const SlotState from = sl.state;
    if (sl.state == SlotState::Retiring) {
      mark_dead(sl);
    } else {
      sl.state = SlotState::Unclaimed;
      sl.claimed_by.reset();
    }
    return {sl.id, from, sl.state};
  }

  /// Returns a running job to the head of its schedd's idle queue and kills
  /// its slot.
  SlotTransition evict(SlotId slot_id, SimTime at) {
    Slot& sl = slot(slot_id);
    const SlotState from = sl.state;
    if (sl.job) {
      Job& j = job(*sl.job);
      Schedd& s = schedd(j.schedd);
      j.state = JobState::Idle;
      j.slot.reset();
      j.idle_since = at;
      j.pool = j.home_pool;
      ++j.evictions;
      ++j.epoch;
      --s.running_count;
      ++s.idle_count;
      s.idle_queue.push_front({j.id, j.epoch});
      sl.job.reset();
    }
    mark_dead(sl);
    return {slot_id, from, SlotState::Dead};
  }

  /// Starts draining a glidein. Slots without a job die at once; slots with
  /// a running job become Retiring and keep running it.
  std::vector<SlotTransition> retire_glidein(GlideinId gid) {
    Glidein& g = glidein(gid);
    std::vector<SlotTransition> out;
    if (!g.alive || g.retiring) {
      return out;
    }
    g.retiring = true;
    for (SlotId id : g.slots) {
      Slot& sl = slot(id);
      if (sl.state == SlotState::Dead) {
        continue;
      }
      const SlotState from = sl.state;
      sl.state = SlotState::Retiring;
      out.push_back({id, from, SlotState::Retiring});
      if (!sl.job) {
        mark_dead(sl);
        out.push_back({id, SlotState::Retiring, SlotState::Dead});
      }
    }
    return out;
  }

  bool queue_entry_valid(const Schedd::QueueEntry& e) const {
    const Job& j = jobs[e.job.value];
    return j.state == JobState::Idle && j.epoch == e.epoch;
  }

  void compact_queue_front(Schedd& s) {
    while (!s.idle_queue.empty() && !queue_entry_valid(s.idle_queue.front())) {
      s.idle_queue.pop_front();
    }
  }

  /// Hook invoked whenever a slot dies (startd/glidein bookkeeping).
  std::function<void(const Slot&)> on_slot_dead;

 private:
  void mark_dead(Slot& sl) {
    sl.state = SlotState::Dead;
    sl.claimed_by.reset();
    Startd& d = startd(sl.startd);
    Glidein& g = glidein(sl.glidein);
    --d.live_slots;
    --g.live_slots;
    if (d.live_slots == 0) {
      d.alive = false;
    }
    if (g.live_slots == 0) {
      g.alive = false;
    }
    if (on_slot_dead) {
      on_slot_dead(sl);
    }
  }
};

}  // namespace simpool

template <class Tag>
struct std::hash<simpool::Id<Tag>> {
  std::size_t operator()(simpool::Id<Tag> id) const noexcept { return std::hash<std::uint32_t>{}(id.value); }
};
