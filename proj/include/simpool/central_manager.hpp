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
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <unordered_set>
#include <utility>
#include <vector>

#include "simpool/errors.hpp"
#include "simpool/pool_model.hpp"
#include "simpool/sim_time.hpp"

namespace simpool {

enum class Transport : std::uint8_t { Udp, Tcp };

struct UpdateMessage {
  SlotId slot;
  SlotState advertised_state = SlotState::Unclaimed;
  SimTime emitted_at;
  Transport transport = Transport::Tcp;
  // Startd shutdown: removes the slot from the collector's view.
  bool invalidate = false;
};

enum class IngestOutcome : std::uint8_t { Processed, Dropped, Queued };

enum class CollectorRole : std::uint8_t { Top, Secondary };

enum class QueryPriority : std::uint8_t { High, Low };
enum class QueryOrigin : std::uint8_t { Negotiator, Monitoring, Other };

struct QueryKind {
  QueryPriority priority;
  QueryOrigin origin;

  static constexpr QueryKind from(QueryOrigin o) {
    return {o == QueryOrigin::Negotiator ? QueryPriority::High : QueryPriority::Low, o};
  }
};

// Busy time is attributed to one of these classes.
enum class WorkClass : std::uint8_t { Update, Digest, QueryHigh, QueryLow, CcbRegistration, Count };

/// Should a slot state transition be advertised to the collector?
///
/// With filtering on only transitions into Unclaimed (the slot becomes
/// negotiable) are sent. Periodic heartbeats bypass this filter.
constexpr bool filter_update(SlotState from, SlotState to, bool filtering_enabled) {
  (void)from;
  return !filtering_enabled || to == SlotState::Unclaimed;
}

/// Per-update collector service cost (milliseconds) at which a pool of
/// `target_slots` busy slots offers exactly one second of work per second.
///
/// Per-slot update rate is one heartbeat per interval plus the job-turnover
/// transitions: one per job with filtering, two (claim and release) without.
inline double calibrate_collector(std::int64_t target_slots, SimTime mean_job_duration, SimTime heartbeat_interval,
                                  bool filtering) {
  if (target_slots <= 0 || mean_job_duration.millis <= 0 || heartbeat_interval.millis <= 0) {
    throw InvalidParameter("calibrate_collector: all inputs must be > 0");
  }
  const double transitions = filtering ? 1.0 : 2.0;
  const double r_slot = 1.0 / heartbeat_interval.seconds() + transitions / mean_job_duration.seconds();
  return 1000.0 / (static_cast<double>(target_slots) * r_slot);
}

struct ViewEntry {
  SlotState state = SlotState::Unclaimed;
  SimTime as_of;
  bool present = false;
};

/// A single-server FIFO collector daemon.
///
/// Work (updates, digests, queries, CCB registrations) is served in arrival
/// order; the collector keeps the completion schedule and applies finished
/// updates to its slot view lazily when advanced. Arrivals must be offered
/// in non-decreasing time order. UDP updates count against
/// udp_buffer_capacity while queued or in service and are dropped when the
/// buffer is full; everything else queues without bound.
class Collector {
 public:
  struct Params {
    CollectorRole role = CollectorRole::Top;
    Micros update_cost{10'000};
    Micros query_high_cost{50'000};
    Micros query_low_cost{200'000};
    std::size_t udp_buffer_capacity = 10'000;
    // How far back duty_cycle() can look.
    SimTime history = hours(2);
  };

  using ViewListener = std::function<void(SlotId, const ViewEntry& before, const ViewEntry& after)>;
  using ProcessedListener = std::function<void(const UpdateMessage&, std::int64_t finish_us)>;

  Collector() = default;
  explicit Collector(Params p) : params_(p) {}

  const Params& params() const noexcept { return params_; }
  CollectorRole role() const noexcept { return params_.role; }

  void set_view_listener(ViewListener l) { view_listener_ = std::move(l); }
  void set_processed_listener(ProcessedListener l) { processed_listener_ = std::move(l); }

  IngestOutcome ingest(const UpdateMessage& m, SimTime at) {
    advance(at);
    ++offered_;
    if (m.transport == Transport::Udp && udp_in_system_ >= params_.udp_buffer_capacity && !queue_.empty()) {
      ++drops_;
      return IngestOutcome::Dropped;
    }
    Pending p;
    p.cls = WorkClass::Update;
    p.msg = m;
    p.has_msg = true;
    p.udp = m.transport == Transport::Udp;
    enqueue(std::move(p), to_micros(at), params_.update_cost.value);
    return m.transport == Transport::Udp ? IngestOutcome::Processed : IngestOutcome::Queued;
  }

  /// A batch of updates forwarded by a secondary collector.
  void ingest_digest(std::vector<UpdateMessage> msgs, std::int64_t arrival_us, Micros cost) {
    advance_us(arrival_us);
    Pending p;
    p.cls = WorkClass::Digest;
    p.has_digest = true;
    digests_.push_back(std::move(msgs));
    enqueue(std::move(p), arrival_us, cost.value);
  }

  /// Queues a query and returns the instant its answer is ready.
  std::int64_t submit_query(QueryPriority prio, SimTime at) {
    advance(at);
    Pending p;
    p.cls = prio == QueryPriority::High ? WorkClass::QueryHigh : WorkClass::QueryLow;
    const Micros cost = prio == QueryPriority::High ? params_.query_high_cost : params_.query_low_cost;
    return enqueue(std::move(p), to_micros(at), cost.value);
  }

  std::int64_t submit_work(WorkClass cls, Micros cost, SimTime at) {
    advance(at);
    Pending p;
    p.cls = cls;
    return enqueue(std::move(p), to_micros(at), cost.value);
  }

  void advance(SimTime at) { advance_us(to_micros(at)); }

  /// Applies every queued item whose service has finished by `us`.
  void advance_us(std::int64_t us) {
    while (!queue_.empty() && queue_.front().finish_us <= us) {
      Pending p = std::move(queue_.front());
      queue_.pop_front();
      if (p.udp) {
        --udp_in_system_;
      }
      if (p.has_msg) {
        deliver(p.msg, p.finish_us);
      }
      if (p.has_digest) {
        std::vector<UpdateMessage> batch = std::move(digests_.front());
        digests_.pop_front();
        for (const UpdateMessage& m : batch) {
          deliver(m, p.finish_us);
        }
      }
    }
    prune(us);
  }

  /// Fraction of (at - window, at] this collector spent serving work.
  double duty_cycle(SimTime at, SimTime window) const {
    if (window.millis <= 0) {
      throw InvalidParameter("duty_cycle window must be > 0");
    }
    const std::int64_t hi = to_micros(at);
    const std::int64_t lo = hi - to_micros(window);
    std::int64_t busy = 0;
    for (auto it = intervals_.rbegin(); it != intervals_.rend(); ++it) {
      if (it->second <= lo) {
        break;
      }
      const std::int64_t a = std::max(it->first, lo);
      const std::int64_t b = std::min(it->second, hi);
      if (b > a) {
        busy += b - a;
      }
    }
    return std::clamp(static_cast<double>(busy) / static_cast<double>(hi - lo), 0.0, 1.0);
  }

  const ViewEntry* view(SlotId id) const {
    if (id.value >= view_.size() || !view_[id.value].present) {
      return nullptr;
    }
    return &view_[id.value];
  }

  std::size_t viewed_unclaimed() const noexcept { return viewed_unclaimed_; }
  std::size_t queue_length() const noexcept { return queue_.size(); }
  std::size_t udp_in_system() const noexcept { return udp_in_system_; }
  std::uint64_t drops() const noexcept { return drops_; }
  std::uint64_t offered() const noexcept { return offered_; }
  std::uint64_t processed() const noexcept { return processed_; }
  std::int64_t busy_until_us() const noexcept { return busy_until_us_; }

  /// Cumulative service time committed per work class (microseconds).
  std::int64_t busy_total_us(WorkClass cls) const { return busy_by_class_[static_cast<std::size_t>(cls)]; }

 private:
  struct Pending {
    std::int64_t finish_us = 0;
    WorkClass cls = WorkClass::Update;
    bool udp = false;
    bool has_msg = false;
    bool has_digest = false;  // payload is the front of digests_
    UpdateMessage msg;
  };

  void deliver(const UpdateMessage& m, std::int64_t finish_us) {
    apply(m);
    ++processed_;
    if (processed_listener_) {
      processed_listener_(m, finish_us);
    }
  }

  std::int64_t enqueue(Pending p, std::int64_t arrival_us, std::int64_t cost_us) {
    const std::int64_t start = std::max(arrival_us, busy_until_us_);
    const std::int64_t finish = start + cost_us;
    if (cost_us > 0) {
      if (!intervals_.empty() && intervals_.back().second >= start) {
        intervals_.back().second = finish;
      } else {
        intervals_.emplace_back(start, finish);
      }
    }
    busy_until_us_ = finish;
    busy_by_class_[static_cast<std::size_t>(p.cls)] += cost_us;
    p.finish_us = finish;
    if (p.udp) {
      ++udp_in_system_;
    }
    if (finish <= arrival_us) {
      // Zero-cost work completes on arrival.
      queue_.push_back(std::move(p));
      advance_us(arrival_us);
    } else {
      queue_.push_back(std::move(p));
    }
    return finish;
  }

  void apply(const UpdateMessage& m) {
    if (m.slot.value >= view_.size()) {
      view_.resize(static_cast<std::size_t>(m.slot.value) + 1);
    }
    ViewEntry& e = view_[m.slot.value];
    if (e.present && m.emitted_at < e.as_of) {
      return;
    }
    const ViewEntry before = e;
    if (m.invalidate) {
      e.present = false;
      e.as_of = m.emitted_at;
    } else {
      e.present = true;
      e.state = m.advertised_state;
      e.as_of = m.emitted_at;
    }
    const bool was = before.present && before.state == SlotState::Unclaimed;
    const bool now = e.present && e.state == SlotState::Unclaimed;
    if (was != now) {
      viewed_unclaimed_ += now ? 1 : -1;
    }
    if (view_listener_) {
      view_listener_(m.slot, before, e);
    }
  }

  void prune(std::int64_t now_us) {
    const std::int64_t keep_from = now_us - to_micros(params_.history);
    while (!intervals_.empty() && intervals_.front().second < keep_from) {
      intervals_.pop_front();
    }
  }

  Params params_;
  std::deque<Pending> queue_;
  std::deque<std::vector<UpdateMessage>> digests_;
  std::deque<std::pair<std::int64_t, std::int64_t>> intervals_;
  std::vector<ViewEntry> view_;
  std::size_t viewed_unclaimed_ = 0;
  std::size_t udp_in_system_ = 0;
  std::int64_t busy_until_us_ = 0;
  std::uint64_t drops_ = 0;
  std::uint64_t offered_ = 0;
  std::uint64_t processed_ = 0;
  std::array<std::int64_t, static_cast<std::size_t>(WorkClass::Count)> busy_by_class_{};
  ViewListener view_listener_;
  ProcessedListener processed_listener_;
};

enum class CcbOutcome : std::uint8_t { Registered, Rejected };

/// Connection broker with a bounded socket pool.
class Ccb {
 public:
  Ccb() = default;
  explicit Ccb(std::optional<std::size_t> max_connections, bool on_dedicated_host = true)
      : max_connections_(max_connections), on_dedicated_host_(on_dedicated_host) {}

  CcbOutcome register_startd(StartdId id) {
    if (registered_.contains(id)) {
      return CcbOutcome::Registered;
    }
    if (max_connections_ && registered_.size() >= *max_connections_) {
      ++rejections_;
      return CcbOutcome::Rejected;
    }
    registered_.insert(id);
    return CcbOutcome::Registered;
  }

  void release(StartdId id) { registered_.erase(id); }

  bool is_registered(StartdId id) const { return registered_.contains(id); }
  std::size_t registered_count() const noexcept { return registered_.size(); }
  std::optional<std::size_t> max_connections() const noexcept { return max_connections_; }
  bool on_dedicated_host() const noexcept { return on_dedicated_host_; }
  std::uint64_t rejections() const noexcept { return rejections_; }

 private:
  std::optional<std::size_t> max_connections_;
  bool on_dedicated_host_ = true;
  std::unordered_set<StartdId> registered_;
  std::uint64_t rejections_ = 0;
};

/// Index of the collector that should serve a query: 0 is the top
/// collector, 1..secondaries are the secondaries. Low-priority queries
/// rotate over secondaries when redirection is on.
inline std::size_t route_query(std::size_t secondaries, QueryKind q, bool redirection_enabled,
                               std::size_t& round_robin) {
  if (q.priority == QueryPriority::High || secondaries == 0 || !redirection_enabled) {
    return 0;
  }
  const std::size_t pick = 1 + (round_robin % secondaries);
  ++round_robin;
  return pick;
}

struct NegotiatorParams {
  int threads = 1;
  Micros match_cost_per_candidate{1000};
  SimTime cycle_delay = seconds(60);
};

/// Matchmaking component of a cycle: ceil(candidates * cost / threads), in ms.
inline SimTime match_duration(std::uint64_t candidates, Micros cost_per_candidate, int threads) {
  if (threads < 1) {
    throw InvalidParameter("negotiator threads must be >= 1");
  }
  const auto total_us = static_cast<std::int64_t>(candidates) * cost_per_candidate.value;
  const std::int64_t per_thread_us = (total_us + threads - 1) / threads;
  return ceil_to_ms(per_thread_us);
}

struct MatchReport {
  std::vector<std::pair<JobId, SlotId>> matches;
  std::uint64_t candidates_scanned = 0;
  SimTime query_time;
  SimTime match_time;
  std::uint64_t claims_ok = 0;
  std::uint64_t claims_stale = 0;   // slot was not truly Unclaimed
  std::uint64_t claims_other = 0;   // job gone, schedd full, startd unregistered

  SimTime duration() const { return query_time + match_time; }
};

/// Slots the negotiator may hand out: viewed Unclaimed and owned by a
/// CCB-registered startd. Grouped by shape so a job can find the lowest-id
/// fitting slot without scanning slots that are too small.
class CandidatePool {
 public:
  struct Shape {
    int cores;
    std::int64_t memory_mb;
    auto operator<=>(const Shape&) const = default;
  };

  void insert(SlotId id, Shape shape) { buckets_[shape].insert(id.value); }
  void erase(SlotId id, Shape shape) {
    auto it = buckets_.find(shape);
    if (it == buckets_.end()) {
      return;
    }
    it->second.erase(id.value);
  }
  bool contains(SlotId id, Shape shape) const {
    auto it = buckets_.find(shape);
    return it != buckets_.end() && it->second.contains(id.value);
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& [_, b] : buckets_) n += b.size();
    return n;
  }
  bool empty() const { return size() == 0; }

  /// Removes and returns the lowest-id slot able to host the request.
  std::optional<std::pair<SlotId, Shape>> take_lowest_fitting(int cores, std::int64_t memory_mb) {
    std::optional<std::pair<std::uint32_t, Shape>> best;
    for (auto& [shape, ids] : buckets_) {
      if (ids.empty() || shape.cores < cores || shape.memory_mb < memory_mb) {
        continue;
      }
      const std::uint32_t first = *ids.begin();
      if (!best || first < best->first) {
        best = {first, shape};
      }
    }
    if (!best) {
      return std::nullopt;
    }
    buckets_[best->second].erase(best->first);
    return std::pair{SlotId{best->first}, best->second};
  }

 private:
  std::map<Shape, std::set<std::uint32_t>> buckets_;
};

/// One schedd's contribution to a negotiation cycle.
struct JobSource {
  ScheddId schedd;
  std::int64_t headroom = 0;  // schedd capacity minus running jobs
  // Next idle job to consider, or nullopt when the queue is exhausted.
  std::function<std::optional<const Job*>()> next;
};

/// Round-robin over schedds, FIFO within each, every scanned job paired
/// with the lowest-id fitting candidate. Matched slots are removed from
/// `pool`; the caller decides whether to put them back.
inline void match_jobs(std::vector<JobSource>& sources, CandidatePool& pool, MatchReport& report) {
  std::vector<bool> active(sources.size(), true);
  std::size_t remaining = sources.size();
  while (remaining > 0 && !pool.empty()) {
    for (std::size_t i = 0; i < sources.size() && !pool.empty(); ++i) {
      if (!active[i]) {
        continue;
      }
      JobSource& src = sources[i];
      std::optional<const Job*> j = src.headroom > 0 ? src.next() : std::nullopt;
      if (!j) {
        active[i] = false;
        --remaining;
        continue;
      }
      ++report.candidates_scanned;
      if (auto slot = pool.take_lowest_fitting((*j)->req_cores, (*j)->req_memory_mb)) {
        report.matches.emplace_back((*j)->id, slot->first);
        --src.headroom;
      }
    }
  }
}

}  // namespace simpool
