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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <queue>
#include <string>
#include <vector>

#include "simpool/errors.hpp"
#include "simpool/random.hpp"
#include "simpool/sim_time.hpp"

namespace simpool {

template <class Kind>
struct EventRecord {
  SimTime fire_at;
  std::uint64_t seq = 0;
  Kind kind{};
  std::uint64_t target = 0;
};

/// Single-threaded discrete-event loop.
///
/// Events fire in (fire_at, seq) order; seq is a global insertion counter, so
/// equal-time events fire in the order they were scheduled. The kernel keeps
/// a running digest of every processed (fire_at, seq, kind, target) tuple,
/// which makes trace equality between two runs cheap to check.
template <class Kind>
class Kernel {
 public:
  using Record = EventRecord<Kind>;

  SimTime now() const noexcept { return clock_; }
  std::size_t pending() const noexcept { return queue_.size(); }
  std::uint64_t processed_total() const noexcept { return processed_; }
  std::uint64_t trace_digest() const noexcept { return digest_; }

  /// Queues an event and returns the sequence number it was given.
  std::uint64_t schedule(SimTime fire_at, Kind kind, std::uint64_t target = 0) {
    if (fire_at < clock_) {
      throw SchedulingInPast("event at " + std::to_string(fire_at.millis) + " ms scheduled when clock is " +
                             std::to_string(clock_.millis) + " ms");
    }
    const std::uint64_t seq = next_seq_++;
    queue_.push(Record{fire_at, seq, kind, target});
    return seq;
  }

  /// Processes every event with fire_at <= horizon, then advances the clock
  /// to the horizon. The handler may schedule further events.
  template <class Handler>
  std::size_t run_until(SimTime horizon, Handler&& handler) {
    if (horizon < clock_) {
      throw SchedulingInPast("run_until horizon is before the current clock");
    }
    std::size_t count = 0;
    while (!queue_.empty() && queue_.top().fire_at <= horizon) {
      const Record ev = queue_.top();
      queue_.pop();
      clock_ = ev.fire_at;
      mix(ev);
      ++processed_;
      ++count;
      handler(ev);
    }
    clock_ = horizon;
    return count;
  }

 private:
  struct Later {
    bool operator()(const Record& a, const Record& b) const {
      if (a.fire_at != b.fire_at) {
        return a.fire_at > b.fire_at;
      }
      return a.seq > b.seq;
    }
  };

  void mix(const Record& ev) {
    const std::uint64_t parts[4] = {static_cast<std::uint64_t>(ev.fire_at.millis), ev.seq,
                                    static_cast<std::uint64_t>(std::hash<Kind>{}(ev.kind)), ev.target};
    for (std::uint64_t p : parts) {
      digest_ = detail::splitmix64(digest_ ^ p);
    }
  }

  SimTime clock_{};
  std::uint64_t next_seq_ = 0;
  std::uint64_t processed_ = 0;
  std::uint64_t digest_ = 0;
  std::priority_queue<Record, std::vector<Record>, Later> queue_;
};

}  // namespace simpool
