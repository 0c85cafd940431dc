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
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "simpool/errors.hpp"
#include "simpool/pool_model.hpp"
#include "simpool/random.hpp"
#include "simpool/sim_time.hpp"

namespace simpool {

struct Distribution {
  enum class Kind : std::uint8_t { Fixed, Exponential, Uniform, Choice };

  Kind kind = Kind::Fixed;
  double a = 0.0;  // value, mean or lower bound
  double b = 0.0;  // upper bound
  std::vector<double> values;
  std::vector<double> weights;

  static Distribution fixed(double v) { return {Kind::Fixed, v, 0.0, {}, {}}; }
  static Distribution exponential(double mean) { return {Kind::Exponential, mean, 0.0, {}, {}}; }
  static Distribution uniform(double lo, double hi) { return {Kind::Uniform, lo, hi, {}, {}}; }
  static Distribution choice(std::vector<double> v, std::vector<double> w) {
    return {Kind::Choice, 0.0, 0.0, std::move(v), std::move(w)};
  }

  void validate() const {
    switch (kind) {
      case Kind::Fixed:
        break;
      case Kind::Exponential:
        if (!(a > 0.0)) throw InvalidParameter("exponential mean must be > 0");
        break;
      case Kind::Uniform:
        if (b < a) throw InvalidParameter("uniform requires min <= max");
        break;
      case Kind::Choice:
        if (values.empty() || values.size() != weights.size()) {
          throw InvalidParameter("choice requires matching non-empty values and weights");
        }
        for (double w : weights) {
          if (!(w >= 0.0)) throw InvalidParameter("choice weights must be >= 0");
        }
        if (!(std::accumulate(weights.begin(), weights.end(), 0.0) > 0.0)) {
          throw InvalidParameter("choice weights must not all be zero");
        }
        break;
    }
  }

  double mean() const {
    switch (kind) {
      case Kind::Fixed: return a;
      case Kind::Exponential: return a;
      case Kind::Uniform: return 0.5 * (a + b);
      case Kind::Choice: {
        const double tw = std::accumulate(weights.begin(), weights.end(), 0.0);
        double m = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) m += values[i] * weights[i] / tw;
        return m;
      }
    }
    return a;
  }

  double sample(RandomStream& rng) const {
    switch (kind) {
      case Kind::Fixed: return a;
      case Kind::Exponential: return rng.exponential(a);
      case Kind::Uniform: return rng.uniform(a, b);
      case Kind::Choice: {
        const double tw = std::accumulate(weights.begin(), weights.end(), 0.0);
        double u = rng.uniform01() * tw;
        for (std::size_t i = 0; i < values.size(); ++i) {
          if (u < weights[i]) return values[i];
          u -= weights[i];
        }
        return values.back();
      }
    }
    return a;
  }
};

enum class StreamLabel : std::uint8_t { Production, Analysis, Tier0 };

enum class ArrivalMode : std::uint8_t { Backlog, Rate };
enum class RateProcess : std::uint8_t { Constant, Poisson };

struct JobShape {
  int cores = 1;
  std::int64_t memory_mb = 0;
  SimTime duration{1};
};

struct WorkloadSpec {
  std::string id;
  StreamLabel label = StreamLabel::Production;
  std::vector<ScheddId> targets;
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

/// A stream's random sources, one per sampled quantity.
class WorkloadStream {
 public:
  WorkloadStream(WorkloadSpec spec, std::uint64_t seed)
      : spec_(std::move(spec)),
        cores_rng_(seed, "workload/" + spec_.id + "/cores"),
        memory_rng_(seed, "workload/" + spec_.id + "/memory"),
        duration_rng_(seed, "workload/" + spec_.id + "/duration"),
        arrival_rng_(seed, "workload/" + spec_.id + "/arrivals") {
    if (spec_.targets.empty()) {
      throw ConfigError("workload stream '" + spec_.id + "' has no target schedds");
    }
    spec_.cores.validate();
    spec_.memory_mb.validate();
    spec_.duration_ms.validate();
    if (spec_.mode == ArrivalMode::Rate && !(spec_.rate_per_s > 0.0)) {
      throw ConfigError("workload stream '" + spec_.id + "' needs rate_per_s > 0");
    }
  }

  const WorkloadSpec& spec() const noexcept { return spec_; }

  JobShape sample_job() {
    JobShape s;
    s.cores = static_cast<int>(std::max<long long>(1, std::llround(spec_.cores.sample(cores_rng_))));
    s.memory_mb = std::max<long long>(0, std::llround(spec_.memory_mb.sample(memory_rng_)));
    s.duration = SimTime{std::max<long long>(1, std::llround(spec_.duration_ms.sample(duration_rng_)))};
    return s;
  }

  /// Round-robin target for the next submission.
  ScheddId next_target() {
    const ScheddId t = spec_.targets[rr_ % spec_.targets.size()];
    ++rr_;
    return t;
  }

  /// Arrival time of the n-th job (n >= 1) of a constant-rate stream.
  SimTime constant_arrival(std::uint64_t n) const {
    return spec_.start + SimTime{static_cast<std::int64_t>(std::floor(static_cast<double>(n) * 1000.0 / spec_.rate_per_s))};
  }

  SimTime poisson_gap() {
    return SimTime{std::max<long long>(1, std::llround(arrival_rng_.exponential(1000.0 / spec_.rate_per_s)))};
  }

  std::uint64_t arrivals_so_far = 0;

 private:
  WorkloadSpec spec_;
  RandomStream cores_rng_;
  RandomStream memory_rng_;
  RandomStream duration_rng_;
  RandomStream arrival_rng_;
  std::size_t rr_ = 0;
};

}  // namespace simpool
