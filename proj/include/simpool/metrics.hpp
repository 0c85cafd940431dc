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
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "simpool/errors.hpp"
#include "simpool/sim_time.hpp"

namespace simpool {

/// Rounds to the 6 decimal places used in the CSV, so that a written frame
/// parses back to the identical double.
inline double quantize6(double x) { return static_cast<double>(std::llround(x * 1e6)) / 1e6; }

/// Column names that vary with the scenario.
struct SeriesLayout {
  std::vector<std::string> providers;
  std::vector<std::string> secondaries;
  std::vector<std::string> schedds;

  std::vector<std::string> header() const {
    std::vector<std::string> h = {"t_ms", "running_total", "idle_total", "cores_total"};
    for (const auto& p : providers) h.push_back("cores_" + p);
    h.insert(h.end(), {"unclaimed_true", "unclaimed_viewed", "duty_top"});
    for (const auto& s : secondaries) h.push_back("duty_" + s);
    h.insert(h.end(), {"udp_drops", "stale_fail", "ccb_reg", "nego_ms"});
    for (const auto& s : schedds) h.push_back("running_" + s);
    return h;
  }

  bool operator==(const SeriesLayout&) const = default;
};

struct MetricsFrame {
  SimTime at;
  std::int64_t running_total = 0;
  std::int64_t idle_total = 0;
  std::int64_t cores_total = 0;
  std::vector<std::int64_t> cores_by_provider;
  std::int64_t unclaimed_true = 0;
  std::int64_t unclaimed_viewed = 0;
  double duty_top = 0.0;
  std::vector<double> duty_secondary;
  std::int64_t udp_drops = 0;   // since previous frame
  std::int64_t stale_fail = 0;  // since previous frame
  std::int64_t ccb_reg = 0;
  std::int64_t nego_ms = 0;
  std::vector<std::int64_t> running_by_schedd;

  bool operator==(const MetricsFrame&) const = default;
};

inline std::string format_real(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

inline void write_series(std::ostream& out, const SeriesLayout& layout, const std::vector<MetricsFrame>& frames) {
  const auto h = layout.header();
  for (std::size_t i = 0; i < h.size(); ++i) {
    out << (i ? "," : "") << h[i];
  }
  out << '\n';
  for (const MetricsFrame& f : frames) {
    out << f.at.millis << ',' << f.running_total << ',' << f.idle_total << ',' << f.cores_total;
    for (auto c : f.cores_by_provider) out << ',' << c;
    out << ',' << f.unclaimed_true << ',' << f.unclaimed_viewed << ',' << format_real(f.duty_top);
    for (double d : f.duty_secondary) out << ',' << format_real(d);
    out << ',' << f.udp_drops << ',' << f.stale_fail << ',' << f.ccb_reg << ',' << f.nego_ms;
    for (auto r : f.running_by_schedd) out << ',' << r;
    out << '\n';
  }
}

inline void write_series(const std::string& path, const SeriesLayout& layout, const std::vector<MetricsFrame>& frames) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + path + "' for writing");
  }
  write_series(out, layout, frames);
  out.flush();
  if (!out) {
    throw IoError("write to '" + path + "' failed");
  }
}

struct ParsedSeries {
  SeriesLayout layout;
  std::vector<MetricsFrame> frames;
};

/// Inverse of write_series.
inline ParsedSeries read_series(std::istream& in) {
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
  };
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("metrics: missing header");
  }
  const auto head = split(line);
  ParsedSeries ps;
  std::size_t i = 0;
  auto expect = [&](const std::string& name) {
    if (i >= head.size() || head[i] != name) {
      throw ParseError("metrics: expected column '" + name + "' at position " + std::to_string(i));
    }
    ++i;
  };
  auto starts = [](const std::string& s, const std::string& p) { return s.rfind(p, 0) == 0; };
  for (const char* c : {"t_ms", "running_total", "idle_total", "cores_total"}) expect(c);
  while (i < head.size() && starts(head[i], "cores_")) ps.layout.providers.push_back(head[i++].substr(6));
  for (const char* c : {"unclaimed_true", "unclaimed_viewed", "duty_top"}) expect(c);
  while (i < head.size() && starts(head[i], "duty_")) ps.layout.secondaries.push_back(head[i++].substr(5));
  for (const char* c : {"udp_drops", "stale_fail", "ccb_reg", "nego_ms"}) expect(c);
  while (i < head.size() && starts(head[i], "running_")) ps.layout.schedds.push_back(head[i++].substr(8));
  if (i != head.size()) {
    throw ParseError("metrics: unexpected column '" + head[i] + "'");
  }
  const std::size_t ncols = head.size();
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != ncols) {
      throw ParseError("metrics line " + std::to_string(lineno) + ": expected " + std::to_string(ncols) + " cells");
    }
    std::size_t k = 0;
    auto integer = [&]() -> std::int64_t {
      try {
        return std::stoll(cells.at(k++));
      } catch (const std::exception&) {
        throw ParseError("metrics line " + std::to_string(lineno) + ": bad integer");
      }
    };
    auto real = [&]() -> double {
      try {
        return std::stod(cells.at(k++));
      } catch (const std::exception&) {
        throw ParseError("metrics line " + std::to_string(lineno) + ": bad real");
      }
    };
    MetricsFrame f;
    f.at = SimTime{integer()};
    f.running_total = integer();
    f.idle_total = integer();
    f.cores_total = integer();
    for (std::size_t p = 0; p < ps.layout.providers.size(); ++p) f.cores_by_provider.push_back(integer());
    f.unclaimed_true = integer();
    f.unclaimed_viewed = integer();
    f.duty_top = real();
    for (std::size_t s = 0; s < ps.layout.secondaries.size(); ++s) f.duty_secondary.push_back(real());
    f.udp_drops = integer();
    f.stale_fail = integer();
    f.ccb_reg = integer();
    f.nego_ms = integer();
    for (std::size_t s = 0; s < ps.layout.schedds.size(); ++s) f.running_by_schedd.push_back(integer());
    ps.frames.push_back(std::move(f));
  }
  return ps;
}

struct Plateau {
  double value = 0.0;
  SimTime start;
  std::size_t samples = 0;
};

using Series = std::vector<std::pair<SimTime, double>>;

/// Longest run reaching the end of the series, at least `window` samples
/// long, whose spread (max - min) is within tolerance x |mean|.
inline std::optional<Plateau> detect_plateau(const Series& series, std::size_t window, double tolerance) {
  if (window < 2) {
    throw InvalidParameter("plateau window must be >= 2");
  }
  if (!(tolerance > 0.0)) {
    throw InvalidParameter("plateau tolerance must be > 0");
  }
  if (series.size() < window) {
    return std::nullopt;
  }
  double lo = series.back().second;
  double hi = lo;
  double sum = 0.0;
  std::optional<Plateau> best;
  for (std::size_t n = 1; n <= series.size(); ++n) {
    const double v = series[series.size() - n].second;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    sum += v;
    const double mean = sum / static_cast<double>(n);
    if (n >= window && hi - lo <= tolerance * std::abs(mean)) {
      best = Plateau{mean, series[series.size() - n].first, n};
    }
  }
  return best;
}

struct SeriesStats {
  std::optional<Plateau> plateau;
  double peak = 0.0;
  double mean = 0.0;
  double last = 0.0;
};

struct SummaryStats {
  std::map<std::string, SeriesStats> series;
};

inline SeriesStats summarize_series(const Series& s, std::size_t window, double tolerance) {
  SeriesStats st;
  if (s.empty()) {
    return st;
  }
  double sum = 0.0;
  st.peak = s.front().second;
  for (const auto& [_, v] : s) {
    st.peak = std::max(st.peak, v);
    sum += v;
  }
  st.mean = sum / static_cast<double>(s.size());
  st.last = s.back().second;
  st.plateau = detect_plateau(s, window, tolerance);
  return st;
}

/// Extracts one named column (as written in the CSV header) from frames.
inline Series extract_series(const SeriesLayout& layout, const std::vector<MetricsFrame>& frames,
                             const std::string& column) {
  auto index_of = [](const std::vector<std::string>& v, const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(v.begin(), v.end(), name);
    if (it == v.end()) return std::nullopt;
    return static_cast<std::size_t>(it - v.begin());
  };
  auto starts = [](const std::string& s, const std::string& p) { return s.rfind(p, 0) == 0; };
  Series out;
  out.reserve(frames.size());
  auto push = [&](auto get) {
    for (const auto& f : frames) out.emplace_back(f.at, static_cast<double>(get(f)));
  };
  if (column == "running_total") push([](const MetricsFrame& f) { return f.running_total; });
  else if (column == "idle_total") push([](const MetricsFrame& f) { return f.idle_total; });
  else if (column == "cores_total") push([](const MetricsFrame& f) { return f.cores_total; });
  else if (column == "unclaimed_true") push([](const MetricsFrame& f) { return f.unclaimed_true; });
  else if (column == "unclaimed_viewed") push([](const MetricsFrame& f) { return f.unclaimed_viewed; });
  else if (column == "duty_top") push([](const MetricsFrame& f) { return f.duty_top; });
  else if (column == "udp_drops") push([](const MetricsFrame& f) { return f.udp_drops; });
  else if (column == "stale_fail") push([](const MetricsFrame& f) { return f.stale_fail; });
  else if (column == "ccb_reg") push([](const MetricsFrame& f) { return f.ccb_reg; });
  else if (column == "nego_ms") push([](const MetricsFrame& f) { return f.nego_ms; });
  else if (starts(column, "cores_")) {
    auto i = index_of(layout.providers, column.substr(6));
    if (!i) throw InvalidParameter("unknown series '" + column + "'");
    push([&](const MetricsFrame& f) { return f.cores_by_provider[*i]; });
  } else if (starts(column, "duty_")) {
    auto i = index_of(layout.secondaries, column.substr(5));
    if (!i) throw InvalidParameter("unknown series '" + column + "'");
    push([&](const MetricsFrame& f) { return f.duty_secondary[*i]; });
  } else if (starts(column, "running_")) {
    auto i = index_of(layout.schedds, column.substr(8));
    if (!i) throw InvalidParameter("unknown series '" + column + "'");
    push([&](const MetricsFrame& f) { return f.running_by_schedd[*i]; });
  } else {
    throw InvalidParameter("unknown series '" + column + "'");
  }
  return out;
}

/// Every column except t_ms and the per-schedd breakdown.
inline std::vector<std::string> tracked_columns(const SeriesLayout& layout) {
  std::vector<std::string> cols = {"running_total", "idle_total", "cores_total"};
  for (const auto& p : layout.providers) cols.push_back("cores_" + p);
  cols.insert(cols.end(), {"unclaimed_true", "unclaimed_viewed", "duty_top"});
  for (const auto& s : layout.secondaries) cols.push_back("duty_" + s);
  cols.insert(cols.end(), {"udp_drops", "stale_fail", "ccb_reg", "nego_ms"});
  return cols;
}

inline SummaryStats summarize(const SeriesLayout& layout, const std::vector<MetricsFrame>& frames,
                              std::size_t plateau_window, double plateau_tolerance) {
  SummaryStats out;
  for (const auto& col : tracked_columns(layout)) {
    out.series[col] = summarize_series(extract_series(layout, frames, col), plateau_window, plateau_tolerance);
  }
  return out;
}

}  // namespace simpool
