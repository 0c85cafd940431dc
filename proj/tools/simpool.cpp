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

// Command-line front end: run, validate, scenario, sweep, plot.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "simpool.hpp"

namespace {

namespace fs = std::filesystem;
using namespace simpool;

enum Exit : int { kOk = 0, kValidation = 1, kIo = 2, kAssertion = 3 };

json load_document(const fs::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
}

fs::path base_dir_of(const fs::path& p) { return p.has_parent_path() ? p.parent_path() : fs::path("."); }

int report(const RunResult& r, const fs::path& out) {
  for (const auto& e : r.expectations) {
    std::cout << (e.ok ? "ok    " : "FAIL  ") << describe(e) << "\n";
  }
  for (const auto& v : r.violations) {
    if (v.rfind("invariant: ", 0) == 0) std::cout << "FAIL  " << v << "\n";
  }
  std::cout << "output written to " << out.string() << "\n";
  if (!r.ok()) {
    std::cerr << "simpool: " << r.violations.size() << " assertion(s) failed\n";
    return kAssertion;
  }
  return kOk;
}

std::string gnuplot_script(const fs::path& csv, const ParsedSeries& ps) {
  std::ostringstream os;
  const auto header = ps.layout.header();
  auto col = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i + 1;
    }
    return std::size_t{0};
  };
  os << "# gnuplot script for " << csv.string() << "\n"
     << "set datafile separator ','\n"
     << "set key autotitle columnhead outside\n"
     << "set xlabel 'time [h]'\n"
     << "set ylabel 'jobs / cores'\n"
     << "set y2label 'collector duty cycle'\n"
     << "set y2range [0:1.05]\n"
     << "set ytics nomirror\n"
     << "set y2tics\n"
     << "set grid\n"
     << "plot '" << csv.string() << "' using ($1/3600000.0):" << col("running_total") << " with lines lw 2, \\\n"
     << "     '' using ($1/3600000.0):" << col("cores_total") << " with lines";
  for (const auto& p : ps.layout.providers) {
    os << ", \\\n     '' using ($1/3600000.0):" << col("cores_" + p) << " with lines";
  }
  os << ", \\\n     '' using ($1/3600000.0):" << col("duty_top") << " axes x1y2 with lines dt 2\n";
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simpool: discrete-event simulator of a federated pilot-based submission infrastructure"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> until;
  auto* run = app.add_subcommand("run", "Run a scenario config to its horizon");
  run->add_option("config", config_path, "Scenario JSON file")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--seed", seed, "Override the seed");
  run->add_option("--until", until, "Override the horizon (ms)");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a scenario config and print its resolved form");
  validate->add_option("config", validate_path, "Scenario JSON file")->required();
  bool quiet = false;
  validate->add_flag("-q,--quiet", quiet, "Only report errors");

  std::string scenario_name;
  std::string scenario_out;
  auto* scenario = app.add_subcommand("scenario", "Run a scenario from the built-in library");
  scenario->add_option("name", scenario_name, "Library entry (see --list)");
  scenario->add_option("--out", scenario_out, "Output directory");
  bool list = false;
  scenario->add_flag("--list", list, "List library entries");

  std::string sweep_config;
  std::string sweep_param;
  std::string sweep_values;
  std::string sweep_out;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run one simulation per value of a numeric parameter");
  sweep_cmd->add_option("config", sweep_config, "Scenario JSON file")->required();
  sweep_cmd->add_option("--param", sweep_param, "JSON pointer into the resolved config, e.g. /providers/0/pledged_cores")
      ->required();
  sweep_cmd->add_option("--values", sweep_values, "Comma-separated values")->required();
  sweep_cmd->add_option("--out", sweep_out, "Output directory")->required();

  std::string plot_csv;
  std::string plot_out;
  auto* plot = app.add_subcommand("plot", "Emit a gnuplot script for a metrics.csv");
  plot->add_option("metrics", plot_csv, "metrics.csv written by run/scenario")->required();
  plot->add_option("-o,--output", plot_out, "Write the script here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      json doc = load_document(config_path);
      if (doc.is_object()) {
        if (seed) doc["seed"] = *seed;
        if (until) doc["horizon_ms"] = *until;
      }
      const ScenarioConfig cfg = parse_config(doc, base_dir_of(config_path));
      return report(run_scenario(cfg, out_dir), out_dir);
    }
    if (*validate) {
      const ScenarioConfig cfg = parse_config(load_document(validate_path), base_dir_of(validate_path));
      if (!quiet) std::cout << to_json(cfg).dump(2) << "\n";
      return kOk;
    }
    if (*scenario) {
      if (list) {
        for (const auto& e : scenario_library()) {
          std::cout << e.name << "\n    " << e.description << "\n";
          for (const auto& [vid, _] : e.variants) std::cout << "    variant: " << vid << "\n";
        }
        return kOk;
      }
      if (scenario_name.empty() || scenario_out.empty()) {
        std::cerr << "simpool scenario: a library name and --out are required\n";
        return kValidation;
      }
      const auto entry = find_scenario(scenario_name);
      if (!entry) {
        std::cerr << "simpool: unknown scenario '" << scenario_name << "' (try --list)\n";
        return kValidation;
      }
      if (entry->variants.empty()) {
        return report(run_scenario(entry->config(), scenario_out), scenario_out);
      }
      int status = kOk;
      for (const auto& [vid, _] : entry->variants) {
        std::cout << "== " << vid << "\n";
        const int s = report(run_scenario(entry->variant(vid), fs::path(scenario_out) / vid), fs::path(scenario_out) / vid);
        if (s != kOk) status = s;
      }
      return status;
    }
    if (*sweep_cmd) {
      const ScenarioConfig cfg = parse_config(load_document(sweep_config), base_dir_of(sweep_config));
      const auto points = sweep(cfg, sweep_param, split_values(sweep_values), sweep_out);
      int status = kOk;
      for (const auto& p : points) {
        std::cout << p.dir.string() << ": " << (p.result.ok() ? "ok" : "assertions failed") << "\n";
        if (!p.result.ok()) status = kAssertion;
      }
      std::cout << "summary: " << (fs::path(sweep_out) / "sweep-summary.csv").string() << "\n";
      return status;
    }
    if (*plot) {
      std::ifstream in(plot_csv, std::ios::binary);
      if (!in) throw IoError("cannot open '" + plot_csv + "'");
      const ParsedSeries ps = read_series(in);
      const std::string script = gnuplot_script(plot_csv, ps);
      if (plot_out.empty()) {
        std::cout << script;
      } else {
        std::ofstream out(plot_out, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + plot_out + "' for writing");
        out << script;
      }
      return kOk;
    }
  } catch (const ValidationError& e) {
    std::cerr << "simpool: invalid config at " << e.path() << ": " << e.reason() << "\n";
    return kValidation;
  } catch (const ParseError& e) {
    std::cerr << "simpool: " << e.what() << "\n";
    return kValidation;
  } catch (const ConfigError& e) {
    std::cerr << "simpool: " << e.what() << "\n";
    return kValidation;
  } catch (const IoError& e) {
    std::cerr << "simpool: " << e.what() << "\n";
    return kIo;
  } catch (const AssertionFailure& e) {
    std::cerr << "simpool: " << e.what() << "\n";
    return kAssertion;
  } catch (const Error& e) {
    // Parameter combinations the validator let through but the model rejects.
    std::cerr << "simpool: " << e.what() << "\n";
    return kValidation;
  }
  return kOk;
}
