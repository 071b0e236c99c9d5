// Copyright 2026 The twinmod Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "twinmod/config.hpp"
#include "twinmod/errors.hpp"
#include "twinmod/scenarios.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace sc = twinmod::scenarios;

namespace {

enum Exit { kOk = 0, kUsage = 1, kStatistical = 2, kIo = 3 };

struct Options {
  std::string config;
  std::string scenario;
  std::string out;
  std::string traces;
  std::optional<std::uint64_t> seed;
  int workers = 0;
};

sc::ScenarioConfig resolve(const Options& o) {
  sc::ScenarioConfig c;
  if (!o.config.empty()) {
    c = sc::load_config(o.config);
    if (!o.scenario.empty() && sc::scenario_from_string(o.scenario) != c.scenario)
      throw twinmod::ConfigError("--scenario " + o.scenario + " does not match the config's scenario");
  } else if (!o.scenario.empty()) {
    c = sc::default_config(sc::scenario_from_string(o.scenario));
  } else {
    throw twinmod::ConfigError("give --config or --scenario");
  }
  if (o.seed) c.trace.seed = *o.seed;
  if (!o.out.empty()) c.outputs = o.out;
  c.validate();
  return c;
}

int report(const sc::RunResult& r) {
  for (const auto& ch : r.checks)
    std::printf("%s %s: %s\n", ch.passed ? "PASS" : "FAIL", ch.name.c_str(), ch.detail.c_str());
  for (const auto& f : r.files) std::printf("wrote %s\n", f.string().c_str());
  return r.passed() ? kOk : kStatistical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"twinmod: twin-beam squeezing with phase modulators, exact and Monte-Carlo pipelines"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub, bool needs_run_flags) {
    sub->add_option("--config", o.config, "Scenario config (JSON)");
    sub->add_option("--scenario", o.scenario, "Scenario id; uses built-in defaults when no config is given");
    if (needs_run_flags) {
      sub->add_option("--seed", o.seed, "Override trace.seed");
      sub->add_option("--out", o.out, "Override the output directory");
      sub->add_option("--workers", o.workers, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    }
  };
  auto* run = app.add_subcommand("run", "Run a scenario and write its output bundle");
  add_common(run, true);
  auto* validate = app.add_subcommand("validate", "Check a config and compare the two pipelines on its grid");
  add_common(validate, true);
  auto* shot = app.add_subcommand("shot-calibrate", "Compute the shot-noise reference spectrum");
  add_common(shot, true);
  auto* exp = app.add_subcommand("export-traces", "Write synthesized quadrature and photocurrent traces");
  add_common(exp, true);
  auto* analyze = app.add_subcommand("analyze", "Spectrum of a stored photocurrent trace");
  add_common(analyze, true);
  analyze->add_option("--traces", o.traces, "Photocurrent trace file (binary with .json sidecar)")->required();
  auto* print = app.add_subcommand("print-config", "Print the normalized config with all defaults");
  add_common(print, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    const sc::ScenarioConfig c = resolve(o);
    if (print->parsed()) {
      std::cout << sc::to_json(c).dump(2) << "\n";
      std::cerr << "config_hash " << sc::config_hash(c) << "\n";
      return kOk;
    }
    if (run->parsed()) return report(sc::run_scenario(c, o.workers));
    if (validate->parsed()) return report(sc::validate_config(c, o.workers));
    if (shot->parsed()) return report(sc::shot_calibrate(c, o.workers));
    if (exp->parsed()) return report(sc::export_traces(c, o.workers));
    if (analyze->parsed()) return report(sc::analyze_traces(c, o.traces, o.workers));
  } catch (const twinmod::IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kIo;
  } catch (const twinmod::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kUsage;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kStatistical;
  }
  return kUsage;
}
