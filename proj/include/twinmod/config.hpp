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

#pragma once

#include "twinmod/analytic.hpp"
#include "twinmod/dsp.hpp"
#include "twinmod/eom_model.hpp"
#include "twinmod/gaussian_core.hpp"
#include "twinmod/timeseries.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace twinmod::scenarios {

enum class ScenarioId {
  fig2_sweep,
  fig3a_single_eom,
  fig3b_relative_phase,
  fig4_covariance,
  analytic_table,
  validate_pipelines,
};

/// Where the two modulators sit: both in the beams, both in the local
/// oscillators, or probe in its beam and conjugate in its local oscillator.
enum class PlacementMode { beam, local_oscillator, mixed };

const char* to_string(ScenarioId id);
const char* to_string(PlacementMode p);
/// Throws ConfigError for unknown names.
ScenarioId scenario_from_string(const std::string& s);

struct ThetaGrid {
  double min = -3.141592653589793;
  double max = 3.141592653589793;
  int points = 73;

  std::vector<double> values() const;
  bool operator==(const ThetaGrid&) const = default;
};

struct SweepParams {
  std::vector<double> phases_deg;
  /// Single-modulator indices (fig3a).
  std::vector<double> indices;
  /// (m_p, m_c) pairs for the closed-form grid and the pipeline comparison.
  std::vector<std::pair<double, double>> index_pairs;
  ThetaGrid theta;
  std::vector<PlacementMode> placements;
  std::vector<double> etas;
  std::vector<double> gains;

  bool operator==(const SweepParams&) const = default;
};

/// Everything a run needs. All values are explicit; a stored config copy
/// reproduces the run bit for bit.
struct ScenarioConfig {
  ScenarioId scenario = ScenarioId::validate_pipelines;
  analytic::SourceSpec src;
  /// Modulator templates: one probe and one conjugate entry. Sweeps override
  /// m, phi and placement per point; f_drive and enabled are taken as given.
  std::vector<eom::EomSpec> eoms;
  /// trace.src is not serialized; it is always copied from src.
  timeseries::TraceConfig trace;
  dsp::SegmentPlan plan;
  dsp::SegmentPlan locked_plan;
  gaussian::ModeGrid grid;
  double eps = 1e-9;
  SweepParams sweep;
  std::string outputs = "out";

  /// Throws ConfigError with the offending field path.
  void validate() const;
  const eom::EomSpec& probe_template() const;
  const eom::EomSpec& conjugate_template() const;
  bool operator==(const ScenarioConfig& o) const;
};

ScenarioConfig default_config(ScenarioId id);

nlohmann::ordered_json to_json(const ScenarioConfig& c);
/// Missing fields take the scenario's defaults; unknown fields are errors.
ScenarioConfig parse_config(const nlohmann::json& j);
ScenarioConfig load_config(const std::filesystem::path& path);

/// FNV-1a 64 of the normalized JSON dump, as 16 hex digits.
std::string config_hash(const ScenarioConfig& c);

}  // namespace twinmod::scenarios
