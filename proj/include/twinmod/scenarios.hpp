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

#include "twinmod/config.hpp"
#include "twinmod/dsp.hpp"
#include "twinmod/gaussian_core.hpp"
#include "twinmod/timeseries.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace twinmod::scenarios {

/// Physics of one sweep point.
struct Physics {
  analytic::SourceSpec src;
  std::vector<eom::EomSpec> eoms;
  std::string label;
};

/// Probe template at index m_p and drive phase 0, conjugate template at m_c
/// and drive phase phi (radians). Zero index disables a modulator.
Physics pair_physics(const ScenarioConfig& c, const analytic::SourceSpec& src, double m_p, double m_c,
                     double phi);
/// Both templates at their own index with the conjugate drive at phi, placed
/// according to mode.
Physics placement_physics(const ScenarioConfig& c, PlacementMode mode, double phi);

/// Closed-form joint noise for a point with at most one modulator per beam.
double analytic_noise(const Physics& p);

/// Gaussian pipeline: source squeezer, sideband couplers, loss. Couplers and
/// source states are memoized; safe to call from several threads.
class ExactPipeline {
 public:
  ExactPipeline(gaussian::ModeGrid grid, double eps);
  gaussian::CovMatrix state(const Physics& p);
  const gaussian::ModeGrid& grid() const { return grid_; }

 private:
  const gaussian::CovMatrix& source_state(double gain);
  const gaussian::SymplecticOp& coupler(const eom::EomSpec& spec);

  gaussian::ModeGrid grid_;
  double eps_;
  std::mutex mu_;
  std::map<double, gaussian::CovMatrix> sources_;
  std::map<std::string, gaussian::SymplecticOp> couplers_;
};

/// Per-bin variances of the joint current's cosine and sine amplitudes.
struct BinPair {
  Eigen::VectorXd cos;
  Eigen::VectorXd sin;
};

BinPair exact_bin_variances(const gaussian::CovMatrix& c, double theta_p, double theta_c,
                            analytic::Branch branch);
/// X_p (rows) against P_c (columns) over the in-band bins.
Eigen::MatrixXd exact_cov_block(const gaussian::CovMatrix& c, dsp::CovComponent component);
std::vector<std::string> bin_labels(const gaussian::ModeGrid& g, gaussian::Quadrature q, gaussian::Beam b,
                                    gaussian::Component comp);

/// Independent seed for sweep point k.
std::uint64_t point_seed(std::uint64_t base, std::uint64_t k);

timeseries::QuadratureTraces simulate(const Physics& p, const timeseries::TraceConfig& trace, std::uint64_t seed,
                                      int workers = 1);

struct Estimate {
  double value = 0.0;
  double std_err = 0.0;
};

/// Per-sample variance of the joint current, in shot-noise units.
Estimate time_averaged_noise(const timeseries::Photocurrent& i, analytic::Branch branch);

/// Two-sample z of raw spectra, bin by bin.
std::vector<double> two_sample_z(const dsp::Spectrum& a, const dsp::Spectrum& b);

/// Vacuum settings used for the shot reference of a config.
timeseries::TraceConfig shot_trace(const ScenarioConfig& c);
/// Shot-normalized joint X-difference spectrum at the in-band grid frequencies.
dsp::Spectrum mc_spectrum(const Physics& p, const ScenarioConfig& c, std::uint64_t seed,
                          dsp::ShotReferenceCache& shots, int workers = 1);

/// Cross-covariance of the (X_p, P_c)-locked photocurrents of a trace set.
dsp::CovBlockEstimate mc_cov_block(const timeseries::QuadratureTraces& q, const ScenarioConfig& c,
                                   dsp::CovComponent component);

struct Tolerances {
  double z_max = 5.0;
  double analytic_rel = 1e-6;
};

struct StatRecord {
  std::string kind;  // xx_diff_cos, xx_diff_sin, pp_sum_cos, pp_sum_sin, xp_cs, eq1
  int bin_j = 0;
  int bin_k = 0;
  double mc = 0.0;
  double exact = 0.0;
  double std_err = 0.0;
  double z = 0.0;
};

struct PointReport {
  std::string label;
  double gain = 0.0, eta = 0.0, m_p = 0.0, m_c = 0.0, phi_deg = 0.0;
  double analytic = 0.0;
  Estimate eq1_mc;
  double eq1_z = 0.0;
  /// Largest relative gap between the Gaussian bin average and the closed form.
  double exact_rel_err = 0.0;
  double max_abs_z = 0.0;
  std::string worst;
  bool passed = false;
  std::vector<StatRecord> stats;
};

struct PipelineReport {
  std::vector<PointReport> points;
  double max_abs_z = 0.0;
  bool passed = false;
};

/// Hook applied to the synthesized traces before detection; test fixtures use
/// it to break the pipeline on purpose.
using TraceTamper = std::function<void(timeseries::QuadratureTraces&)>;

/// Runs both pipelines over gains x etas x index_pairs x phases of the config.
PipelineReport compare_pipelines(const ScenarioConfig& c, const Tolerances& tol = {}, int workers = 1,
                                 const TraceTamper& tamper = {});

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct RunResult {
  std::vector<Check> checks;
  std::vector<std::filesystem::path> files;
  bool passed() const;
};

/// Runs the scenario and writes its CSV/JSON bundle plus summary.txt and
/// summary.json under c.outputs. Throws IoError when outputs cannot be written.
RunResult run_scenario(const ScenarioConfig& c, int workers = 1);

/// Shot reference run alone; writes shot_reference.csv under c.outputs.
RunResult shot_calibrate(const ScenarioConfig& c, int workers = 1);

/// Quadrature and photocurrent traces of the configured modulator templates.
RunResult export_traces(const ScenarioConfig& c, int workers = 1);

/// Spectrum of a stored photocurrent trace normalized by the config's shot reference.
RunResult analyze_traces(const ScenarioConfig& c, const std::filesystem::path& trace, int workers = 1);

/// Compare_pipelines with its report written to c.outputs.
RunResult validate_config(const ScenarioConfig& c, int workers = 1);

inline constexpr const char* kVersion = "1.0.0";

}  // namespace twinmod::scenarios
