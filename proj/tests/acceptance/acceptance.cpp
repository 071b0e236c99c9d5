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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "twinmod/analytic.hpp"
#include "twinmod/config.hpp"
#include "twinmod/dsp.hpp"
#include "twinmod/eom_model.hpp"
#include "twinmod/gaussian_core.hpp"
#include "twinmod/scenarios.hpp"
#include "twinmod/timeseries.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace sc = twinmod::scenarios;
namespace gs = twinmod::gaussian;
namespace fs = std::filesystem;
using twinmod::analytic::Branch;
using twinmod::analytic::SourceSpec;
using std::numbers::pi;

namespace {

constexpr double kDeg = pi / 180.0;

struct Outcome {
  bool passed = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("twinmod_acceptance_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// The 24-point grid: eta x (m_p, m_c) x phi at G = sqrt(3).
sc::ScenarioConfig grid_config() {
  auto c = sc::default_config(sc::ScenarioId::validate_pipelines);
  c.src = {std::sqrt(3.0), 0.0};
  c.sweep.gains = {std::sqrt(3.0)};
  c.sweep.etas = {0.0, 0.15};
  c.sweep.index_pairs = {{0.0, 0.0}, {0.1 * pi, 0.0}, {0.1 * pi, 0.1 * pi}, {0.2 * pi, 0.0}};
  c.sweep.phases_deg = {0.0, 120.0, 180.0};
  c.trace.n_samples = 1'000'000;
  return c;
}

Outcome closed_form_vs_monte_carlo() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto c = grid_config();
  const auto rep = sc::compare_pipelines(c);
  const double secs = seconds_since(t0);
  double max_z = 0, rel_prec = 0;
  for (const auto& p : rep.points) {
    max_z = std::max(max_z, std::abs(p.eq1_z));
    rel_prec += p.eq1_mc.std_err / p.eq1_mc.value / static_cast<double>(rep.points.size());
  }
  const bool ok = rep.points.size() == 24 && max_z < 5.0 && secs < 30.0;
  return {ok, std::to_string(rep.points.size()) + " points, max |z| = " + fmt("%.3g", max_z) +
                  ", mean relative stderr " + fmt("%.2g", rel_prec) + ", " + fmt("%.1f", secs) + " s"};
}

Outcome closed_form_vs_gaussian(std::vector<gs::CovMatrix>& states) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto c = grid_config();
  sc::ExactPipeline exact(c.grid, c.eps);
  double worst = 0;
  int n = 0;
  for (double eta : c.sweep.etas)
    for (auto [mp, mc] : c.sweep.index_pairs)
      for (double ph : c.sweep.phases_deg) {
        const SourceSpec src{c.src.gain, eta};
        const double a = twinmod::analytic::joint_noise(src, mp, mc, ph * kDeg);
        states.push_back(exact.state(sc::pair_physics(c, src, mp, mc, ph * kDeg)));
        const auto v = sc::exact_bin_variances(states.back(), 0.0, 0.0, Branch::difference);
        for (int j = 0; j < v.cos.size(); ++j)
          worst = std::max(worst, std::abs(0.5 * (v.cos(j) + v.sin(j)) - a) / a);
        ++n;
      }
  const double secs = seconds_since(t0);
  return {worst < 1e-6 && secs < 5.0, std::to_string(n) + " points x " + std::to_string(c.grid.n_bins) +
                                          " bins, max relative difference " + fmt("%.2g", worst) + ", " +
                                          fmt("%.2f", secs) + " s"};
}

Outcome from_checks(const sc::RunResult& r, const std::vector<std::string>& prefixes) {
  Outcome o{true, ""};
  int found = 0;
  for (const auto& ch : r.checks)
    for (const auto& p : prefixes)
      if (ch.name.rfind(p, 0) == 0) {
        ++found;
        o.passed = o.passed && ch.passed;
        if (!o.detail.empty()) o.detail += "; ";
        o.detail += ch.name + " (" + ch.detail + ")";
      }
  if (found < static_cast<int>(prefixes.size())) {
    o.passed = false;
    o.detail += " [missing checks]";
  }
  return o;
}

Outcome symplectic_and_physical(const std::vector<gs::CovMatrix>& states) {
  const auto c = sc::default_config(sc::ScenarioId::fig4_covariance);
  std::vector<gs::SymplecticOp> ops;
  ops.push_back(gs::source_symplectic(std::sqrt(3.0), c.grid));
  ops.push_back(gs::source_symplectic(5.0, c.grid));
  ops.push_back(gs::quadrature_rotation(0.7, 3, c.grid));
  for (double m : {0.1 * pi, 0.2 * pi, 0.4 * pi})
    for (double phi : {0.0, 2.0 * pi / 3, pi})
      for (auto beam : {gs::Beam::probe, gs::Beam::conjugate})
        for (auto place : {twinmod::eom::Placement::beam, twinmod::eom::Placement::local_oscillator}) {
          twinmod::eom::EomSpec e;
          e.m = m;
          e.phi = phi;
          e.beam = beam;
          e.placement = place;
          ops.push_back(twinmod::eom::sideband_symplectic(e, c.grid, c.eps).op);
        }
  ops.push_back(gs::compose(ops[5], gs::compose(ops[4], ops[0])));
  double defect = 0;
  for (const auto& op : ops) defect = std::max(defect, gs::symplectic_defect(op.matrix));

  double min_eig = INFINITY;
  bool physical = true;
  for (const auto& s : states) {
    const auto r = gs::check_physical(s);
    physical = physical && r.ok;
    min_eig = std::min(min_eig, r.min_eigenvalue);
  }
  sc::ExactPipeline exact(c.grid, c.eps);
  for (auto mode : {sc::PlacementMode::beam, sc::PlacementMode::local_oscillator, sc::PlacementMode::mixed})
    for (double ph : {0.0, pi}) {
      const auto r = gs::check_physical(exact.state(sc::placement_physics(c, mode, ph)));
      physical = physical && r.ok;
      min_eig = std::min(min_eig, r.min_eigenvalue);
    }

  double purity = 0;
  for (double gain : {1.0, 1.2, std::sqrt(3.0), 3.0, 10.0}) {
    const auto s = gs::apply_symplectic(gs::vacuum_cov(c.grid), gs::source_symplectic(gain, c.grid));
    for (int h : {c.grid.first_harmonic(), c.grid.last_harmonic()})
      for (auto comp : {gs::Component::cos, gs::Component::sin}) {
        const auto xp = gs::homodyne_vector(c.grid, gs::Beam::probe, h, comp, 0.0);
        const auto xc = gs::homodyne_vector(c.grid, gs::Beam::conjugate, h, comp, 0.0);
        const double prod = gs::joint_variance(s, xp - xc) * gs::joint_variance(s, xp + xc);
        purity = std::max(purity, std::abs(prod - 1.0));
      }
  }
  const bool ok = defect < 1e-9 && physical && purity < 1e-9;
  return {ok, std::to_string(ops.size()) + " ops, max defect " + fmt("%.2g", defect) + "; " +
                  std::to_string(states.size() + 6) + " states, min eigenvalue " + fmt("%.2g", min_eig) +
                  "; purity product error " + fmt("%.2g", purity)};
}

Outcome dsp_calibration() {
  const auto c = sc::default_config(sc::ScenarioId::fig3b_relative_phase);
  const auto t = sc::shot_trace(c);

  // Vacuum spectrum, every bin except DC and Nyquist.
  const auto shot = twinmod::dsp::shot_reference(t, c.plan);
  const double expect = 1.0 + t.electronic_noise_variance;
  double max_z = 0;
  for (size_t k = 1; k + 1 < shot.size(); ++k) max_z = std::max(max_z, std::abs(shot.psd[k] - expect) / shot.std_err[k]);

  // Parseval on the vacuum difference current.
  const auto q = twinmod::timeseries::synthesize_source(t);
  const auto i = twinmod::timeseries::homodyne(q, 0.0, 0.0, t);
  const auto x = twinmod::timeseries::joint_current(i, Branch::difference);
  double power = 0;
  for (double v : x) power += v * v / static_cast<double>(x.size());
  double parseval = 0;
  for (const auto& plan : {c.plan, c.locked_plan}) {
    const auto s = twinmod::dsp::welch_psd(x, t.sample_rate, plan);
    const auto L = static_cast<double>(plan.segment_len);
    double sum = s.raw_psd.front() + s.raw_psd.back();
    for (size_t k = 1; k + 1 < s.size(); ++k) sum += 2.0 * s.raw_psd[k];
    parseval = std::max(parseval, std::abs(sum / L - power) / power);
  }

  // Injected tones on the drive-locked grid.
  const auto& g = c.grid;
  const auto n = 20 * c.locked_plan.segment_len;
  std::vector<double> sig(static_cast<size_t>(n), 0.0);
  struct Tone {
    int j;
    double a, b;
  };
  const std::vector<Tone> tones = {{0, 1.0, 0.0}, {7, 0.0, 2.5}, {23, -1.5, 0.75}, {49, 0.3, -0.2}};
  for (const auto& tn : tones) {
    const double f = g.frequency(g.first_harmonic() + tn.j);
    for (std::int64_t s = 0; s < n; ++s) {
      const double w = 2 * pi * f * static_cast<double>(s) / t.sample_rate;
      sig[static_cast<size_t>(s)] += tn.a * std::cos(w) + tn.b * std::sin(w);
    }
  }
  const auto bins = twinmod::dsp::drive_locked_bins(sig, t.sample_rate, c.locked_plan, g);
  Eigen::MatrixXd want_c = Eigen::MatrixXd::Zero(bins.cos.rows(), bins.cos.cols());
  Eigen::MatrixXd want_s = want_c;
  for (const auto& tn : tones) {
    want_c.col(tn.j).setConstant(tn.a);
    want_s.col(tn.j).setConstant(tn.b);
  }
  const double leak = std::max((bins.cos - want_c).cwiseAbs().maxCoeff(), (bins.sin - want_s).cwiseAbs().maxCoeff());

  const bool ok = max_z < 5.0 && parseval < 0.01 && leak < 1e-10;
  return {ok, "vacuum max |z| = " + fmt("%.3g", max_z) + " over " + std::to_string(shot.size() - 2) +
                  " bins; Parseval error " + fmt("%.2g", parseval) + "; tone leakage " + fmt("%.2g", leak)};
}

Outcome determinism() {
  int compared = 0;
  bool same = true;
  for (auto id : {sc::ScenarioId::fig3b_relative_phase, sc::ScenarioId::fig4_covariance}) {
    auto c = sc::default_config(id);
    c.trace.n_samples = 200'000;
    std::vector<std::vector<fs::path>> runs;
    for (int workers : {1, 1, 3}) {
      auto ci = c;
      ci.outputs = scratch(std::string(sc::to_string(id)) + std::to_string(runs.size())).string();
      runs.push_back(sc::run_scenario(ci, workers).files);
    }
    for (size_t r = 1; r < runs.size(); ++r) {
      same = same && runs[r].size() == runs[0].size();
      for (size_t k = 0; same && k < runs[0].size(); ++k) {
        if (runs[0][k].extension() != ".csv") continue;
        same = same && slurp(runs[0][k]) == slurp(runs[r][k]) &&
               slurp(runs[0][k].string() + ".json") == slurp(runs[r][k].string() + ".json");
        ++compared;
      }
    }
    for (const auto& run : runs) fs::remove_all(run.front().parent_path());
  }
  return {same && compared > 0,
          std::to_string(compared) + " CSV comparisons across repeated runs and worker counts 1 and 3"};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::printf("%s %d %s: %s\n", o.passed ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.passed) ++failures;
  };
  try {
    report(1, "closed form vs Monte-Carlo", closed_form_vs_monte_carlo());
    std::vector<gs::CovMatrix> states;
    report(2, "closed form vs Gaussian pipeline", closed_form_vs_gaussian(states));

    auto c3 = sc::default_config(sc::ScenarioId::fig3b_relative_phase);
    c3.outputs = scratch("fig3b").string();
    const auto r3 = sc::run_scenario(c3);
    report(3, "out-of-phase cancellation", from_checks(r3, {"out_of_phase_matches_baseline"}));
    report(4, "equivalence laws", from_checks(r3, {"in_phase_matches_single_2m", "phi120_matches_single_m"}));

    auto c4 = sc::default_config(sc::ScenarioId::fig4_covariance);
    c4.outputs = scratch("fig4").string();
    const auto r4 = sc::run_scenario(c4);
    report(5, "double diagonal covariance", from_checks(r4, {"double_diagonal_beam_phi0"}));
    report(6, "placement laws",
           from_checks(r4, {"lo_negates_beam_phi0", "zero_block_mixed_phi0", "double_diagonal_mixed_phi180"}));
    fs::remove_all(c3.outputs);
    fs::remove_all(c4.outputs);

    report(7, "symplectic and physicality", symplectic_and_physical(states));
    report(8, "DSP calibration", dsp_calibration());
    report(9, "determinism", determinism());
  } catch (const std::exception& e) {
    std::printf("FAIL acceptance aborted: %s\n", e.what());
    return 2;
  }
  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
