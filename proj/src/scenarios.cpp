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

#include "twinmod/scenarios.hpp"

#include "parallel.hpp"
#include "twinmod/errors.hpp"
#include "twinmod/output.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

namespace twinmod::scenarios {

using analytic::Branch;
using gaussian::Beam;
using gaussian::Component;
using gaussian::Quadrature;
using nlohmann::ordered_json;
using output::num;
using std::numbers::pi;

namespace fs = std::filesystem;

namespace {

constexpr double kDeg = pi / 180.0;
constexpr std::uint64_t kPointStream = 1ULL << 20;
constexpr std::uint64_t kShotStream = 1ULL << 21;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string point_label(double m_p, double m_c, double phi_deg) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "mp%.4g_mc%.4g_phi%g", m_p, m_c, phi_deg);
  return buf;
}

bool same_phase(double a_deg, double b_deg) { return std::abs(std::remainder(a_deg - b_deg, 360.0)) < 1e-9; }

std::vector<double> in_band_freqs(const gaussian::ModeGrid& g) {
  std::vector<double> f;
  for (int h = g.first_harmonic(); h <= g.last_harmonic(); ++h) f.push_back(g.frequency(h));
  return f;
}

double max_abs(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

std::string spec_key(const eom::EomSpec& e) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d|%d|%.17g|%.17g|%.17g|%d", static_cast<int>(e.beam), static_cast<int>(e.placement),
                e.m, e.phi, e.f_drive, static_cast<int>(e.enabled));
  return buf;
}

// Active modulator of one beam after mapping LO placement onto the beam.
bool beam_modulator(const Physics& p, Beam beam, eom::EomSpec* out) {
  bool found = false;
  for (const auto& e : p.eoms) {
    if (e.beam != beam || !e.active()) continue;
    if (found) throw std::invalid_argument("analytic_noise: more than one modulator on a beam");
    *out = eom::equivalent_beam_spec(e);
    found = true;
  }
  return found;
}

}  // namespace

Physics pair_physics(const ScenarioConfig& c, const analytic::SourceSpec& src, double m_p, double m_c, double phi) {
  eom::EomSpec p = c.probe_template();
  eom::EomSpec q = c.conjugate_template();
  p.m = m_p;
  p.phi = 0.0;
  q.m = m_c;
  q.phi = phi;
  return Physics{src, {p, q}, point_label(m_p, m_c, phi / kDeg)};
}

Physics placement_physics(const ScenarioConfig& c, PlacementMode mode, double phi) {
  eom::EomSpec p = c.probe_template();
  eom::EomSpec q = c.conjugate_template();
  p.phi = 0.0;
  q.phi = phi;
  p.placement = mode == PlacementMode::local_oscillator ? eom::Placement::local_oscillator : eom::Placement::beam;
  q.placement = mode == PlacementMode::beam ? eom::Placement::beam : eom::Placement::local_oscillator;
  return Physics{c.src, {p, q}, std::string(to_string(mode)) + "_phi" + num(phi / kDeg)};
}

double analytic_noise(const Physics& p) {
  eom::EomSpec a, b;
  const bool has_p = beam_modulator(p, Beam::probe, &a);
  const bool has_c = beam_modulator(p, Beam::conjugate, &b);
  const double m_p = has_p ? a.m : 0.0;
  const double m_c = has_c ? b.m : 0.0;
  if (has_p && has_c && a.f_drive != b.f_drive)
    throw std::invalid_argument("analytic_noise: modulators run at different drive frequencies");
  const double phi = (has_p && has_c) ? b.phi - a.phi : 0.0;
  return analytic::joint_noise(p.src, m_p, m_c, phi);
}

ExactPipeline::ExactPipeline(gaussian::ModeGrid grid, double eps) : grid_(grid), eps_(eps) { grid_.validate(); }

const gaussian::CovMatrix& ExactPipeline::source_state(double gain) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (auto it = sources_.find(gain); it != sources_.end()) return it->second;
  }
  auto c = gaussian::apply_symplectic(gaussian::vacuum_cov(grid_), gaussian::source_symplectic(gain, grid_));
  std::lock_guard<std::mutex> lock(mu_);
  return sources_.try_emplace(gain, std::move(c)).first->second;
}

const gaussian::SymplecticOp& ExactPipeline::coupler(const eom::EomSpec& spec) {
  const std::string key = spec_key(spec);
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (auto it = couplers_.find(key); it != couplers_.end()) return it->second;
  }
  auto op = eom::sideband_symplectic(spec, grid_, eps_).op;
  std::lock_guard<std::mutex> lock(mu_);
  return couplers_.try_emplace(key, std::move(op)).first->second;
}

gaussian::CovMatrix ExactPipeline::state(const Physics& p) {
  p.src.validate();
  gaussian::CovMatrix c = source_state(p.src.gain);
  std::vector<const gaussian::SymplecticOp*> ops;
  for (const auto& e : p.eoms)
    if (e.active()) ops.push_back(&coupler(e));
  if (!ops.empty()) {
    gaussian::SymplecticOp total = *ops.front();
    for (size_t i = 1; i < ops.size(); ++i) total = gaussian::compose(*ops[i], total);
    c = gaussian::apply_symplectic(c, total);
  }
  if (p.src.eta > 0.0) c = gaussian::apply_loss_all(c, p.src.eta);
  return c;
}

BinPair exact_bin_variances(const gaussian::CovMatrix& c, double theta_p, double theta_c, Branch branch) {
  const auto& g = c.grid;
  const double sign = branch == Branch::difference ? -1.0 : 1.0;
  BinPair out;
  out.cos.resize(g.n_bins);
  out.sin.resize(g.n_bins);
  for (int j = 0; j < g.n_bins; ++j) {
    const int h = g.first_harmonic() + j;
    for (auto comp : {Component::cos, Component::sin}) {
      const Eigen::VectorXd v = (gaussian::homodyne_vector(g, Beam::probe, h, comp, theta_p) +
                                 sign * gaussian::homodyne_vector(g, Beam::conjugate, h, comp, theta_c)) /
                                std::numbers::sqrt2;
      (comp == Component::cos ? out.cos : out.sin)(j) = gaussian::joint_variance(c, v);
    }
  }
  return out;
}

Eigen::MatrixXd exact_cov_block(const gaussian::CovMatrix& c, dsp::CovComponent component) {
  const bool p_cos = component == dsp::CovComponent::cc || component == dsp::CovComponent::cs;
  const bool c_cos = component == dsp::CovComponent::cc || component == dsp::CovComponent::sc;
  gaussian::BlockSelector rows{Quadrature::X, Beam::probe, p_cos ? Component::cos : Component::sin, {}};
  gaussian::BlockSelector cols{Quadrature::P, Beam::conjugate, c_cos ? Component::cos : Component::sin, {}};
  return gaussian::extract_block(c, rows, cols);
}

std::vector<std::string> bin_labels(const gaussian::ModeGrid& g, Quadrature q, Beam b, Component comp) {
  std::vector<std::string> out;
  for (int h = g.first_harmonic(); h <= g.last_harmonic(); ++h) out.push_back(g.label(g.index(q, b, h, comp)));
  return out;
}

std::uint64_t point_seed(std::uint64_t base, std::uint64_t k) {
  return timeseries::derive_seed(base, kPointStream | k, 0);
}

timeseries::QuadratureTraces simulate(const Physics& p, const timeseries::TraceConfig& trace, std::uint64_t seed,
                                      int workers) {
  timeseries::TraceConfig t = trace;
  t.src = p.src;
  t.seed = seed;
  auto q = timeseries::synthesize_source(t, workers);
  q = timeseries::apply_eoms(q, p.eoms);
  return timeseries::apply_loss_traces(q, p.src.eta, seed, workers);
}

Estimate time_averaged_noise(const timeseries::Photocurrent& i, Branch branch) {
  const auto d = timeseries::joint_current(i, branch);
  const double n = static_cast<double>(d.size());
  if (d.size() < 2) throw std::invalid_argument("time_averaged_noise: need at least two samples");
  double mu = 0;
  for (double v : d) mu += v;
  mu /= n;
  double s = 0, s2 = 0;
  for (double v : d) {
    const double sq = (v - mu) * (v - mu);
    s += sq;
    s2 += sq * sq;
  }
  const double mean_sq = s / n;
  Estimate e;
  e.value = s / (n - 1.0);
  e.std_err = std::sqrt(std::max(0.0, s2 / n - mean_sq * mean_sq) / n);
  return e;
}

std::vector<double> two_sample_z(const dsp::Spectrum& a, const dsp::Spectrum& b) {
  if (a.freqs != b.freqs) throw std::invalid_argument("two_sample_z: spectra use different bins");
  std::vector<double> z(a.size());
  for (size_t k = 0; k < z.size(); ++k)
    z[k] = (a.raw_psd[k] - b.raw_psd[k]) / std::hypot(a.raw_std_err[k], b.raw_std_err[k]);
  return z;
}

timeseries::TraceConfig shot_trace(const ScenarioConfig& c) {
  timeseries::TraceConfig t = c.trace;
  t.src = analytic::SourceSpec{1.0, 0.0};
  t.seed = timeseries::derive_seed(c.trace.seed, kShotStream, 0);
  return t;
}

dsp::Spectrum mc_spectrum(const Physics& p, const ScenarioConfig& c, std::uint64_t seed,
                          dsp::ShotReferenceCache& shots, int workers) {
  const auto& ref = shots.get(shot_trace(c), c.plan, workers);
  timeseries::TraceConfig t = c.trace;
  t.seed = seed;
  const auto q = simulate(p, c.trace, seed, workers);
  const auto i = timeseries::homodyne(q, 0.0, 0.0, t, workers);
  const auto full = dsp::joint_noise_spectrum(i, Branch::difference, c.plan, ref);
  return dsp::select_bins(full, in_band_freqs(c.grid));
}

dsp::CovBlockEstimate mc_cov_block(const timeseries::QuadratureTraces& q, const ScenarioConfig& c,
                                   dsp::CovComponent component) {
  timeseries::TraceConfig t = c.trace;
  t.seed = q.seed;
  const auto i = timeseries::homodyne(q, 0.0, pi / 2, t);
  const auto bp = dsp::drive_locked_bins(i.probe, i.sample_rate, c.locked_plan, c.grid);
  const auto bc = dsp::drive_locked_bins(i.conjugate, i.sample_rate, c.locked_plan, c.grid);
  return dsp::cross_covariance(bp, bc, component);
}

// ---------------------------------------------------------------------------
// Pipeline comparison

namespace {

struct GridPoint {
  double gain, eta, m_p, m_c, phi_deg;
};

std::vector<GridPoint> comparison_grid(const ScenarioConfig& c) {
  std::vector<double> gains = c.sweep.gains.empty() ? std::vector<double>{c.src.gain} : c.sweep.gains;
  std::vector<double> etas = c.sweep.etas.empty() ? std::vector<double>{c.src.eta} : c.sweep.etas;
  std::vector<double> phases = c.sweep.phases_deg.empty() ? std::vector<double>{0.0} : c.sweep.phases_deg;
  std::vector<GridPoint> out;
  for (double g : gains)
    for (double e : etas)
      for (auto [mp, mc] : c.sweep.index_pairs)
        for (double ph : phases) out.push_back({g, e, mp, mc, ph});
  return out;
}

void add_stat(PointReport& r, std::string kind, int j, int k, double mc, double exact, double se) {
  StatRecord s{std::move(kind), j, k, mc, exact, se, se > 0 ? (mc - exact) / se : (mc == exact ? 0.0 : INFINITY)};
  if (std::abs(s.z) > r.max_abs_z) {
    r.max_abs_z = std::abs(s.z);
    r.worst = s.kind + "[" + std::to_string(j) + "," + std::to_string(k) + "]";
  }
  r.stats.push_back(std::move(s));
}

void add_bins(PointReport& r, const std::string& kind, const dsp::BinVariances& mc, const BinPair& exact,
              double offset) {
  for (int j = 0; j < mc.cos.size(); ++j) {
    add_stat(r, kind + "_cos", j, j, mc.cos(j), exact.cos(j) + offset, mc.cos_err(j));
    add_stat(r, kind + "_sin", j, j, mc.sin(j), exact.sin(j) + offset, mc.sin_err(j));
  }
}

}  // namespace

PipelineReport compare_pipelines(const ScenarioConfig& c, const Tolerances& tol, int workers,
                                 const TraceTamper& tamper) {
  const auto grid = comparison_grid(c);
  if (grid.empty()) throw std::invalid_argument("compare_pipelines: empty parameter grid");
  ExactPipeline exact(c.grid, c.eps);
  const double e_var = c.trace.electronic_noise_variance;
  PipelineReport report;
  report.points.resize(grid.size());

  detail::parallel_for(static_cast<std::int64_t>(grid.size()), workers, [&](std::int64_t k) {
    const GridPoint& gp = grid[static_cast<size_t>(k)];
    PointReport& r = report.points[static_cast<size_t>(k)];
    const analytic::SourceSpec src{gp.gain, gp.eta};
    const Physics phys = pair_physics(c, src, gp.m_p, gp.m_c, gp.phi_deg * kDeg);
    r.label = "G" + num(gp.gain) + "_eta" + num(gp.eta) + "_" + phys.label;
    r.gain = gp.gain;
    r.eta = gp.eta;
    r.m_p = gp.m_p;
    r.m_c = gp.m_c;
    r.phi_deg = gp.phi_deg;
    try {
      const auto state = exact.state(phys);
      const std::uint64_t seed = point_seed(c.trace.seed, static_cast<std::uint64_t>(k));
      auto q = simulate(phys, c.trace, seed);
      if (tamper) tamper(q);
      timeseries::TraceConfig t = c.trace;
      t.seed = seed;
      const double fs = c.trace.sample_rate;

      const auto ixx = timeseries::homodyne(q, 0.0, 0.0, t);
      const auto dxx = timeseries::joint_current(ixx, Branch::difference);
      const auto vxx = dsp::bin_variances(dsp::drive_locked_bins(dxx, fs, c.locked_plan, c.grid));
      const BinPair exx = exact_bin_variances(state, 0.0, 0.0, Branch::difference);
      add_bins(r, "xx_diff", vxx, exx, e_var);

      const auto ipp = timeseries::homodyne(q, pi / 2, pi / 2, t);
      const auto spp = timeseries::joint_current(ipp, Branch::sum);
      const auto vpp = dsp::bin_variances(dsp::drive_locked_bins(spp, fs, c.locked_plan, c.grid));
      add_bins(r, "pp_sum", vpp, exact_bin_variances(state, pi / 2, pi / 2, Branch::sum), e_var);

      const auto blk = mc_cov_block(q, c, dsp::CovComponent::cs);
      const Eigen::MatrixXd eblk = exact_cov_block(state, dsp::CovComponent::cs);
      for (int j = 0; j < blk.matrix.rows(); ++j)
        for (int kk = 0; kk < blk.matrix.cols(); ++kk)
          add_stat(r, "xp_cs", j, kk, blk.matrix(j, kk), eblk(j, kk), blk.std_err(j, kk));

      r.analytic = analytic::joint_noise(src, gp.m_p, gp.m_c, gp.phi_deg * kDeg);
      r.eq1_mc = time_averaged_noise(ixx, Branch::difference);
      add_stat(r, "eq1", 0, 0, r.eq1_mc.value, r.analytic + e_var, r.eq1_mc.std_err);
      r.eq1_z = r.stats.back().z;
      for (int j = 0; j < exx.cos.size(); ++j)
        r.exact_rel_err =
            std::max(r.exact_rel_err, std::abs(0.5 * (exx.cos(j) + exx.sin(j)) - r.analytic) / r.analytic);
      r.passed = r.max_abs_z < tol.z_max && r.exact_rel_err < tol.analytic_rel;
    } catch (const std::exception& e) {
      throw std::runtime_error("compare_pipelines: point " + r.label + ": " + e.what());
    }
  });

  report.passed = true;
  for (const auto& p : report.points) {
    report.max_abs_z = std::max(report.max_abs_z, p.max_abs_z);
    report.passed = report.passed && p.passed;
  }
  return report;
}

bool RunResult::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

// ---------------------------------------------------------------------------
// Scenario runners

namespace {

class Bundle {
 public:
  Bundle(const ScenarioConfig& c, RunResult& r) : c_(c), r_(r), dir_(c.outputs), hash_(config_hash(c)) {}

  ordered_json meta(const std::string& description) const {
    ordered_json m;
    m["scenario"] = to_string(c_.scenario);
    m["description"] = description;
    m["config_hash"] = hash_;
    m["seed"] = c_.trace.seed;
    m["version"] = kVersion;
    return m;
  }

  void csv(const std::string& name, const output::CsvTable& t, ordered_json meta) {
    const fs::path p = dir_ / name;
    output::write_csv(p, t, meta);
    r_.files.push_back(p);
  }

  void json(const std::string& name, const ordered_json& j) {
    const fs::path p = dir_ / name;
    output::write_json(p, j);
    r_.files.push_back(p);
  }

  void check(std::string name, bool ok, std::string detail) {
    r_.checks.push_back({std::move(name), ok, std::move(detail)});
  }

  void finish() {
    json("config.json", to_json(c_));
    std::string text;
    ordered_json s = meta("check summary");
    s["checks"] = ordered_json::array();
    for (const auto& ch : r_.checks) {
      text += std::string(ch.passed ? "PASS " : "FAIL ") + ch.name + ": " + ch.detail + "\n";
      s["checks"].push_back({{"name", ch.name}, {"passed", ch.passed}, {"detail", ch.detail}});
    }
    s["passed"] = r_.passed();
    text += r_.passed() ? "overall: PASS\n" : "overall: FAIL\n";
    const fs::path txt = dir_ / "summary.txt";
    output::write_atomic(txt, text);
    r_.files.push_back(txt);
    json("summary.json", s);
  }

  const fs::path& dir() const { return dir_; }

 private:
  const ScenarioConfig& c_;
  RunResult& r_;
  fs::path dir_;
  std::string hash_;
};

std::string zdetail(double max_z, std::size_t n) {
  return "max |z| = " + fmt("%.3g", max_z) + " over " + std::to_string(n) + " values";
}

void run_fig2(const ScenarioConfig& c, int workers, Bundle& b) {
  const auto thetas = c.sweep.theta.values();
  struct Row {
    Estimate diff, sum;
  };
  std::vector<Row> rows(thetas.size());
  const Physics phys{c.src, {}, "off"};
  detail::parallel_for(static_cast<std::int64_t>(thetas.size()), workers, [&](std::int64_t k) {
    const std::uint64_t seed = point_seed(c.trace.seed, static_cast<std::uint64_t>(k));
    timeseries::TraceConfig t = c.trace;
    t.seed = seed;
    const auto q = simulate(phys, c.trace, seed);
    const auto i = timeseries::homodyne(q, thetas[static_cast<size_t>(k)], 0.0, t);
    rows[static_cast<size_t>(k)] = {time_averaged_noise(i, Branch::difference), time_averaged_noise(i, Branch::sum)};
  });

  const double e = c.trace.electronic_noise_variance;
  output::CsvTable tab({"theta_rad", "difference_analytic", "difference_mc", "difference_stderr", "sum_analytic",
                        "sum_mc", "sum_stderr"});
  std::vector<double> z;
  size_t argmin = 0;
  for (size_t k = 0; k < thetas.size(); ++k) {
    const double ad = analytic::phase_sweep_noise(c.src, thetas[k], Branch::difference) + e;
    const double as = analytic::phase_sweep_noise(c.src, thetas[k], Branch::sum) + e;
    tab.add_row(std::vector<double>{thetas[k], ad, rows[k].diff.value, rows[k].diff.std_err, as, rows[k].sum.value,
                                    rows[k].sum.std_err});
    z.push_back((rows[k].diff.value - ad) / rows[k].diff.std_err);
    z.push_back((rows[k].sum.value - as) / rows[k].sum.std_err);
    if (rows[k].diff.value < rows[argmin].diff.value) argmin = k;
  }
  auto m = b.meta("joint quadrature noise vs total LO phase, modulators off");
  m["columns"] = {"theta_rad", "difference_analytic", "difference_mc", "difference_stderr", "sum_analytic", "sum_mc",
                  "sum_stderr"};
  b.csv("noise_vs_theta.csv", tab, m);

  b.check("mc_matches_closed_form", max_abs(z) < 5.0, zdetail(max_abs(z), z.size()));
  const double step = (c.sweep.theta.max - c.sweep.theta.min) / (c.sweep.theta.points - 1);
  const bool zero_in_range = c.sweep.theta.min <= 0.0 && c.sweep.theta.max >= 0.0;
  if (zero_in_range)
    b.check("difference_minimum_at_theta_0", std::abs(thetas[argmin]) <= step * (1 + 1e-9),
            "minimum at theta = " + fmt("%.4g", thetas[argmin]) + " rad");
}

struct SpectrumSetting {
  std::string label;
  Physics phys;
  dsp::Spectrum spec;
  double expected = 0.0;
};

// Runs every setting, writes one CSV per spectrum plus the shot reference, and
// checks each against the closed form.
void run_spectra(const ScenarioConfig& c, int workers, std::vector<SpectrumSetting>& settings, Bundle& b) {
  dsp::ShotReferenceCache shots;
  const auto& ref = shots.get(shot_trace(c), c.plan, workers);
  const double e = c.trace.electronic_noise_variance;
  detail::parallel_for(static_cast<std::int64_t>(settings.size()), workers, [&](std::int64_t k) {
    auto& s = settings[static_cast<size_t>(k)];
    s.spec = mc_spectrum(s.phys, c, point_seed(c.trace.seed, static_cast<std::uint64_t>(k)), shots);
    s.expected = (analytic_noise(s.phys) + e) / (1.0 + e);
  });

  const auto ref_bins = dsp::select_bins(ref, in_band_freqs(c.grid));
  output::CsvTable rt({"freq_hz", "psd", "stderr"});
  for (size_t k = 0; k < ref_bins.size(); ++k)
    rt.add_row(std::vector<double>{ref_bins.freqs[k], ref_bins.raw_psd[k], ref_bins.raw_std_err[k]});
  auto rm = b.meta("shot-noise reference (vacuum source)");
  rm["n_segments"] = ref.n_segments;
  b.csv("shot_reference.csv", rt, rm);

  for (std::size_t k = 0; k < settings.size(); ++k) {
    const auto& s = settings[k];
    output::CsvTable t({"freq_hz", "psd_rel_shot", "stderr", "raw_psd", "raw_stderr", "analytic"});
    std::vector<double> z;
    for (size_t i = 0; i < s.spec.size(); ++i) {
      t.add_row(std::vector<double>{s.spec.freqs[i], s.spec.psd[i], s.spec.std_err[i], s.spec.raw_psd[i],
                                    s.spec.raw_std_err[i], s.expected});
      z.push_back((s.spec.psd[i] - s.expected) / s.spec.std_err[i]);
    }
    auto m = b.meta("joint X-difference noise spectrum relative to shot noise");
    m["setting"] = s.label;
    m["point_seed"] = point_seed(c.trace.seed, k);
    m["n_segments"] = s.spec.n_segments;
    m["window"] = dsp::to_string(c.plan.window);
    m["segment_len"] = c.plan.segment_len;
    m["overlap"] = c.plan.overlap;
    b.csv("spectrum_" + s.label + ".csv", t, m);
    b.check("closed_form_" + s.label, max_abs(z) < 5.0, zdetail(max_abs(z), z.size()));
  }
}

// a above b at every bin by more than 5 standard errors.
void check_above(Bundle& b, const std::string& name, const dsp::Spectrum& a, const dsp::Spectrum& lo) {
  const auto z = two_sample_z(a, lo);
  const double zmin = *std::min_element(z.begin(), z.end());
  b.check(name, zmin > 5.0, "min z = " + fmt("%.3g", zmin) + " over " + std::to_string(z.size()) + " bins");
}

void check_equal(Bundle& b, const std::string& name, const dsp::Spectrum& a, const dsp::Spectrum& c) {
  const auto z = two_sample_z(a, c);
  b.check(name, max_abs(z) < 5.0, zdetail(max_abs(z), z.size()));
}

void run_fig3a(const ScenarioConfig& c, int workers, Bundle& b) {
  std::vector<SpectrumSetting> s;
  s.push_back({"off", pair_physics(c, c.src, 0.0, 0.0, 0.0), {}, 0.0});
  for (double m : c.sweep.indices) s.push_back({"single_m" + num(m), pair_physics(c, c.src, m, 0.0, 0.0), {}, 0.0});
  run_spectra(c, workers, s, b);
  // Noise grows with the index at every bin.
  std::vector<size_t> order(s.size() - 1);
  for (size_t i = 0; i < order.size(); ++i) order[i] = i + 1;
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t x, size_t y) { return c.sweep.indices[x - 1] < c.sweep.indices[y - 1]; });
  size_t prev = 0;
  for (size_t i : order) {
    if (c.sweep.indices[i - 1] == 0.0) continue;
    check_above(b, "ordering_" + s[i].label + "_above_" + s[prev].label, s[i].spec, s[prev].spec);
    prev = i;
  }
}

void run_fig3b(const ScenarioConfig& c, int workers, Bundle& b) {
  const double mp = c.probe_template().m, mc = c.conjugate_template().m;
  std::vector<SpectrumSetting> s;
  s.push_back({"baseline", pair_physics(c, c.src, 0.0, 0.0, 0.0), {}, 0.0});
  for (double ph : c.sweep.phases_deg)
    s.push_back({"phi" + num(ph), pair_physics(c, c.src, mp, mc, ph * kDeg), {}, 0.0});
  s.push_back({"single_m", pair_physics(c, c.src, mp, 0.0, 0.0), {}, 0.0});
  s.push_back({"single_2m", pair_physics(c, c.src, 2 * mp, 0.0, 0.0), {}, 0.0});
  run_spectra(c, workers, s, b);

  auto find = [&](double deg) -> const dsp::Spectrum* {
    for (size_t i = 0; i < c.sweep.phases_deg.size(); ++i)
      if (same_phase(c.sweep.phases_deg[i], deg)) return &s[i + 1].spec;
    return nullptr;
  };
  const auto& base = s.front().spec;
  const auto& single_m = s[s.size() - 2].spec;
  const auto& single_2m = s.back().spec;
  const auto *p0 = find(0), *p120 = find(120), *p180 = find(180);
  if (p180) check_equal(b, "out_of_phase_matches_baseline", *p180, base);
  if (mp == mc) {
    if (p120) check_equal(b, "phi120_matches_single_m", *p120, single_m);
    if (p0) check_equal(b, "in_phase_matches_single_2m", *p0, single_2m);
  }
  if (p0 && p120) check_above(b, "ordering_phi0_above_phi120", *p0, *p120);
  if (p120 && p180) check_above(b, "ordering_phi120_above_phi180", *p120, *p180);
}

bool block_should_vanish(const Physics& p) {
  eom::EomSpec a, q;
  const bool has_p = beam_modulator(p, Beam::probe, &a);
  const bool has_c = beam_modulator(p, Beam::conjugate, &q);
  if (!has_p && !has_c) return true;
  if (has_p != has_c) return false;
  return a.m == q.m && std::abs(std::remainder(q.phi - a.phi - pi, 2 * pi)) < 1e-9;
}

void run_fig4(const ScenarioConfig& c, int workers, Bundle& b) {
  struct Setting {
    PlacementMode mode;
    double phase_deg;
    Physics phys;
    std::vector<dsp::CovBlockEstimate> mc;  // cc, cs, sc, ss
    Eigen::MatrixXd exact_cs;
  };
  std::vector<Setting> s;
  for (auto mode : c.sweep.placements)
    for (double ph : c.sweep.phases_deg) s.push_back({mode, ph, placement_physics(c, mode, ph * kDeg), {}, {}});

  ExactPipeline exact(c.grid, c.eps);
  const dsp::CovComponent comps[] = {dsp::CovComponent::cc, dsp::CovComponent::cs, dsp::CovComponent::sc,
                                     dsp::CovComponent::ss};
  detail::parallel_for(static_cast<std::int64_t>(s.size()), workers, [&](std::int64_t k) {
    auto& st = s[static_cast<size_t>(k)];
    const auto q = simulate(st.phys, c.trace, point_seed(c.trace.seed, static_cast<std::uint64_t>(k)));
    for (auto comp : comps) st.mc.push_back(mc_cov_block(q, c, comp));
    st.exact_cs = exact_cov_block(exact.state(st.phys), dsp::CovComponent::cs);
  });

  const auto rows_cos = bin_labels(c.grid, Quadrature::X, Beam::probe, Component::cos);
  const auto rows_sin = bin_labels(c.grid, Quadrature::X, Beam::probe, Component::sin);
  const auto cols_cos = bin_labels(c.grid, Quadrature::P, Beam::conjugate, Component::cos);
  const auto cols_sin = bin_labels(c.grid, Quadrature::P, Beam::conjugate, Component::sin);

  for (size_t k = 0; k < s.size(); ++k) {
    const auto& st = s[k];
    const std::string tag = std::string(to_string(st.mode)) + "_phi" + num(st.phase_deg);
    for (size_t i = 0; i < 4; ++i) {
      const auto& blk = st.mc[i];
      const bool p_cos = i < 2, c_cos = i == 0 || i == 2;
      auto m = b.meta("X_p-P_c covariance block, Monte-Carlo estimate");
      m["placement"] = to_string(st.mode);
      m["phase_deg"] = st.phase_deg;
      m["component"] = dsp::to_string(blk.component);
      m["n_segments"] = blk.n_segments;
      m["point_seed"] = point_seed(c.trace.seed, k);
      m["bin_freqs_hz"] = blk.bin_freqs;
      b.csv("block_" + tag + "_" + dsp::to_string(blk.component) + ".csv",
            output::matrix_table(blk.matrix, p_cos ? rows_cos : rows_sin, c_cos ? cols_cos : cols_sin), m);
      if (blk.component == dsp::CovComponent::cs) {
        m["description"] = "standard errors of the Monte-Carlo block";
        b.csv("block_" + tag + "_cs_stderr.csv", output::matrix_table(blk.std_err, rows_cos, cols_sin), m);
        m["description"] = "X_p-P_c covariance block, Gaussian pipeline";
        b.csv("block_" + tag + "_cs_exact.csv", output::matrix_table(st.exact_cs, rows_cos, cols_sin), m);
      }
    }

    const auto& cs = st.mc[1];
    const Eigen::ArrayXXd zexact = (cs.matrix - st.exact_cs).array() / cs.std_err.array();
    b.check("gaussian_agreement_" + tag, zexact.abs().maxCoeff() < 5.0,
            zdetail(zexact.abs().maxCoeff(), static_cast<size_t>(zexact.size())));

    const Eigen::ArrayXXd z = cs.matrix.array() / cs.std_err.array();
    if (block_should_vanish(st.phys)) {
      b.check("zero_block_" + tag, z.abs().maxCoeff() < 5.0, zdetail(z.abs().maxCoeff(), static_cast<size_t>(z.size())));
    } else {
      double min_side = INFINITY, max_off = 0;
      for (int i = 0; i < z.rows(); ++i)
        for (int j = 0; j < z.cols(); ++j) {
          const int d = std::abs(i - j);
          if (d == 1) min_side = std::min(min_side, std::abs(z(i, j)));
          else if (d > 1) max_off = std::max(max_off, std::abs(z(i, j)));
        }
      b.check("double_diagonal_" + tag, min_side > 5.0 && max_off < 5.0,
              "min |z| on |j-k|=1: " + fmt("%.3g", min_side) + ", max |z| elsewhere: " + fmt("%.3g", max_off));
    }
  }

  // LO placement flips the sign of the in-beam block.
  for (const auto& lo : s) {
    if (lo.mode != PlacementMode::local_oscillator) continue;
    for (const auto& bm : s) {
      if (bm.mode != PlacementMode::beam || !same_phase(bm.phase_deg, lo.phase_deg)) continue;
      const auto &a = lo.mc[1], &q = bm.mc[1];
      const Eigen::ArrayXXd z =
          (a.matrix + q.matrix).array() / (a.std_err.array().square() + q.std_err.array().square()).sqrt();
      b.check("lo_negates_beam_phi" + num(lo.phase_deg), z.abs().maxCoeff() < 5.0,
              zdetail(z.abs().maxCoeff(), static_cast<size_t>(z.size())));
    }
  }
}

void run_analytic_table(const ScenarioConfig& c, int workers, Bundle& b) {
  const auto grid = comparison_grid(c);
  std::vector<double> exact_val(grid.size()), rel(grid.size());
  ExactPipeline exact(c.grid, c.eps);
  detail::parallel_for(static_cast<std::int64_t>(grid.size()), workers, [&](std::int64_t k) {
    const auto& gp = grid[static_cast<size_t>(k)];
    const analytic::SourceSpec src{gp.gain, gp.eta};
    const double a = analytic::joint_noise(src, gp.m_p, gp.m_c, gp.phi_deg * kDeg);
    const auto v = exact_bin_variances(exact.state(pair_physics(c, src, gp.m_p, gp.m_c, gp.phi_deg * kDeg)), 0.0,
                                       0.0, Branch::difference);
    double worst = 0, mean = 0;
    for (int j = 0; j < v.cos.size(); ++j) {
      const double bin = 0.5 * (v.cos(j) + v.sin(j));
      mean += bin / static_cast<double>(v.cos.size());
      worst = std::max(worst, std::abs(bin - a) / a);
    }
    exact_val[static_cast<size_t>(k)] = mean;
    rel[static_cast<size_t>(k)] = worst;
  });
  output::CsvTable t({"gain", "eta", "m_p", "m_c", "phi_deg", "effective_index", "joint_noise", "joint_noise_db",
                      "gaussian_pipeline", "max_rel_diff"});
  double worst = 0;
  for (size_t k = 0; k < grid.size(); ++k) {
    const auto& gp = grid[k];
    const double a = analytic::joint_noise({gp.gain, gp.eta}, gp.m_p, gp.m_c, gp.phi_deg * kDeg);
    t.add_row(std::vector<double>{gp.gain, gp.eta, gp.m_p, gp.m_c, gp.phi_deg,
                                  analytic::effective_index(gp.m_p, gp.m_c, gp.phi_deg * kDeg), a, analytic::to_db(a),
                                  exact_val[k], rel[k]});
    worst = std::max(worst, rel[k]);
  }
  b.csv("joint_noise_table.csv", t, b.meta("closed-form joint noise with the Gaussian pipeline value per point"));
  b.check("gaussian_pipeline_matches_closed_form", worst < 1e-6, "max relative difference " + fmt("%.3g", worst));
}

void write_pipeline_report(const PipelineReport& rep, Bundle& b) {
  output::CsvTable pts({"point", "gain", "eta", "m_p", "m_c", "phi_deg", "analytic", "eq1_mc", "eq1_stderr", "eq1_z",
                        "exact_rel_err", "max_abs_z", "passed"});
  output::CsvTable stats({"point", "statistic", "bin_j", "bin_k", "mc", "exact", "stderr", "z"});
  for (size_t k = 0; k < rep.points.size(); ++k) {
    const auto& p = rep.points[k];
    pts.add_row(std::vector<double>{static_cast<double>(k), p.gain, p.eta, p.m_p, p.m_c, p.phi_deg, p.analytic,
                                    p.eq1_mc.value, p.eq1_mc.std_err, p.eq1_z, p.exact_rel_err, p.max_abs_z,
                                    p.passed ? 1.0 : 0.0});
    for (const auto& s : p.stats)
      stats.add_row({std::to_string(k), s.kind, std::to_string(s.bin_j), std::to_string(s.bin_k), num(s.mc),
                     num(s.exact), num(s.std_err), num(s.z)});
    b.check("pipelines_agree_" + p.label, p.passed,
            "max |z| = " + fmt("%.3g", p.max_abs_z) + " (" + p.worst + "), closed-form rel. error " +
                fmt("%.2g", p.exact_rel_err));
  }
  b.csv("pipeline_points.csv", pts, b.meta("Monte-Carlo vs Gaussian pipeline, one row per grid point"));
  b.csv("pipeline_stats.csv", stats, b.meta("every compared statistic with its z-score"));
}

}  // namespace

RunResult validate_config(const ScenarioConfig& c, int workers) {
  c.validate();
  RunResult r;
  Bundle b(c, r);
  write_pipeline_report(compare_pipelines(c, {}, workers), b);
  b.finish();
  return r;
}

RunResult run_scenario(const ScenarioConfig& c, int workers) {
  c.validate();
  if (c.scenario == ScenarioId::validate_pipelines) return validate_config(c, workers);
  RunResult r;
  Bundle b(c, r);
  switch (c.scenario) {
    case ScenarioId::fig2_sweep: run_fig2(c, workers, b); break;
    case ScenarioId::fig3a_single_eom: run_fig3a(c, workers, b); break;
    case ScenarioId::fig3b_relative_phase: run_fig3b(c, workers, b); break;
    case ScenarioId::fig4_covariance: run_fig4(c, workers, b); break;
    case ScenarioId::analytic_table: run_analytic_table(c, workers, b); break;
    case ScenarioId::validate_pipelines: break;
  }
  b.finish();
  return r;
}

RunResult shot_calibrate(const ScenarioConfig& c, int workers) {
  c.validate();
  RunResult r;
  Bundle b(c, r);
  const auto t = shot_trace(c);
  const auto s = dsp::shot_reference(t, c.plan, workers);
  output::CsvTable tab({"freq_hz", "psd", "stderr"});
  std::vector<double> z;
  const double expect = 1.0 + t.electronic_noise_variance;
  for (size_t k = 0; k < s.size(); ++k) {
    tab.add_row(std::vector<double>{s.freqs[k], s.psd[k], s.std_err[k]});
    z.push_back((s.psd[k] - expect) / s.std_err[k]);
  }
  auto m = b.meta("shot-noise reference (vacuum source), every Welch bin");
  m["shot_seed"] = t.seed;
  m["n_segments"] = s.n_segments;
  b.csv("shot_reference.csv", tab, m);
  b.check("flat_shot_spectrum", max_abs(z) < 5.0, zdetail(max_abs(z), z.size()));
  b.finish();
  return r;
}

RunResult export_traces(const ScenarioConfig& c, int workers) {
  c.validate();
  RunResult r;
  const Physics phys{c.src, c.eoms, "configured"};
  const auto q = simulate(phys, c.trace, c.trace.seed, workers);
  const fs::path dir(c.outputs);
  fs::create_directories(dir);
  timeseries::write_trace_file(dir / "quadratures.bin", timeseries::to_trace_file(q));
  const auto i = timeseries::homodyne(q, 0.0, 0.0, c.trace, workers);
  timeseries::write_trace_file(dir / "photocurrent.bin", timeseries::to_trace_file(i, c.trace.seed));
  r.files = {dir / "quadratures.bin", dir / "photocurrent.bin"};
  output::write_json(dir / "config.json", to_json(c));
  r.files.push_back(dir / "config.json");
  return r;
}

RunResult analyze_traces(const ScenarioConfig& c, const fs::path& trace, int workers) {
  c.validate();
  const auto i = timeseries::photocurrent_from(timeseries::read_trace_file(trace));
  if (i.sample_rate != c.trace.sample_rate)
    throw ConfigError("trace.sample_rate: differs from the stored trace (" + num(i.sample_rate) + " Hz)");
  RunResult r;
  Bundle b(c, r);
  dsp::ShotReferenceCache shots;
  const auto& ref = shots.get(shot_trace(c), c.plan, workers);
  const auto s = dsp::select_bins(dsp::joint_noise_spectrum(i, Branch::difference, c.plan, ref),
                                  in_band_freqs(c.grid));
  output::CsvTable t({"freq_hz", "psd_rel_shot", "stderr", "raw_psd", "raw_stderr"});
  for (size_t k = 0; k < s.size(); ++k)
    t.add_row(std::vector<double>{s.freqs[k], s.psd[k], s.std_err[k], s.raw_psd[k], s.raw_std_err[k]});
  auto m = b.meta("joint X-difference spectrum of a stored photocurrent");
  m["trace_file"] = trace.filename().string();
  m["n_segments"] = s.n_segments;
  b.csv("analysis_spectrum.csv", t, m);
  b.finish();
  return r;
}

}  // namespace twinmod::scenarios
