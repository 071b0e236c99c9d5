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

#include "oracles.hpp"
#include "twinmod/errors.hpp"
#include "twinmod/timeseries.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <numbers>

using namespace twinmod::timeseries;
using twinmod::analytic::Branch;
using twinmod::eom::EomSpec;
using twinmod::eom::Placement;
using twinmod::gaussian::Beam;
using Catch::Approx;
using std::numbers::pi;

namespace {

TraceConfig small_cfg(std::int64_t n = 200'000, std::uint64_t seed = 5) {
  TraceConfig c;
  c.n_samples = n;
  c.seed = seed;
  return c;
}

EomSpec eom(double m, double phi, Beam beam, Placement pl = Placement::beam) {
  EomSpec s;
  s.m = m;
  s.phi = phi;
  s.beam = beam;
  s.placement = pl;
  return s;
}

double mean(const std::vector<double>& x) {
  double s = 0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double var(const std::vector<double>& x) {
  const double mu = mean(x);
  double s = 0;
  for (double v : x) s += (v - mu) * (v - mu);
  return s / static_cast<double>(x.size() - 1);
}

double cov(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = mean(a), mb = mean(b);
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
  return s / static_cast<double>(a.size() - 1);
}

// 5 sigma band for a Gaussian sample variance.
double var_tol(double v, size_t n) { return 5.0 * v * std::sqrt(2.0 / static_cast<double>(n)); }

}  // namespace

TEST_CASE("synthesis is deterministic and worker-count independent", "[timeseries]") {
  const auto cfg = small_cfg(150'001);
  const auto a = synthesize_source(cfg, 1);
  const auto b = synthesize_source(cfg, 4);
  CHECK(a.xp == b.xp);
  CHECK(a.pc == b.pc);
  CHECK(a.size() == 150'001);
  auto other = cfg;
  other.seed = 6;
  CHECK(synthesize_source(other).xp != a.xp);

  // Chunk prefix property: a shorter trace is a prefix of a longer one.
  const auto shorter = synthesize_source(small_cfg(70'000), 2);
  CHECK(std::equal(shorter.xp.begin(), shorter.xp.end(), a.xp.begin()));

  CHECK(apply_loss_traces(a, 0.3, 9, 1).xc == apply_loss_traces(a, 0.3, 9, 3).xc);
}

TEST_CASE("flat source second moments", "[timeseries]") {
  const auto cfg = small_cfg();
  const auto t = synthesize_source(cfg, 2);
  const double G = cfg.src.gain, g = cfg.src.g();
  const size_t n = t.size();
  const double v = G * G + g * g;
  CHECK(std::abs(var(t.xp) - v) < var_tol(v, n));
  CHECK(std::abs(var(t.pc) - v) < var_tol(v, n));
  CHECK(std::abs(cov(t.xp, t.xc) - 2 * G * g) < var_tol(v, n));
  CHECK(std::abs(cov(t.pp, t.pc) + 2 * G * g) < var_tol(v, n));
  CHECK(std::abs(cov(t.xp, t.pc)) < var_tol(v, n));

  const auto i = homodyne(t, 0, 0, cfg);
  const auto d = joint_current(i, Branch::difference);
  CHECK(std::abs(var(d) - oracle::kSqueezedVar) < var_tol(oracle::kSqueezedVar, n));
  const auto s = joint_current(i, Branch::sum);
  CHECK(std::abs(var(s) - oracle::kAntiSqueezedVar) < var_tol(oracle::kAntiSqueezedVar, n));
}

TEST_CASE("modulator pairs: in phase adds, out of phase cancels", "[timeseries]") {
  const auto cfg = small_cfg();
  const auto src = synthesize_source(cfg, 2);
  const size_t n = src.size();
  const double m = 0.1 * pi;

  const auto in_phase = apply_eom(src, eom(m, 0, Beam::probe), eom(m, 0, Beam::conjugate));
  const double v_in = var(joint_current(homodyne(in_phase, 0, 0, cfg), Branch::difference));
  CHECK(std::abs(v_in - oracle::kInPhaseNoise) < var_tol(oracle::kInPhaseNoise, n));

  // Opposite phases give theta_p + theta_c = 0 at every sample: exact cancellation.
  const auto out = apply_eom(src, eom(m, 0, Beam::probe), eom(m, pi, Beam::conjugate));
  const auto d_out = joint_current(homodyne(out, 0, 0, cfg), Branch::difference);
  const auto d_src = joint_current(homodyne(src, 0, 0, cfg), Branch::difference);
  CHECK(std::abs(var(d_out) - var(d_src)) < 1e-9 * var(d_src) + 1e-3);

  const auto single = apply_eom(src, eom(m, 0, Beam::probe), eom(0, 0, Beam::conjugate));
  const double v_single = var(joint_current(homodyne(single, 0, 0, cfg), Branch::difference));
  CHECK(std::abs(v_single - oracle::kSingleEomNoise) < var_tol(oracle::kSingleEomNoise, n));
}

TEST_CASE("LO placement equals in-beam modulation at phase + pi", "[timeseries]") {
  const auto src = synthesize_source(small_cfg(20'000), 1);
  const EomSpec lo = eom(0.3, 0.4, Beam::conjugate, Placement::local_oscillator);
  const EomSpec beam = eom(0.3, 0.4 + pi, Beam::conjugate);
  const EomSpec off = eom(0, 0, Beam::probe);
  const auto a = apply_eom(src, off, lo);
  const auto b = apply_eom(src, off, beam);
  double worst = 0;
  for (size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.pc[i] - b.pc[i]));
  CHECK(worst < 1e-12);
  CHECK(a.xp == src.xp);
}

TEST_CASE("modulators on one beam compose additively", "[timeseries]") {
  const auto src = synthesize_source(small_cfg(10'000), 3);
  const EomSpec a = eom(0.2, 0.1, Beam::probe), b = eom(0.15, 1.2, Beam::probe);
  const EomSpec both[] = {a, b};
  const auto joint = apply_eoms(src, both);
  const EomSpec first[] = {a}, second[] = {b};
  const auto seq = apply_eoms(apply_eoms(src, first), second);
  double worst = 0;
  for (size_t i = 0; i < src.size(); ++i) worst = std::max(worst, std::abs(joint.xp[i] - seq.xp[i]));
  CHECK(worst < 1e-12);
  CHECK(joint.transforms.size() == src.transforms.size() + 2);
}

TEST_CASE("modulation needs an integer number of samples per drive period", "[timeseries]") {
  auto src = synthesize_source(small_cfg(1000), 1);
  EomSpec s = eom(0.1, 0, Beam::probe);
  s.f_drive = 3e5;
  const EomSpec off = eom(0, 0, Beam::conjugate);
  CHECK_THROWS_AS(apply_eom(src, s, off), std::invalid_argument);
  CHECK_THROWS_AS(apply_eom(src, off, s), std::invalid_argument);
}

TEST_CASE("loss mixes in vacuum", "[timeseries]") {
  const auto cfg = small_cfg();
  const auto src = synthesize_source(cfg, 2);
  const auto lossy = apply_loss_traces(src, 0.2, 77, 2);
  const auto d = joint_current(homodyne(lossy, 0, 0, cfg), Branch::difference);
  CHECK(std::abs(var(d) - oracle::kLossy02Var) < var_tol(oracle::kLossy02Var, d.size()));
  CHECK(apply_loss_traces(src, 0.0, 77).xp == src.xp);
  const auto dark = apply_loss_traces(src, 1.0, 77);
  CHECK(std::abs(var(dark.xp) - 1.0) < var_tol(1.0, d.size()));
  CHECK_THROWS_AS(apply_loss_traces(src, 1.2, 1), std::domain_error);
}

TEST_CASE("residual delay and electronic noise", "[timeseries]") {
  auto cfg = small_cfg();
  const auto src = synthesize_source(cfg, 2);
  const double v = oracle::kAntiSqueezedVar + oracle::kSqueezedVar;  // 2 (G^2 + g^2)

  cfg.delay_samples = 3;
  cfg.compensation_samples = 1;
  const auto shifted = homodyne(src, 0, 0, cfg);
  CHECK(shifted.conjugate[2] == src.xc[0]);
  // Uncorrelated once misaligned: variance is the single-beam level.
  const double vd = var(joint_current(shifted, Branch::difference));
  CHECK(std::abs(vd - v / 2) < var_tol(v / 2, src.size()));

  cfg.delay_samples = 1;
  cfg.electronic_noise_variance = 0.1;
  const auto noisy = homodyne(src, 0, 0, cfg);
  const double vn = var(joint_current(noisy, Branch::difference));
  CHECK(std::abs(vn - oracle::kSqueezedVar - 0.1) < var_tol(0.2, src.size()));

  cfg.delay_samples = static_cast<int>(cfg.n_samples) + 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("Lorentzian profile tends to the flat source", "[timeseries]") {
  auto cfg = small_cfg(4096);
  const auto flat = synthesize_source(cfg);
  cfg.gain_profile.kind = ProfileKind::lorentzian;
  cfg.gain_profile.half_width_hz = 1e14;
  const auto wide = synthesize_source(cfg);
  double worst = 0;
  for (size_t i = 0; i < flat.size(); ++i) worst = std::max(worst, std::abs(flat.xp[i] - wide.xp[i]));
  CHECK(worst < 1e-9);

  // Narrow profile: squeezing survives near DC only, so the broadband
  // variance is much closer to vacuum.
  cfg.n_samples = 100'000;
  cfg.gain_profile.half_width_hz = 1e6;
  const auto narrow = synthesize_source(cfg);
  const double v = var(narrow.xp);
  CHECK(v > 1.0);
  CHECK(v < 1.5);
}

TEST_CASE("trace files round-trip", "[timeseries][io]") {
  const auto dir = std::filesystem::temp_directory_path() / "twinmod_trace_test";
  std::filesystem::create_directories(dir);
  const auto cfg = small_cfg(1234);
  auto t = synthesize_source(cfg);
  t = apply_eom(t, eom(0.2, 0.5, Beam::probe), eom(0, 0, Beam::conjugate));
  write_trace_file(dir / "q.bin", to_trace_file(t));
  const auto back = read_trace_file(dir / "q.bin");
  CHECK(back.sample_rate == t.sample_rate);
  CHECK(back.seed == t.seed);
  REQUIRE(back.channels.size() == 4);
  CHECK(back.data[0] == t.xp);
  CHECK(back.data[3] == t.pc);
  CHECK(back.transforms == t.transforms);

  const auto i = homodyne(t, 0.1, 0.2, cfg);
  write_trace_file(dir / "i.bin", to_trace_file(i, cfg.seed));
  const auto pc = photocurrent_from(read_trace_file(dir / "i.bin"));
  CHECK(pc.probe == i.probe);
  CHECK(pc.conjugate == i.conjugate);
  CHECK_THROWS_AS(photocurrent_from(back), std::invalid_argument);

  CHECK_THROWS_AS(read_trace_file(dir / "missing.bin"), twinmod::IoError);
  std::filesystem::remove_all(dir);
}
