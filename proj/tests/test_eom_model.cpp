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
#include "twinmod/analytic.hpp"
#include "twinmod/eom_model.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace twinmod::eom;
using twinmod::gaussian::Component;
using twinmod::gaussian::ModeGrid;
using twinmod::gaussian::Quadrature;
using Catch::Approx;
using std::numbers::pi;

namespace {

ModeGrid grid(int n_bins, int guard) {
  ModeGrid g;
  g.n_bins = n_bins;
  g.guard_bins = guard;
  return g;
}

EomSpec spec(double m, double phi, Beam beam = Beam::probe, Placement pl = Placement::beam) {
  EomSpec s;
  s.m = m;
  s.phi = phi;
  s.beam = beam;
  s.placement = pl;
  return s;
}

// Neglected sideband weight from the library Bessel functions.
double oracle_tail(double m, int n) {
  double tail = 0;
  for (int k = n + 1; k < n + 80; ++k) tail += 2 * std::pow(oracle::bessel(k, m), 2);
  return tail;
}

}  // namespace

TEST_CASE("instantaneous phase", "[eom]") {
  const double f = 2e5;
  auto s = spec(0.1 * pi, 0.0);
  CHECK(instantaneous_phase(0.0, s) == 0.0);
  CHECK(instantaneous_phase(1.0 / (4 * f), s) == Approx(0.1 * pi));
  s.placement = Placement::local_oscillator;
  CHECK(instantaneous_phase(1.0 / (4 * f), s) == Approx(-0.1 * pi));
  s.enabled = false;
  CHECK(instantaneous_phase(1.0 / (4 * f), s) == 0.0);
}

TEST_CASE("equivalent in-beam spec", "[eom]") {
  const auto beam = spec(0.3, 0.4);
  CHECK(equivalent_beam_spec(beam) == beam);

  const auto lo = spec(0.3, 0.0, Beam::conjugate, Placement::local_oscillator);
  const auto eq = equivalent_beam_spec(lo);
  CHECK(eq.placement == Placement::beam);
  CHECK(eq.m == 0.3);
  CHECK(eq.phi == Approx(pi));

  // Trajectories agree pointwise.
  for (double t = 0; t < 1e-5; t += 3.7e-7)
    CHECK(instantaneous_phase(t, eq) == Approx(instantaneous_phase(t, lo)).margin(1e-14));

  // Toggle back to LO and map again: original phase mod 2 pi.
  auto again = eq;
  again.placement = Placement::local_oscillator;
  const double phase = equivalent_beam_spec(again).phi;
  CHECK(std::remainder(phase - lo.phi, 2 * pi) == Approx(0.0).margin(1e-14));
}

TEST_CASE("truncation order", "[eom]") {
  CHECK(truncation_order(0.0, 1e-9) == 0);
  CHECK(truncation_order(0.1 * pi, 1e-9) == 4);
  // Oracle: the chosen order is the first one whose tail is below eps.
  for (double m : {0.05, 0.1 * pi, 0.5, 0.2 * pi, 1.3}) {
    const int n = truncation_order(m, 1e-9);
    CHECK(oracle_tail(m, n) < 1e-9);
    if (n > 0) CHECK(oracle_tail(m, n - 1) >= 1e-9);
  }
  int last = 0;
  for (double m = 0.0; m <= 2.0; m += 0.01) {
    const int n = truncation_order(m, 1e-9);
    CHECK(n >= last);
    last = n;
  }
  CHECK_THROWS_AS(truncation_order(-0.1, 1e-9), std::domain_error);
  CHECK_THROWS_AS(truncation_order(0.1, 0.0), std::domain_error);
}

TEST_CASE("Jacobi-Anger bin operator matches brute-force time sampling", "[eom]") {
  const ModeGrid g = grid(6, 4);
  for (auto pl : {Placement::beam, Placement::local_oscillator})
    for (double phi : {0.0, 0.9, 2.0 * pi / 3, pi}) {
      const auto s = spec(0.2 * pi, phi, Beam::conjugate, pl);
      const Eigen::MatrixXcd ja = truncated_bin_operator(s, g, 40);
      const Eigen::MatrixXcd brute = oracle::sampled_bin_operator(s, g);
      INFO("phi=" << phi);
      CHECK((ja - brute).cwiseAbs().maxCoeff() < 1e-12);
    }

  // Drive at twice the bin spacing couples every other harmonic.
  auto s2 = spec(0.4, 0.3);
  s2.f_drive = 4e5;
  const ModeGrid g2 = grid(5, 8);
  CHECK((truncated_bin_operator(s2, g2, 40) - oracle::sampled_bin_operator(s2, g2)).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("sideband coupler basics", "[eom]") {
  const ModeGrid g = grid(10, 9);
  const auto off = sideband_symplectic(spec(0.0, 0.0), g);
  CHECK(off.op.matrix.isIdentity());
  auto disabled = spec(0.3, 0.0);
  disabled.enabled = false;
  CHECK(sideband_symplectic(disabled, g).op.matrix.isIdentity());

  const auto c = sideband_symplectic(spec(0.1 * pi, 0.0), g);
  CHECK(c.n_max == 4);
  const int h = 5;
  const int x = g.index(Quadrature::X, Beam::probe, h, Component::cos);
  const int p_up = g.index(Quadrature::P, Beam::probe, h + 1, Component::sin);
  const int p_dn = g.index(Quadrature::P, Beam::probe, h - 1, Component::sin);
  CHECK(std::abs(c.op.matrix(x, p_up)) == Approx(oracle::kJ1Tenth).margin(1e-9));
  CHECK(std::abs(c.op.matrix(x, p_dn)) == Approx(oracle::kJ1Tenth).margin(1e-9));
  // Conjugate beam untouched.
  const int xc = g.index(Quadrature::X, Beam::conjugate, h, Component::cos);
  CHECK(c.op.matrix.row(xc).cwiseAbs().sum() == Approx(1.0));
}

TEST_CASE("sideband coupler is symplectic for m <= 0.5", "[eom][property]") {
  const ModeGrid g = grid(12, 9);
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> um(0.0, 0.5), uphi(-pi, 3 * pi);
  for (int trial = 0; trial < 12; ++trial) {
    const auto s = spec(um(rng), uphi(rng), trial % 2 ? Beam::probe : Beam::conjugate,
                        trial % 3 ? Placement::beam : Placement::local_oscillator);
    const auto c = sideband_symplectic(s, g);
    INFO(c.op.label);
    CHECK(twinmod::gaussian::symplectic_defect(c.op.matrix) < 1e-9);
  }
}

TEST_CASE("projection leaves in-band couplings at the Jacobi-Anger values", "[eom]") {
  const ModeGrid g = grid(20, 9);
  const auto s = spec(0.2 * pi, 0.7, Beam::probe);
  const auto c = sideband_symplectic(s, g);
  const Eigen::MatrixXcd brute = oracle::sampled_bin_operator(s, g);
  const auto layout = g.beam_layout();
  const int n = g.n_modes();
  // Couplings beyond n_max are dropped; they are bounded by J_{n_max+1}(m).
  const double dropped = oracle::bessel(c.n_max + 1, s.m);
  double worst = 0;
  for (size_t a = 0; a < layout.size(); ++a) {
    if (!g.in_band(layout[a].first)) continue;
    for (size_t b = 0; b < layout.size(); ++b) {
      const int ia = static_cast<int>(a), ib = static_cast<int>(b);
      worst = std::max(worst, std::abs(c.op.matrix(ia, ib) - brute(ia, ib).real()));
      worst = std::max(worst, std::abs(c.op.matrix(ia, n + ib) - brute(ia, ib).imag()));
    }
  }
  CHECK(worst < 2 * dropped);
  CHECK(dropped * dropped < 1e-9);
}

TEST_CASE("weak modulation is identity plus first-order sidebands", "[eom][property]") {
  const ModeGrid g = grid(8, 3);
  const double eps = 1e-4;
  const auto c = sideband_symplectic(spec(eps, 0.0), g);
  Eigen::MatrixXd diff = c.op.matrix - Eigen::MatrixXd::Identity(g.dim(), g.dim());
  // The DC mode couples with an extra sqrt(2) (its basis function is 1, not sqrt2 cos).
  const int n = g.n_modes();
  const int x_dc = g.index(Quadrature::X, Beam::probe, 0, Component::dc);
  const int p_sin1 = g.index(Quadrature::P, Beam::probe, 1, Component::sin);
  CHECK(diff(x_dc, p_sin1) == Approx(std::numbers::sqrt2 * oracle::bessel(1, eps)).epsilon(1e-6));
  for (int q : {x_dc, n + x_dc}) {
    diff.row(q).setZero();
    diff.col(q).setZero();
  }
  CHECK(diff.cwiseAbs().maxCoeff() == Approx(oracle::bessel(1, eps)).epsilon(1e-6));
  CHECK(oracle::bessel(1, eps) == Approx(eps / 2).epsilon(1e-8));
}

TEST_CASE("coupler preconditions", "[eom]") {
  CHECK_THROWS_AS(sideband_symplectic(spec(0.5, 0.0), grid(5, 2)), std::invalid_argument);
  auto s = spec(0.1, 0.0);
  s.f_drive = 3e5;
  CHECK_THROWS_AS(sideband_symplectic(s, grid(5, 6)), std::invalid_argument);
  s.f_drive = -1;
  CHECK_THROWS_AS(sideband_symplectic(s, grid(5, 6)), std::domain_error);
}
