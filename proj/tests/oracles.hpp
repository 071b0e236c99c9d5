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

// Test-only reference computations. Nothing here calls into the code paths it
// is used to check: Bessel values come from libstdc++'s special functions and
// bin-space operators from brute-force time sampling.

#include "twinmod/eom_model.hpp"
#include "twinmod/gaussian_core.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

inline double bessel(int n, double x) {
  if (n < 0) return (n % 2 == 0 ? 1.0 : -1.0) * bessel(-n, x);
  return std::cyl_bessel_j(static_cast<double>(n), x);
}

/// Frozen values computed with mpmath at 30 digits.
inline constexpr double kSqueezedVar = 0.101020514433643803605;    // (sqrt3 - sqrt2)^2
inline constexpr double kAntiSqueezedVar = 9.89897948556635619639;  // (sqrt3 + sqrt2)^2
inline constexpr double kLossy02Var = 0.280816411546915058473;      // with eta = 0.2
inline constexpr double kJ1Tenth = 0.155149693283655047041;         // J1(0.1 pi)
inline constexpr double kJ0Fifth = 0.903712642092466301737;         // J0(0.2 pi)
inline constexpr double kInPhaseNoise = 0.572730305542036860125;    // 5 - 2 sqrt6 J0(0.2 pi)
inline constexpr double kSingleEomNoise = 0.221154396179419980;     // m_eff = 0.1 pi, eta 0

/// Multiplication by exp(i theta(t)) on the grid's real Fourier basis, by
/// direct time sampling over one period of the bin spacing.
inline Eigen::MatrixXcd sampled_bin_operator(const twinmod::eom::EomSpec& spec,
                                             const twinmod::gaussian::ModeGrid& grid,
                                             int samples = 8192) {
  using twinmod::gaussian::Component;
  const auto layout = grid.beam_layout();
  const auto n = static_cast<Eigen::Index>(layout.size());
  const double period = 1.0 / grid.bin_spacing;
  Eigen::MatrixXd basis(n, samples);
  Eigen::VectorXcd phase(samples);
  for (int k = 0; k < samples; ++k) {
    const double t = period * k / samples;
    const double theta =
        (spec.enabled ? spec.m : 0.0) * std::sin(2 * std::numbers::pi * spec.f_drive * t + spec.phi) *
        (spec.placement == twinmod::eom::Placement::local_oscillator ? -1.0 : 1.0);
    phase(k) = std::polar(1.0, theta);
    for (Eigen::Index a = 0; a < n; ++a) {
      const auto [h, c] = layout[static_cast<size_t>(a)];
      const double arg = 2 * std::numbers::pi * h * k / samples;
      basis(a, k) = c == Component::dc    ? 1.0
                    : c == Component::cos ? std::numbers::sqrt2 * std::cos(arg)
                                          : std::numbers::sqrt2 * std::sin(arg);
    }
  }
  Eigen::MatrixXcd out(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) {
      std::complex<double> acc = 0;
      for (int k = 0; k < samples; ++k) acc += basis(a, k) * basis(b, k) * phase(k);
      out(a, b) = acc / static_cast<double>(samples);
    }
  return out;
}

/// Random physical covariance: random symplectic-orthogonal scrambling of a
/// product of single-mode squeezed thermal states.
inline Eigen::MatrixXd random_physical_cov(int n_modes, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(2 * n_modes, 2 * n_modes);
  for (int k = 0; k < n_modes; ++k) {
    const double nu = 1.0 + 2.0 * u(rng);
    const double r = 0.8 * u(rng);
    c(k, k) = nu * std::exp(2 * r);
    c(n_modes + k, n_modes + k) = nu * std::exp(-2 * r);
  }
  // Passive (orthogonal symplectic) mixing from a random unitary.
  Eigen::MatrixXcd z(n_modes, n_modes);
  std::normal_distribution<double> nd;
  for (int i = 0; i < n_modes; ++i)
    for (int j = 0; j < n_modes; ++j) z(i, j) = {nd(rng), nd(rng)};
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(z);
  const Eigen::MatrixXcd q = qr.householderQ();
  Eigen::MatrixXd o(2 * n_modes, 2 * n_modes);
  o << q.real(), q.imag(), -q.imag(), q.real();
  return o * c * o.transpose();
}

}  // namespace oracle
