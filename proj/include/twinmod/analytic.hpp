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

#include <cmath>

namespace twinmod::analytic {

/// Parameters of the twin-beam source: amplitude gain G of the parametric
/// amplifier and the total loss fraction applied to each beam.
struct SourceSpec {
  double gain = std::sqrt(3.0);
  double eta = 0.0;

  /// Conjugate amplitude g = sqrt(G^2 - 1).
  double g() const { return std::sqrt(gain * gain - 1.0); }
  void validate() const;
};

enum class Branch { difference, sum };

/// Bessel function of the first kind J_n(x), integer order n >= 0 (negative
/// orders use J_{-n} = (-1)^n J_n). Ascending power series for |x| < 8.
double bessel_j(int n, double x);

/// sqrt(m_p^2 + m_c^2 + 2 m_p m_c cos(phi)); clamps a rounding-negative
/// radicand to zero.
double effective_index(double m_p, double m_c, double phi);

/// Period-averaged joint X-difference noise in shot-noise units:
///   (G^2+g^2)(1-eta) + eta - 2gG(1-eta) J0(effective_index(m_p, m_c, phi)).
double joint_noise(const SourceSpec& src, double m_p, double m_c, double phi);

/// Equal-index form, J0 argument m*sqrt(2 + 2 cos phi).
double joint_noise_equal(const SourceSpec& src, double m, double phi);

/// Joint quadrature noise vs. total LO phase theta with modulators off.
double phase_sweep_noise(const SourceSpec& src, double theta, Branch branch);

/// 10 log10(ratio). Throws std::domain_error for ratio <= 0.
double to_db(double ratio);

}  // namespace twinmod::analytic
