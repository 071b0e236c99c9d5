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

#include "twinmod/analytic.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace twinmod::analytic {

void SourceSpec::validate() const {
  if (!std::isfinite(gain) || gain < 1.0)
    throw std::domain_error("source gain must be >= 1, got " + std::to_string(gain));
  if (!(eta >= 0.0 && eta <= 1.0))
    throw std::domain_error("source loss eta must lie in [0, 1], got " + std::to_string(eta));
}

namespace {

// Series cutoff: stop once a term no longer moves the sum at double precision.
constexpr double kSeriesRelTol = 1e-17;
constexpr double kSeriesLimit = 8.0;

double bessel_series(int n, double x) {
  const double half = 0.5 * x;
  double term = 1.0;
  for (int i = 1; i <= n; ++i) term *= half / i;
  if (term == 0.0) return 0.0;

  const double q = -half * half;
  double sum = term;
  for (int k = 1; k < 200; ++k) {
    term *= q / (static_cast<double>(k) * static_cast<double>(k + n));
    sum += term;
    if (std::abs(term) < kSeriesRelTol * std::abs(sum)) break;
  }
  return sum;
}

}  // namespace

double bessel_j(int n, double x) {
  if (!std::isfinite(x)) throw std::domain_error("bessel_j: non-finite argument");
  if (n < 0) return (n % 2 == 0 ? 1.0 : -1.0) * bessel_j(-n, x);
  if (std::abs(x) < kSeriesLimit) return bessel_series(n, x);
  // Outside the series' well-conditioned range; not reached by the physics here.
  const double sign = (x < 0 && n % 2 == 1) ? -1.0 : 1.0;
  return sign * std::cyl_bessel_j(static_cast<double>(n), std::abs(x));
}

double effective_index(double m_p, double m_c, double phi) {
  const double r = m_p * m_p + m_c * m_c + 2.0 * m_p * m_c * std::cos(phi);
  return r > 0.0 ? std::sqrt(r) : 0.0;
}

double joint_noise(const SourceSpec& src, double m_p, double m_c, double phi) {
  src.validate();
  if (m_p < 0.0 || m_c < 0.0) throw std::domain_error("joint_noise: modulation index must be >= 0");
  const double G = src.gain;
  const double g = src.g();
  const double keep = 1.0 - src.eta;
  return (G * G + g * g) * keep + src.eta -
         2.0 * g * G * keep * bessel_j(0, effective_index(m_p, m_c, phi));
}

double joint_noise_equal(const SourceSpec& src, double m, double phi) {
  src.validate();
  if (m < 0.0) throw std::domain_error("joint_noise_equal: modulation index must be >= 0");
  const double G = src.gain;
  const double g = src.g();
  const double keep = 1.0 - src.eta;
  const double radicand = 2.0 + 2.0 * std::cos(phi);
  const double arg = m * std::sqrt(radicand > 0.0 ? radicand : 0.0);
  return (G * G + g * g) * keep + src.eta - 2.0 * g * G * keep * bessel_j(0, arg);
}

double phase_sweep_noise(const SourceSpec& src, double theta, Branch branch) {
  src.validate();
  const double G = src.gain;
  const double g = src.g();
  const double keep = 1.0 - src.eta;
  const double sign = branch == Branch::difference ? -1.0 : 1.0;
  return (G * G + g * g) * keep + src.eta + sign * 2.0 * g * G * keep * std::cos(theta);
}

double to_db(double ratio) {
  if (!(ratio > 0.0)) throw std::domain_error("to_db: ratio must be positive");
  return 10.0 * std::log10(ratio);
}

}  // namespace twinmod::analytic
