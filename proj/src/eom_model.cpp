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

#include "twinmod/eom_model.hpp"

#include "twinmod/analytic.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace twinmod::eom {

using gaussian::Component;
using gaussian::ModeGrid;

const char* to_string(Placement p) {
  return p == Placement::beam ? "beam" : "local_oscillator";
}

void EomSpec::validate() const {
  if (!(m >= 0.0) || !std::isfinite(m)) throw std::domain_error("eom: modulation index must be >= 0");
  if (!(f_drive > 0.0) || !std::isfinite(f_drive)) throw std::domain_error("eom: f_drive must be > 0");
  if (!std::isfinite(phi)) throw std::domain_error("eom: drive phase must be finite");
}

double instantaneous_phase(double t, const EomSpec& spec) {
  if (!spec.enabled) return 0.0;
  const double theta = spec.m * std::sin(2.0 * std::numbers::pi * spec.f_drive * t + spec.phi);
  return spec.placement == Placement::local_oscillator ? -theta : theta;
}

EomSpec equivalent_beam_spec(const EomSpec& spec) {
  if (spec.placement == Placement::beam) return spec;
  EomSpec out = spec;
  out.placement = Placement::beam;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  out.phi = std::fmod(spec.phi + std::numbers::pi, two_pi);
  if (out.phi < 0.0) out.phi += two_pi;
  return out;
}

double effective_index(double m_p, double m_c, double phi) {
  return analytic::effective_index(m_p, m_c, phi);
}

int truncation_order(double m, double eps) {
  if (!(m >= 0.0)) throw std::domain_error("truncation_order: m must be >= 0");
  if (!(eps > 0.0 && eps < 1.0)) throw std::domain_error("truncation_order: eps must lie in (0, 1)");
  // Sum the neglected tail directly; 1 - sum(J_k^2) cancels badly near eps.
  for (int n = 0;; ++n) {
    double tail = 0.0;
    for (int k = n + 1; k < n + 200; ++k) {
      const double j = analytic::bessel_j(k, m);
      tail += 2.0 * j * j;
      if (j * j < 1e-40 && k > m + 2) break;
    }
    if (tail < eps) return n;
  }
}

int drive_harmonic(const EomSpec& spec, const ModeGrid& grid) {
  const double ratio = spec.f_drive / grid.bin_spacing;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * ratio)
    throw std::invalid_argument("eom: f_drive must be an integer multiple of the bin spacing");
  return static_cast<int>(rounded);
}

namespace {

// Fourier content of a real periodic multiplier g(t):
//   cos_part[n] = <g cos(n w t)>,  sin_part[n] = <g sin(n w t)>  (time averages)
// with n counted in grid harmonics.
struct Multiplier {
  std::vector<double> cos_part;
  std::vector<double> sin_part;

  double c(int n) const {
    const auto k = static_cast<size_t>(std::abs(n));
    return k < cos_part.size() ? cos_part[k] : 0.0;
  }
  double s(int n) const {
    const auto k = static_cast<size_t>(std::abs(n));
    if (k >= sin_part.size()) return 0.0;
    return n < 0 ? -sin_part[k] : sin_part[k];
  }
};

// <a| g |b> on the orthonormal basis {1, sqrt2 cos(h w t), sqrt2 sin(h w t)}.
double matrix_element(const Multiplier& g, int ha, Component ca, int hb, Component cb) {
  constexpr double r2 = std::numbers::sqrt2;
  if (ca == Component::dc && cb == Component::dc) return g.c(0);
  if (ca == Component::dc) return r2 * (cb == Component::cos ? g.c(hb) : g.s(hb));
  if (cb == Component::dc) return r2 * (ca == Component::cos ? g.c(ha) : g.s(ha));
  if (ca == Component::cos && cb == Component::cos) return g.c(ha - hb) + g.c(ha + hb);
  if (ca == Component::sin && cb == Component::sin) return g.c(ha - hb) - g.c(ha + hb);
  if (ca == Component::cos) return g.s(hb + ha) + g.s(hb - ha);
  return g.s(ha + hb) + g.s(ha - hb);
}

}  // namespace

Eigen::MatrixXcd truncated_bin_operator(const EomSpec& spec, const ModeGrid& grid, int n_max) {
  spec.validate();
  grid.validate();
  const EomSpec eff = equivalent_beam_spec(spec);
  const int d = drive_harmonic(eff, grid);
  const int span = 2 * grid.highest_harmonic() + 1;

  // cos(theta) = J0 + 2 sum_{even l} J_l cos(l u),  sin(theta) = 2 sum_{odd l} J_l sin(l u),
  // u = w_d t + phi.
  Multiplier cos_theta{std::vector<double>(static_cast<size_t>(span), 0.0),
                       std::vector<double>(static_cast<size_t>(span), 0.0)};
  Multiplier sin_theta = cos_theta;
  const double m = eff.enabled ? eff.m : 0.0;
  cos_theta.cos_part[0] = analytic::bessel_j(0, m);
  for (int l = 1; l <= n_max && l * d < span; ++l) {
    const double jl = analytic::bessel_j(l, m);
    const auto idx = static_cast<size_t>(l * d);
    if (l % 2 == 0) {
      cos_theta.cos_part[idx] = jl * std::cos(l * eff.phi);
      cos_theta.sin_part[idx] = -jl * std::sin(l * eff.phi);
    } else {
      sin_theta.cos_part[idx] = jl * std::sin(l * eff.phi);
      sin_theta.sin_part[idx] = jl * std::cos(l * eff.phi);
    }
  }

  const auto layout = grid.beam_layout();
  const auto n = static_cast<Eigen::Index>(layout.size());
  Eigen::MatrixXcd u(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    const auto [ha, ca] = layout[static_cast<size_t>(a)];
    for (Eigen::Index b = 0; b < n; ++b) {
      const auto [hb, cb] = layout[static_cast<size_t>(b)];
      u(a, b) = {matrix_element(cos_theta, ha, ca, hb, cb),
                 matrix_element(sin_theta, ha, ca, hb, cb)};
    }
  }
  return u;
}

SidebandCoupler sideband_symplectic(const EomSpec& spec, const ModeGrid& grid, double eps) {
  spec.validate();
  grid.validate();
  SidebandCoupler out;
  out.spec = spec;
  const int dim = grid.dim();
  out.op.matrix = Eigen::MatrixXd::Identity(dim, dim);

  const int d = drive_harmonic(spec, grid);
  if (!spec.active()) {
    out.op.label = "eom(off)";
    return out;
  }
  out.n_max = truncation_order(spec.m, eps);
  if (grid.guard_bins < out.n_max * d)
    throw std::invalid_argument("eom: grid needs at least " + std::to_string(out.n_max * d) +
                                " guard bins for m=" + std::to_string(spec.m));

  const Eigen::MatrixXcd u = truncated_bin_operator(spec, grid, out.n_max);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(u, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::MatrixXcd w = svd.matrixU() * svd.matrixV().adjoint();
  out.projection_size = (w - u).cwiseAbs().maxCoeff();

  const int per = grid.modes_per_beam();
  const int n = grid.n_modes();
  const int x0 = static_cast<int>(spec.beam) * per;
  const int p0 = n + x0;
  out.op.matrix.block(x0, x0, per, per) = w.real();
  out.op.matrix.block(x0, p0, per, per) = w.imag();
  out.op.matrix.block(p0, x0, per, per) = -w.imag();
  out.op.matrix.block(p0, p0, per, per) = w.real();

  char buf[192];
  std::snprintf(buf, sizeof buf, "eom(%s,%s,m=%.6g,phi=%.6g,n_max=%d,projection=%.3g)",
                gaussian::to_string(spec.beam), to_string(spec.placement), spec.m, spec.phi,
                out.n_max, out.projection_size);
  out.op.label = buf;
  return out;
}

}  // namespace twinmod::eom
