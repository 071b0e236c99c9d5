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

#include "twinmod/gaussian_core.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <stdexcept>

namespace twinmod::gaussian {

const char* to_string(Beam b) { return b == Beam::probe ? "probe" : "conjugate"; }

const char* to_string(Component c) {
  switch (c) {
    case Component::dc: return "dc";
    case Component::cos: return "cos";
    case Component::sin: return "sin";
  }
  return "?";
}

void ModeGrid::validate() const {
  if (n_bins < 1) throw std::invalid_argument("grid.n_bins must be >= 1");
  if (!(bin_spacing > 0.0) || !std::isfinite(bin_spacing))
    throw std::invalid_argument("grid.bin_spacing must be > 0");
  if (!(start_freq >= bin_spacing))
    throw std::invalid_argument("grid.start_freq must be >= bin_spacing (no DC bin)");
  const double ratio = start_freq / bin_spacing;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
    throw std::invalid_argument("grid.start_freq must be an integer multiple of bin_spacing");
  if (guard_bins < 0) throw std::invalid_argument("grid.guard_bins must be >= 0");
}

int ModeGrid::first_harmonic() const {
  return static_cast<int>(std::lround(start_freq / bin_spacing));
}

int ModeGrid::lowest_harmonic() const { return std::max(0, first_harmonic() - guard_bins); }

int ModeGrid::modes_per_beam() const {
  const int lo = lowest_harmonic();
  const int count = highest_harmonic() - lo + 1;
  return lo == 0 ? 2 * count - 1 : 2 * count;
}

int ModeGrid::mode(Beam beam, int harmonic, Component comp) const {
  const int lo = lowest_harmonic();
  if (harmonic < lo || harmonic > highest_harmonic())
    throw std::out_of_range("harmonic " + std::to_string(harmonic) + " outside grid");
  if ((harmonic == 0) != (comp == Component::dc))
    throw std::out_of_range("DC component exists only at harmonic 0");
  const int s = comp == Component::sin ? 1 : 0;
  const int local = lo == 0 ? (harmonic == 0 ? 0 : 1 + 2 * (harmonic - 1) + s)
                            : 2 * (harmonic - lo) + s;
  return static_cast<int>(beam) * modes_per_beam() + local;
}

int ModeGrid::index(Quadrature q, Beam beam, int harmonic, Component comp) const {
  return (q == Quadrature::X ? 0 : n_modes()) + mode(beam, harmonic, comp);
}

std::vector<std::pair<int, Component>> ModeGrid::beam_layout() const {
  std::vector<std::pair<int, Component>> out;
  out.reserve(static_cast<size_t>(modes_per_beam()));
  for (int h = lowest_harmonic(); h <= highest_harmonic(); ++h) {
    if (h == 0) {
      out.emplace_back(0, Component::dc);
    } else {
      out.emplace_back(h, Component::cos);
      out.emplace_back(h, Component::sin);
    }
  }
  return out;
}

namespace {

std::string format_freq(double hz) {
  char buf[64];
  if (hz >= 1e6)
    std::snprintf(buf, sizeof buf, "%gMHz", hz / 1e6);
  else if (hz >= 1e3)
    std::snprintf(buf, sizeof buf, "%gkHz", hz / 1e3);
  else
    std::snprintf(buf, sizeof buf, "%gHz", hz);
  return buf;
}

void require_square_dim(const Eigen::MatrixXd& m, int dim, const char* what) {
  if (m.rows() != dim || m.cols() != dim)
    throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

}  // namespace

std::string ModeGrid::label(int quadrature_index) const {
  if (quadrature_index < 0 || quadrature_index >= dim())
    throw std::out_of_range("quadrature index outside grid");
  const bool is_p = quadrature_index >= n_modes();
  const int m = quadrature_index % n_modes();
  const bool conj = m >= modes_per_beam();
  const auto [h, comp] = beam_layout()[static_cast<size_t>(m % modes_per_beam())];
  std::string out = is_p ? "P" : "X";
  out += conj ? "c@" : "p@";
  out += format_freq(frequency(h));
  out += comp == Component::sin ? "/s" : "/c";
  return out;
}

Eigen::MatrixXd symplectic_form(int n_modes) {
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(2 * n_modes, 2 * n_modes);
  omega.topRightCorner(n_modes, n_modes).setIdentity();
  omega.bottomLeftCorner(n_modes, n_modes) = -Eigen::MatrixXd::Identity(n_modes, n_modes);
  return omega;
}

double symplectic_defect(const Eigen::MatrixXd& s) {
  if (s.rows() != s.cols() || s.rows() % 2 != 0)
    throw std::invalid_argument("symplectic_defect: matrix must be square with even size");
  const Eigen::MatrixXd omega = symplectic_form(static_cast<int>(s.rows() / 2));
  return (s * omega * s.transpose() - omega).cwiseAbs().maxCoeff();
}

CovMatrix vacuum_cov(const ModeGrid& grid) {
  grid.validate();
  return {grid, Eigen::MatrixXd::Identity(grid.dim(), grid.dim())};
}

SymplecticOp tmsv_symplectic(double gain, int probe_mode, int conjugate_mode,
                             const ModeGrid& grid) {
  if (!(gain >= 1.0) || !std::isfinite(gain))
    throw std::domain_error("tmsv_symplectic: gain must be >= 1");
  const int n = grid.n_modes();
  if (probe_mode < 0 || probe_mode >= n || conjugate_mode < 0 || conjugate_mode >= n)
    throw std::out_of_range("tmsv_symplectic: mode outside grid");
  if (probe_mode == conjugate_mode)
    throw std::invalid_argument("tmsv_symplectic: modes must be distinct");

  const double g = std::sqrt(gain * gain - 1.0);
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(2 * n, 2 * n);
  const int xp = probe_mode, xc = conjugate_mode, pp = n + probe_mode, pc = n + conjugate_mode;
  s(xp, xp) = gain; s(xp, xc) = g;
  s(xc, xc) = gain; s(xc, xp) = g;
  s(pp, pp) = gain; s(pp, pc) = -g;
  s(pc, pc) = gain; s(pc, pp) = -g;
  return {std::move(s), "tmsv(G=" + std::to_string(gain) + ")"};
}

SymplecticOp source_symplectic(double gain, const ModeGrid& grid) {
  grid.validate();
  if (!(gain >= 1.0) || !std::isfinite(gain))
    throw std::domain_error("source_symplectic: gain must be >= 1");
  const double g = std::sqrt(gain * gain - 1.0);
  const int n = grid.n_modes();
  const int per = grid.modes_per_beam();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (int k = 0; k < per; ++k) {
    const int xp = k, xc = per + k, pp = n + k, pc = n + per + k;
    s(xp, xp) = gain; s(xp, xc) = g;
    s(xc, xc) = gain; s(xc, xp) = g;
    s(pp, pp) = gain; s(pp, pc) = -g;
    s(pc, pc) = gain; s(pc, pp) = -g;
  }
  return {std::move(s), "tmsv_all(G=" + std::to_string(gain) + ")"};
}

SymplecticOp quadrature_rotation(double theta, int mode, const ModeGrid& grid) {
  if (!std::isfinite(theta)) throw std::domain_error("quadrature_rotation: non-finite angle");
  const int n = grid.n_modes();
  if (mode < 0 || mode >= n) throw std::out_of_range("quadrature_rotation: mode outside grid");
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(2 * n, 2 * n);
  const double c = std::cos(theta), sn = std::sin(theta);
  s(mode, mode) = c;
  s(mode, n + mode) = sn;
  s(n + mode, mode) = -sn;
  s(n + mode, n + mode) = c;
  return {std::move(s), "rot(" + std::to_string(theta) + ")"};
}

SymplecticOp compose(const SymplecticOp& second, const SymplecticOp& first) {
  if (second.matrix.rows() != first.matrix.rows())
    throw std::invalid_argument("compose: dimension mismatch");
  return {second.matrix * first.matrix, second.label + " * " + first.label};
}

CovMatrix apply_symplectic(const CovMatrix& c, const SymplecticOp& s) {
  require_square_dim(s.matrix, static_cast<int>(c.data.rows()), "apply_symplectic");
  require_square_dim(c.data, c.grid.dim(), "apply_symplectic");
  Eigen::MatrixXd sc;
  sc.noalias() = s.matrix * c.data;
  Eigen::MatrixXd out;
  out.noalias() = sc * s.matrix.transpose();
  const Eigen::MatrixXd sym = 0.5 * (out + out.transpose());
  return {c.grid, sym};
}

CovMatrix apply_loss(const CovMatrix& c, std::span<const int> modes, double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::domain_error("apply_loss: eta must lie in [0, 1]");
  const int n = c.grid.n_modes();
  require_square_dim(c.data, 2 * n, "apply_loss");
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(2 * n);
  Eigen::VectorXd added = Eigen::VectorXd::Zero(2 * n);
  const double keep = std::sqrt(1.0 - eta);
  for (int m : modes) {
    if (m < 0 || m >= n) throw std::out_of_range("apply_loss: mode outside grid");
    scale(m) = scale(n + m) = keep;
    added(m) = added(n + m) = eta;
  }
  CovMatrix out{c.grid, scale.asDiagonal() * c.data * scale.asDiagonal()};
  out.data.diagonal() += added;
  return out;
}

CovMatrix apply_loss_all(const CovMatrix& c, double eta) {
  std::vector<int> modes(static_cast<size_t>(c.grid.n_modes()));
  for (size_t i = 0; i < modes.size(); ++i) modes[i] = static_cast<int>(i);
  return apply_loss(c, modes, eta);
}

double joint_variance(const CovMatrix& c, const Eigen::VectorXd& coeffs) {
  if (coeffs.size() != c.data.rows())
    throw std::invalid_argument("joint_variance: coefficient length mismatch");
  const double norm = coeffs.squaredNorm();
  if (norm == 0.0) throw std::invalid_argument("joint_variance: zero coefficient vector");
  return coeffs.dot(c.data * coeffs) / norm;
}

Eigen::VectorXd homodyne_vector(const ModeGrid& grid, Beam beam, int harmonic, Component comp,
                                double theta) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(grid.dim());
  v(grid.index(Quadrature::X, beam, harmonic, comp)) = std::cos(theta);
  v(grid.index(Quadrature::P, beam, harmonic, comp)) = std::sin(theta);
  return v;
}

PhysicalityReport check_physical(const CovMatrix& c) {
  PhysicalityReport r;
  const auto dim = c.data.rows();
  if (dim != c.data.cols() || dim % 2 != 0) return r;
  const double norm = std::max(1.0, c.data.norm());
  r.asymmetry = (c.data - c.data.transpose()).norm() / norm;

  const Eigen::MatrixXd omega = symplectic_form(static_cast<int>(dim / 2));
  Eigen::MatrixXcd h(dim, dim);
  h.real() = 0.5 * (c.data + c.data.transpose());
  h.imag() = omega;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h, Eigen::EigenvaluesOnly);
  r.min_eigenvalue = solver.eigenvalues().minCoeff();
  r.ok = solver.info() == Eigen::Success && r.min_eigenvalue >= -kPhysicalTol &&
         r.asymmetry <= kSymmetryTol;
  return r;
}

namespace {

std::vector<int> selector_rows(const ModeGrid& grid, const BlockSelector& sel) {
  std::vector<int> harmonics = sel.harmonics;
  if (harmonics.empty())
    for (int h = grid.first_harmonic(); h <= grid.last_harmonic(); ++h) harmonics.push_back(h);
  if (sel.component == Component::dc)
    throw std::out_of_range("extract_block: DC is never an in-band bin");
  std::vector<int> rows;
  rows.reserve(harmonics.size());
  for (int h : harmonics) {
    if (!grid.in_band(h))
      throw std::out_of_range("extract_block: harmonic " + std::to_string(h) + " is not in band");
    rows.push_back(grid.index(sel.quadrature, sel.beam, h, sel.component));
  }
  return rows;
}

}  // namespace

Eigen::MatrixXd extract_block(const CovMatrix& c, const BlockSelector& rows,
                              const BlockSelector& cols) {
  const auto r = selector_rows(c.grid, rows);
  const auto k = selector_rows(c.grid, cols);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(k.size()));
  for (size_t i = 0; i < r.size(); ++i)
    for (size_t j = 0; j < k.size(); ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c.data(r[i], k[j]);
  return out;
}

}  // namespace twinmod::gaussian
