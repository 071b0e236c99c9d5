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

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace twinmod::gaussian {

enum class Beam { probe = 0, conjugate = 1 };
enum class Quadrature { X, P };

/// Real Fourier component of a drive-locked analysis window. The DC mode only
/// exists at harmonic 0; every other harmonic carries a cosine and a sine mode.
enum class Component { dc, cos, sin };

const char* to_string(Beam b);
const char* to_string(Component c);

/// Frequency-bin mode layout shared by both beams.
///
/// In-band bins are the harmonics first_harmonic() .. first_harmonic()+n_bins-1
/// of bin_spacing. Guard harmonics extend the grid by guard_bins above the band
/// and by up to guard_bins below it; the lower edge stops at DC, where the
/// real Fourier basis closes exactly.
///
/// Quadrature vector layout: all X quadratures, then all P quadratures. Within
/// each block, probe modes precede conjugate modes, each beam ascending in
/// frequency with the cosine mode before the sine mode of a harmonic.
struct ModeGrid {
  int n_bins = 50;
  double bin_spacing = 2e5;
  double start_freq = 2e5;
  int guard_bins = 9;

  void validate() const;

  int first_harmonic() const;
  int last_harmonic() const { return first_harmonic() + n_bins - 1; }
  int lowest_harmonic() const;
  int highest_harmonic() const { return last_harmonic() + guard_bins; }
  bool in_band(int harmonic) const {
    return harmonic >= first_harmonic() && harmonic <= last_harmonic();
  }
  double frequency(int harmonic) const { return harmonic * bin_spacing; }

  int modes_per_beam() const;
  int n_modes() const { return 2 * modes_per_beam(); }
  int dim() const { return 2 * n_modes(); }

  /// Mode number in [0, n_modes()). Throws std::out_of_range.
  int mode(Beam beam, int harmonic, Component comp) const;
  /// Row of the quadrature in the covariance matrix.
  int index(Quadrature q, Beam beam, int harmonic, Component comp) const;
  /// Label such as "Xp@1.2MHz/c".
  std::string label(int quadrature_index) const;

  /// Every (harmonic, component) carried per beam, in mode order.
  std::vector<std::pair<int, Component>> beam_layout() const;

  bool operator==(const ModeGrid&) const = default;
};

/// Quadrature covariance in shot-noise units (vacuum = identity).
struct CovMatrix {
  ModeGrid grid;
  Eigen::MatrixXd data;
};

struct SymplecticOp {
  Eigen::MatrixXd matrix;
  std::string label;
};

struct PhysicalityReport {
  bool ok = false;
  double min_eigenvalue = 0.0;  // of the Hermitian matrix C + i*Omega
  double asymmetry = 0.0;       // ||C - C^T||_F / max(1, ||C||_F)
};

/// Which quadratures a covariance block row/column set refers to. An empty
/// harmonic list selects every in-band bin.
struct BlockSelector {
  Quadrature quadrature = Quadrature::X;
  Beam beam = Beam::probe;
  Component component = Component::cos;
  std::vector<int> harmonics;
};

inline constexpr double kSymplecticTol = 1e-9;
inline constexpr double kPhysicalTol = 1e-9;
inline constexpr double kSymmetryTol = 1e-12;

/// Standard symplectic form [[0, I], [-I, 0]] for n_modes modes.
Eigen::MatrixXd symplectic_form(int n_modes);
/// Largest entry of |S Omega S^T - Omega|.
double symplectic_defect(const Eigen::MatrixXd& s);

CovMatrix vacuum_cov(const ModeGrid& grid);

/// Two-mode squeezer on one (probe, conjugate) mode pair:
///   X_p -> G X_p + g X_c,  X_c -> G X_c + g X_p,
///   P_p -> G P_p - g P_c,  P_c -> G P_c - g P_p.
SymplecticOp tmsv_symplectic(double gain, int probe_mode, int conjugate_mode, const ModeGrid& grid);
/// Squeezer applied to every matching (probe, conjugate) mode pair of the grid.
SymplecticOp source_symplectic(double gain, const ModeGrid& grid);

/// Rotation X -> X cos(theta) + P sin(theta), P -> -X sin(theta) + P cos(theta).
SymplecticOp quadrature_rotation(double theta, int mode, const ModeGrid& grid);

SymplecticOp compose(const SymplecticOp& second, const SymplecticOp& first);

CovMatrix apply_symplectic(const CovMatrix& c, const SymplecticOp& s);
CovMatrix apply_loss(const CovMatrix& c, std::span<const int> modes, double eta);
/// Loss on every mode of the grid.
CovMatrix apply_loss_all(const CovMatrix& c, double eta);

/// c^T C c / c^T c; vacuum gives 1 for any c.
double joint_variance(const CovMatrix& c, const Eigen::VectorXd& coeffs);

/// Coefficient vector of X cos(theta) + P sin(theta) on one mode.
Eigen::VectorXd homodyne_vector(const ModeGrid& grid, Beam beam, int harmonic, Component comp,
                                double theta);

PhysicalityReport check_physical(const CovMatrix& c);

Eigen::MatrixXd extract_block(const CovMatrix& c, const BlockSelector& rows,
                              const BlockSelector& cols);

}  // namespace twinmod::gaussian
