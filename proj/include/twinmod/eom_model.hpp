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

#include "twinmod/gaussian_core.hpp"

#include <Eigen/Dense>

namespace twinmod::eom {

using gaussian::Beam;

enum class Placement { beam, local_oscillator };

const char* to_string(Placement p);

/// One sinusoidally driven phase modulator: theta(t) = m sin(2 pi f_drive t + phi).
struct EomSpec {
  double m = 0.0;
  double phi = 0.0;
  double f_drive = 2e5;
  Beam beam = Beam::probe;
  Placement placement = Placement::beam;
  bool enabled = true;

  void validate() const;
  bool active() const { return enabled && m > 0.0; }
  bool operator==(const EomSpec&) const = default;
};

/// Phase written onto the beam at time t. A modulator in the local oscillator
/// shows up in the homodyne signal with the opposite sign. Disabled specs
/// return 0.
double instantaneous_phase(double t, const EomSpec& spec);

/// Maps an LO-placed modulator onto the equivalent in-beam modulator
/// (phi -> phi + pi, wrapped into [0, 2 pi)). In-beam specs are returned as is.
EomSpec equivalent_beam_spec(const EomSpec& spec);

/// Single-modulator equivalent of two synchronised modulators.
double effective_index(double m_p, double m_c, double phi);

/// Smallest n with 1 - sum_{|k|<=n} J_k(m)^2 < eps.
int truncation_order(double m, double eps);

/// Drive frequency as an integer number of grid bins. Throws if incommensurate.
int drive_harmonic(const EomSpec& spec, const gaussian::ModeGrid& grid);

/// Multiport coupler of one modulator on the grid's frequency-bin modes.
struct SidebandCoupler {
  EomSpec spec;
  int n_max = 0;
  /// Largest entrywise change made by the unitary projection.
  double projection_size = 0.0;
  gaussian::SymplecticOp op;
};

/// Complex bin-space operator A + iB of the modulated beam, truncated at
/// n_max sidebands and restricted to the grid, before projection. Rows and
/// columns follow ModeGrid::beam_layout().
Eigen::MatrixXcd truncated_bin_operator(const EomSpec& spec, const gaussian::ModeGrid& grid,
                                        int n_max);

/// Jacobi-Anger sideband coupler: a_out(w) = sum_n J_n(m) e^{i n phi} a_in(w - n f_drive),
/// expressed on the real cosine/sine bin modes (phase referenced to drive
/// phase zero at t = 0) and projected onto the nearest unitary so that the
/// quadrature operator is exactly symplectic.
SidebandCoupler sideband_symplectic(const EomSpec& spec, const gaussian::ModeGrid& grid,
                                    double eps = 1e-9);

}  // namespace twinmod::eom
