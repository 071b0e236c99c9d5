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

#include "twinmod/analytic.hpp"
#include "twinmod/eom_model.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace twinmod::timeseries {

enum class ProfileKind { flat, lorentzian };

/// Spectral shape of the source squeezing. Lorentzian rolls the squeezing
/// parameter off as r(f) = r0 / (1 + (f / half_width_hz)^2).
struct GainProfile {
  ProfileKind kind = ProfileKind::flat;
  double half_width_hz = 7.5e6;
  bool operator==(const GainProfile&) const = default;
};

struct TraceConfig {
  double sample_rate = 1e8;
  std::int64_t n_samples = 1'000'000;
  std::uint64_t seed = 20230101;
  analytic::SourceSpec src;
  GainProfile gain_profile;
  /// Optical delay of the conjugate channel and the electronic compensation
  /// applied after detection; the photocurrent is shifted by their difference.
  int delay_samples = 1;
  int compensation_samples = 1;
  double electronic_noise_variance = 0.0;

  void validate() const;
  int net_shift() const { return delay_samples - compensation_samples; }
};

/// Sampled quadratures of both beams in per-sample shot-noise units.
struct QuadratureTraces {
  double sample_rate = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> xp, pp, xc, pc;
  std::vector<std::string> transforms;

  std::size_t size() const { return xp.size(); }
};

struct Photocurrent {
  double sample_rate = 0.0;
  double theta_p = 0.0;
  double theta_c = 0.0;
  std::vector<double> probe;
  std::vector<double> conjugate;
};

/// Samples per chunk of independently seeded random numbers. Output depends
/// on (seed, chunk index) only, never on the number of workers.
inline constexpr std::int64_t kChunkSamples = 1 << 16;

QuadratureTraces synthesize_source(const TraceConfig& cfg, int workers = 1);

/// Per-sample rotation X -> X cos(theta) + P sin(theta), P -> -X sin(theta) + P cos(theta)
/// with theta(t) from each beam's modulator. Disabled specs leave the beam alone.
QuadratureTraces apply_eom(const QuadratureTraces& in, const eom::EomSpec& spec_p,
                           const eom::EomSpec& spec_c);
/// Any number of modulators; phases on the same beam add.
QuadratureTraces apply_eoms(const QuadratureTraces& in, std::span<const eom::EomSpec> specs);

QuadratureTraces apply_loss_traces(const QuadratureTraces& in, double eta,
                                   std::uint64_t noise_seed, int workers = 1);

Photocurrent homodyne(const QuadratureTraces& in, double theta_p, double theta_c,
                      const TraceConfig& cfg, int workers = 1);

/// (i_p - i_c)/sqrt2 for the difference branch, (i_p + i_c)/sqrt2 for the sum.
std::vector<double> joint_current(const Photocurrent& i, analytic::Branch branch);

/// Deterministic per-(seed, stream, chunk) engine seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t chunk);

/// Binary trace file: little-endian float64, channel-interleaved, with a JSON
/// sidecar "<file>.json" carrying sample_rate, seed, channel order and the
/// transform log.
struct TraceFile {
  double sample_rate = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::string> channels;
  std::vector<std::string> transforms;
  std::vector<std::vector<double>> data;  // one vector per channel
};

TraceFile to_trace_file(const QuadratureTraces& t);
TraceFile to_trace_file(const Photocurrent& i, std::uint64_t seed);
void write_trace_file(const std::filesystem::path& path, const TraceFile& file);
TraceFile read_trace_file(const std::filesystem::path& path);
/// Recovers a photocurrent pair from channels named "i_p" and "i_c".
Photocurrent photocurrent_from(const TraceFile& file);

}  // namespace twinmod::timeseries
