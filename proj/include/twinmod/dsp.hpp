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
#include "twinmod/gaussian_core.hpp"
#include "twinmod/timeseries.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace twinmod::dsp {

enum class Window { rectangular, hann };
enum class CovComponent { cc, cs, sc, ss };

const char* to_string(Window w);
const char* to_string(CovComponent c);

struct SegmentPlan {
  std::int64_t segment_len = 500;
  double overlap = 0.0;
  Window window = Window::rectangular;
  bool drive_locked = true;
  double f_drive = 2e5;

  /// Throws std::invalid_argument naming the offending field.
  void validate(double sample_rate) const;
  std::int64_t hop() const;
  /// Segments that fit in n_samples; 0 if not even one does.
  std::int64_t n_segments(std::int64_t n_samples) const;

  /// Hann, 50% overlap, two drive periods per segment at 100 MS/s.
  static SegmentPlan display();
  /// Rectangular, no overlap, one drive period per segment at 100 MS/s.
  static SegmentPlan locked();

  bool operator==(const SegmentPlan&) const = default;
};

/// One-sided spectrum, bins 0 .. segment_len/2. psd is relative to the shot
/// reference when one was applied; otherwise psd == raw_psd.
struct Spectrum {
  std::vector<double> freqs;
  std::vector<double> psd;
  std::vector<double> std_err;
  std::vector<double> raw_psd;
  std::vector<double> raw_std_err;
  std::int64_t n_segments = 0;
  double sample_rate = 0.0;
  SegmentPlan plan;

  std::size_t size() const { return freqs.size(); }
};

/// Welch estimate normalized by the window power, so unit-variance white
/// noise gives psd = 1 in every bin.
Spectrum welch_psd(std::span<const double> signal, double sample_rate, const SegmentPlan& plan);

/// Welch spectrum of the joint current divided bin-wise by the shot reference.
/// std_err combines both relative errors.
Spectrum joint_noise_spectrum(const timeseries::Photocurrent& i, analytic::Branch branch,
                              const SegmentPlan& plan, const Spectrum& shot_reference);

/// Entries at the requested frequencies, which must sit on the bin grid.
Spectrum select_bins(const Spectrum& s, std::span<const double> freqs);

/// Per-segment cosine/sine amplitudes of the in-band harmonics of grid.
/// Row s of cos/sin is segment s, column j is grid harmonic first+j.
struct BinTable {
  std::vector<double> bin_freqs;
  Eigen::MatrixXd cos;
  Eigen::MatrixXd sin;
  std::int64_t segment_len = 0;

  std::int64_t n_segments() const { return cos.rows(); }
};

BinTable drive_locked_bins(std::span<const double> signal, double sample_rate,
                           const SegmentPlan& plan, const gaussian::ModeGrid& grid);

/// Per-bin variances of the cosine and sine amplitudes scaled by M/2, so a
/// vacuum input reads 1.
struct BinVariances {
  std::vector<double> bin_freqs;
  Eigen::VectorXd cos, cos_err;
  Eigen::VectorXd sin, sin_err;
  std::int64_t n_segments = 0;
};

BinVariances bin_variances(const BinTable& t);

struct CovBlockEstimate {
  std::vector<double> bin_freqs;
  Eigen::MatrixXd matrix;   // rows: probe bins, cols: conjugate bins
  Eigen::MatrixXd std_err;
  CovComponent component = CovComponent::cs;
  std::int64_t n_segments = 0;
};

/// Sample covariance across segments of the selected components, scaled by M/2.
/// First letter picks the probe component, second the conjugate one.
CovBlockEstimate cross_covariance(const BinTable& probe, const BinTable& conjugate, CovComponent component);

/// Welch spectrum of the difference current of a vacuum source (gain 1).
Spectrum shot_reference(const timeseries::TraceConfig& cfg, const SegmentPlan& plan, int workers = 1);

/// Thread-safe memo of shot references keyed by trace settings and plan.
class ShotReferenceCache {
 public:
  const Spectrum& get(const timeseries::TraceConfig& cfg, const SegmentPlan& plan, int workers = 1);
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, Spectrum> cache_;
};

}  // namespace twinmod::dsp
