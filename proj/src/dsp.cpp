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

#include "twinmod/dsp.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <stdexcept>

namespace twinmod::dsp {

using std::numbers::pi;

const char* to_string(Window w) { return w == Window::hann ? "hann" : "rectangular"; }

const char* to_string(CovComponent c) {
  switch (c) {
    case CovComponent::cc: return "cc";
    case CovComponent::cs: return "cs";
    case CovComponent::sc: return "sc";
    case CovComponent::ss: return "ss";
  }
  return "?";
}

namespace {

std::int64_t samples_per_period(double sample_rate, double f_drive) {
  const double r = sample_rate / f_drive;
  const double k = std::round(r);
  if (k < 1 || std::abs(r - k) > 1e-9 * r) return 0;
  return static_cast<std::int64_t>(k);
}

std::vector<double> window_taps(const SegmentPlan& plan) {
  const auto L = static_cast<size_t>(plan.segment_len);
  std::vector<double> w(L, 1.0);
  if (plan.window == Window::hann)
    for (size_t n = 0; n < L; ++n) w[n] = 0.5 * (1.0 - std::cos(2.0 * pi * static_cast<double>(n) / static_cast<double>(L)));
  return w;
}

}  // namespace

void SegmentPlan::validate(double sample_rate) const {
  if (segment_len < 2) throw std::invalid_argument("plan.segment_len must be >= 2");
  if (!(overlap >= 0.0 && overlap < 1.0)) throw std::invalid_argument("plan.overlap must lie in [0, 1)");
  if (hop() < 1) throw std::invalid_argument("plan.overlap leaves a zero hop");
  if (!drive_locked) return;
  if (window != Window::rectangular) throw std::invalid_argument("plan.window must be rectangular when drive_locked");
  if (overlap != 0.0) throw std::invalid_argument("plan.overlap must be 0 when drive_locked");
  const auto period = samples_per_period(sample_rate, f_drive);
  if (period == 0) throw std::invalid_argument("plan.f_drive must divide the sample rate");
  if (segment_len % period != 0)
    throw std::invalid_argument("plan.segment_len must be a whole number of drive periods");
}

std::int64_t SegmentPlan::hop() const {
  return static_cast<std::int64_t>(std::llround(static_cast<double>(segment_len) * (1.0 - overlap)));
}

std::int64_t SegmentPlan::n_segments(std::int64_t n_samples) const {
  if (n_samples < segment_len) return 0;
  return (n_samples - segment_len) / hop() + 1;
}

SegmentPlan SegmentPlan::display() {
  SegmentPlan p;
  p.segment_len = 1000;
  p.overlap = 0.5;
  p.window = Window::hann;
  p.drive_locked = false;
  return p;
}

SegmentPlan SegmentPlan::locked() { return SegmentPlan{}; }

Spectrum welch_psd(std::span<const double> signal, double sample_rate, const SegmentPlan& plan) {
  plan.validate(sample_rate);
  const auto n = static_cast<std::int64_t>(signal.size());
  const std::int64_t S = plan.n_segments(n);
  if (S < 1) throw std::invalid_argument("welch_psd: signal shorter than one segment");
  if (S < 2) throw std::invalid_argument("welch_psd: need at least two segments");

  const auto L = static_cast<size_t>(plan.segment_len);
  const size_t n_bins = L / 2 + 1;
  const auto w = window_taps(plan);
  double wpow = 0;
  for (double v : w) wpow += v * v;

  Eigen::FFT<double> fft;
  std::vector<double> seg(L);
  std::vector<std::complex<double>> spec;
  std::vector<double> sum(n_bins, 0.0), sumsq(n_bins, 0.0);
  for (std::int64_t s = 0; s < S; ++s) {
    const auto off = static_cast<size_t>(s * plan.hop());
    for (size_t t = 0; t < L; ++t) seg[t] = signal[off + t] * w[t];
    fft.fwd(spec, seg);
    for (size_t k = 0; k < n_bins; ++k) {
      const double p = std::norm(spec[k]) / wpow;
      sum[k] += p;
      sumsq[k] += p * p;
    }
  }

  Spectrum out;
  out.n_segments = S;
  out.sample_rate = sample_rate;
  out.plan = plan;
  out.freqs.resize(n_bins);
  out.raw_psd.resize(n_bins);
  out.raw_std_err.resize(n_bins);
  const double Sd = static_cast<double>(S);
  for (size_t k = 0; k < n_bins; ++k) {
    out.freqs[k] = static_cast<double>(k) * sample_rate / static_cast<double>(L);
    const double mean = sum[k] / Sd;
    const double var = std::max(0.0, (sumsq[k] - Sd * mean * mean) / (Sd - 1.0));
    out.raw_psd[k] = mean;
    out.raw_std_err[k] = std::sqrt(var / Sd);
  }
  out.psd = out.raw_psd;
  out.std_err = out.raw_std_err;
  return out;
}

Spectrum joint_noise_spectrum(const timeseries::Photocurrent& i, analytic::Branch branch,
                              const SegmentPlan& plan, const Spectrum& shot_reference) {
  if (i.probe.size() != i.conjugate.size())
    throw std::invalid_argument("joint_noise_spectrum: channel lengths differ");
  if (!(shot_reference.plan == plan) || shot_reference.sample_rate != i.sample_rate)
    throw std::invalid_argument("joint_noise_spectrum: shot reference was taken with a different plan");
  const auto joint = timeseries::joint_current(i, branch);
  Spectrum out = welch_psd(joint, i.sample_rate, plan);
  for (size_t k = 0; k < out.size(); ++k) {
    const double ref = shot_reference.raw_psd[k];
    if (!(ref > 0.0)) throw std::domain_error("joint_noise_spectrum: shot reference has an empty bin");
    out.psd[k] = out.raw_psd[k] / ref;
    const double a = out.raw_std_err[k] / out.raw_psd[k];
    const double b = shot_reference.raw_std_err[k] / ref;
    out.std_err[k] = out.psd[k] * std::sqrt(a * a + b * b);
  }
  return out;
}

Spectrum select_bins(const Spectrum& s, std::span<const double> freqs) {
  if (s.size() < 2) throw std::invalid_argument("select_bins: spectrum has fewer than two bins");
  const double df = s.freqs[1] - s.freqs[0];
  Spectrum out;
  out.n_segments = s.n_segments;
  out.sample_rate = s.sample_rate;
  out.plan = s.plan;
  for (double f : freqs) {
    const double k = std::round(f / df);
    if (k < 0 || k >= static_cast<double>(s.size()) || std::abs(f - k * df) > 1e-6 * df) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "select_bins: %.9g Hz is not on the bin grid", f);
      throw std::invalid_argument(buf);
    }
    const auto i = static_cast<size_t>(k);
    out.freqs.push_back(s.freqs[i]);
    out.psd.push_back(s.psd[i]);
    out.std_err.push_back(s.std_err[i]);
    out.raw_psd.push_back(s.raw_psd[i]);
    out.raw_std_err.push_back(s.raw_std_err[i]);
  }
  return out;
}

BinTable drive_locked_bins(std::span<const double> signal, double sample_rate, const SegmentPlan& plan,
                           const gaussian::ModeGrid& grid) {
  if (!plan.drive_locked) throw std::invalid_argument("drive_locked_bins: plan is not drive-locked");
  plan.validate(sample_rate);
  grid.validate();
  const std::int64_t M = plan.segment_len;
  const std::int64_t S = plan.n_segments(static_cast<std::int64_t>(signal.size()));
  if (S < 2) throw std::invalid_argument("drive_locked_bins: need at least two segments");
  // Every bin must complete a whole number of cycles in a segment.
  const double cycles = grid.bin_spacing * static_cast<double>(M) / sample_rate;
  if (std::abs(cycles - std::round(cycles)) > 1e-9 * cycles || std::round(cycles) < 1)
    throw std::invalid_argument("drive_locked_bins: bin spacing is not a segment harmonic");
  if (grid.frequency(grid.last_harmonic()) >= sample_rate / 2)
    throw std::invalid_argument("drive_locked_bins: bins reach the Nyquist frequency");

  const int N = grid.n_bins;
  Eigen::MatrixXd ct(M, N), st(M, N);
  BinTable out;
  out.segment_len = M;
  for (int j = 0; j < N; ++j) {
    const double f = grid.frequency(grid.first_harmonic() + j);
    out.bin_freqs.push_back(f);
    for (std::int64_t t = 0; t < M; ++t) {
      const double arg = 2.0 * pi * f * static_cast<double>(t) / sample_rate;
      ct(t, j) = std::cos(arg);
      st(t, j) = std::sin(arg);
    }
  }
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMat> segs(signal.data(), S, M);
  const double scale = 2.0 / static_cast<double>(M);
  out.cos = scale * (segs * ct);
  out.sin = scale * (segs * st);
  return out;
}

namespace {

struct Moments {
  Eigen::MatrixXd cov;
  Eigen::MatrixXd err;
};

// Sample covariance of columns of a against columns of b, with the standard
// error of each entry from the spread of the centred products.
Moments cross_moments(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double S = static_cast<double>(a.rows());
  const Eigen::MatrixXd ac = a.rowwise() - a.colwise().mean();
  const Eigen::MatrixXd bc = b.rowwise() - b.colwise().mean();
  Moments m;
  const Eigen::MatrixXd mean_prod = (ac.transpose() * bc) / S;
  const Eigen::MatrixXd mean_sq = (ac.cwiseAbs2().transpose() * bc.cwiseAbs2()) / S;
  m.cov = mean_prod * (S / (S - 1.0));
  const Eigen::MatrixXd var = ((mean_sq - mean_prod.cwiseAbs2()) * (S / (S - 1.0))).cwiseMax(0.0);
  m.err = (var / S).cwiseSqrt();
  return m;
}

}  // namespace

BinVariances bin_variances(const BinTable& t) {
  if (t.n_segments() < 2) throw std::invalid_argument("bin_variances: need at least two segments");
  const double scale = static_cast<double>(t.segment_len) / 2.0;
  const double S = static_cast<double>(t.n_segments());
  BinVariances out;
  out.bin_freqs = t.bin_freqs;
  out.n_segments = t.n_segments();
  auto one = [&](const Eigen::MatrixXd& x, Eigen::VectorXd& v, Eigen::VectorXd& e) {
    const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
    const Eigen::MatrixXd sq = xc.cwiseAbs2();
    v = scale * sq.colwise().sum().transpose() / (S - 1.0);
    const Eigen::RowVectorXd m2 = sq.colwise().mean();
    const Eigen::RowVectorXd m4 = sq.cwiseAbs2().colwise().mean();
    e = scale * ((m4 - m2.cwiseAbs2()).cwiseMax(0.0) / (S - 1.0)).cwiseSqrt().transpose();
  };
  one(t.cos, out.cos, out.cos_err);
  one(t.sin, out.sin, out.sin_err);
  return out;
}

CovBlockEstimate cross_covariance(const BinTable& probe, const BinTable& conjugate, CovComponent component) {
  if (probe.n_segments() != conjugate.n_segments())
    throw std::invalid_argument("cross_covariance: segment counts differ");
  if (probe.segment_len != conjugate.segment_len || probe.bin_freqs != conjugate.bin_freqs)
    throw std::invalid_argument("cross_covariance: tables use different bins");
  if (probe.n_segments() < 2) throw std::invalid_argument("cross_covariance: need at least two segments");
  const bool p_cos = component == CovComponent::cc || component == CovComponent::cs;
  const bool c_cos = component == CovComponent::cc || component == CovComponent::sc;
  const Moments m = cross_moments(p_cos ? probe.cos : probe.sin, c_cos ? conjugate.cos : conjugate.sin);
  const double scale = static_cast<double>(probe.segment_len) / 2.0;
  CovBlockEstimate out;
  out.bin_freqs = probe.bin_freqs;
  out.matrix = scale * m.cov;
  out.std_err = scale * m.err;
  out.component = component;
  out.n_segments = probe.n_segments();
  return out;
}

Spectrum shot_reference(const timeseries::TraceConfig& cfg, const SegmentPlan& plan, int workers) {
  if (cfg.src.gain != 1.0) throw std::invalid_argument("shot_reference: source gain must be 1");
  const auto src = timeseries::synthesize_source(cfg, workers);
  const auto i = timeseries::homodyne(src, 0.0, 0.0, cfg, workers);
  return welch_psd(timeseries::joint_current(i, analytic::Branch::difference), cfg.sample_rate, plan);
}

namespace {

std::string cache_key(const timeseries::TraceConfig& c, const SegmentPlan& p) {
  char buf[320];
  std::snprintf(buf, sizeof buf, "%.17g|%lld|%llu|%.17g|%d|%.17g|%d|%d|%.17g|%lld|%.17g|%d|%d|%.17g",
                c.sample_rate, static_cast<long long>(c.n_samples), static_cast<unsigned long long>(c.seed),
                c.src.eta, static_cast<int>(c.gain_profile.kind), c.gain_profile.half_width_hz, c.delay_samples,
                c.compensation_samples, c.electronic_noise_variance, static_cast<long long>(p.segment_len),
                p.overlap, static_cast<int>(p.window), static_cast<int>(p.drive_locked), p.f_drive);
  return buf;
}

}  // namespace

const Spectrum& ShotReferenceCache::get(const timeseries::TraceConfig& cfg, const SegmentPlan& plan, int workers) {
  const std::string key = cache_key(cfg, plan);
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  Spectrum s = shot_reference(cfg, plan, workers);
  std::lock_guard<std::mutex> lock(mu_);
  return cache_.try_emplace(key, std::move(s)).first->second;
}

std::size_t ShotReferenceCache::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return cache_.size();
}

}  // namespace twinmod::dsp
