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

#include "twinmod/timeseries.hpp"

#include "parallel.hpp"
#include "twinmod/errors.hpp"

#include <json.hpp>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

namespace twinmod::timeseries {

namespace {

constexpr std::uint64_t kSourceStream = 1;
constexpr std::uint64_t kLossStream = 2;
constexpr std::uint64_t kElectronicStream = 3;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::int64_t n_chunks(std::int64_t n) { return (n + kChunkSamples - 1) / kChunkSamples; }

// Fills each destination with i.i.d. N(0,1) draws, chunk by chunk; channels are
// interleaved per sample inside a chunk so adding a channel changes every draw.
void fill_normal(std::span<std::vector<double>* const> dst, std::uint64_t seed,
                 std::uint64_t stream, int workers) {
  const auto n = static_cast<std::int64_t>(dst.front()->size());
  detail::parallel_for(n_chunks(n), workers, [&](std::int64_t chunk) {
    std::mt19937_64 eng(derive_seed(seed, stream, static_cast<std::uint64_t>(chunk)));
    std::normal_distribution<double> nd(0.0, 1.0);
    const std::int64_t lo = chunk * kChunkSamples;
    const std::int64_t hi = std::min(n, lo + kChunkSamples);
    for (std::int64_t t = lo; t < hi; ++t)
      for (auto* ch : dst) (*ch)[static_cast<size_t>(t)] = nd(eng);
  });
}

bool phase_locked(double sample_rate, double f_drive, std::int64_t* period) {
  const double ratio = sample_rate / f_drive;
  const double r = std::round(ratio);
  if (r < 1.0 || std::abs(ratio - r) > 1e-9 * ratio) return false;
  *period = static_cast<std::int64_t>(r);
  return true;
}

// theta(t) over one drive period of samples, summed over the beam's modulators.
std::vector<double> phase_table(std::span<const eom::EomSpec> specs, gaussian::Beam beam,
                                double sample_rate, std::int64_t* period_out) {
  std::int64_t period = 1;
  bool any = false;
  for (const auto& s : specs) {
    if (s.beam != beam || !s.active()) continue;
    s.validate();
    std::int64_t p = 0;
    if (!phase_locked(sample_rate, s.f_drive, &p))
      throw std::invalid_argument("apply_eom: sample_rate must be an integer multiple of f_drive");
    period = any ? std::lcm(period, p) : p;
    any = true;
  }
  *period_out = period;
  std::vector<double> table(static_cast<size_t>(period), 0.0);
  if (!any) return table;
  for (const auto& s : specs) {
    if (s.beam != beam || !s.active()) continue;
    const eom::EomSpec eff = eom::equivalent_beam_spec(s);
    for (std::int64_t k = 0; k < period; ++k)
      table[static_cast<size_t>(k)] += eom::instantaneous_phase(static_cast<double>(k) / sample_rate, eff);
  }
  return table;
}

void rotate(std::vector<double>& x, std::vector<double>& p, const std::vector<double>& table) {
  const auto period = static_cast<std::int64_t>(table.size());
  std::vector<double> c(table.size()), s(table.size());
  for (size_t k = 0; k < table.size(); ++k) {
    c[k] = std::cos(table[k]);
    s[k] = std::sin(table[k]);
  }
  std::int64_t k = 0;
  for (size_t t = 0; t < x.size(); ++t) {
    const double xv = x[t], pv = p[t];
    const auto kk = static_cast<size_t>(k);
    x[t] = xv * c[kk] + pv * s[kk];
    p[t] = -xv * s[kk] + pv * c[kk];
    if (++k == period) k = 0;
  }
}

// Source squeezing mixed per frequency: same Bogoliubov form as the flat case
// with G(f) = cosh r(f), g(f) = sinh r(f).
void shape_lorentzian(QuadratureTraces& t, const TraceConfig& cfg) {
  const double r0 = std::acosh(cfg.src.gain);
  const auto n = t.size();
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> xp, xc, pp, pc;
  fft.fwd(xp, t.xp);
  fft.fwd(xc, t.xc);
  fft.fwd(pp, t.pp);
  fft.fwd(pc, t.pc);
  for (size_t k = 0; k < n; ++k) {
    const size_t kk = k <= n / 2 ? k : n - k;
    const double f = static_cast<double>(kk) * cfg.sample_rate / static_cast<double>(n);
    const double x = f / cfg.gain_profile.half_width_hz;
    const double r = r0 / (1.0 + x * x);
    const double G = std::cosh(r), g = std::sinh(r);
    const auto a = xp[k], b = xc[k], c = pp[k], d = pc[k];
    xp[k] = G * a + g * b;
    xc[k] = G * b + g * a;
    pp[k] = G * c - g * d;
    pc[k] = G * d - g * c;
  }
  fft.inv(t.xp, xp);
  fft.inv(t.xc, xc);
  fft.inv(t.pp, pp);
  fft.inv(t.pc, pc);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t chunk) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ (chunk * 0xD1B54A32D192ED03ULL));
}

void TraceConfig::validate() const {
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate))
    throw std::invalid_argument("trace.sample_rate must be > 0");
  if (n_samples < 2) throw std::invalid_argument("trace.n_samples must be >= 2");
  src.validate();
  if (gain_profile.kind == ProfileKind::lorentzian && !(gain_profile.half_width_hz > 0.0))
    throw std::invalid_argument("trace.gain_profile.half_width_hz must be > 0");
  if (!(electronic_noise_variance >= 0.0))
    throw std::invalid_argument("trace.electronic_noise_variance must be >= 0");
  if (std::abs(net_shift()) >= n_samples)
    throw std::invalid_argument("trace: net delay exceeds trace length");
}

QuadratureTraces synthesize_source(const TraceConfig& cfg, int workers) {
  cfg.validate();
  const auto n = static_cast<size_t>(cfg.n_samples);
  QuadratureTraces t;
  t.sample_rate = cfg.sample_rate;
  t.seed = cfg.seed;
  // Vacuum draws v1..v4 map to X_p, X_c, P_p, P_c before squeezing.
  std::vector<double> v1(n), v2(n), v3(n), v4(n);
  std::vector<double>* chans[] = {&v1, &v2, &v3, &v4};
  fill_normal(chans, cfg.seed, kSourceStream, workers);

  if (cfg.gain_profile.kind == ProfileKind::flat) {
    const double G = cfg.src.gain, g = cfg.src.g();
    t.xp.resize(n);
    t.xc.resize(n);
    t.pp.resize(n);
    t.pc.resize(n);
    for (size_t i = 0; i < n; ++i) {
      t.xp[i] = G * v1[i] + g * v2[i];
      t.xc[i] = G * v2[i] + g * v1[i];
      t.pp[i] = G * v3[i] - g * v4[i];
      t.pc[i] = G * v4[i] - g * v3[i];
    }
    t.transforms.push_back("tmsv_flat(G=" + std::to_string(G) + ")");
  } else {
    t.xp = std::move(v1);
    t.xc = std::move(v2);
    t.pp = std::move(v3);
    t.pc = std::move(v4);
    shape_lorentzian(t, cfg);
    t.transforms.push_back("tmsv_lorentzian(G=" + std::to_string(cfg.src.gain) +
                           ",half_width=" + std::to_string(cfg.gain_profile.half_width_hz) + ")");
  }
  return t;
}

QuadratureTraces apply_eom(const QuadratureTraces& in, const eom::EomSpec& spec_p,
                           const eom::EomSpec& spec_c) {
  if (spec_p.active() && spec_p.beam != gaussian::Beam::probe)
    throw std::invalid_argument("apply_eom: spec_p must target the probe beam");
  if (spec_c.active() && spec_c.beam != gaussian::Beam::conjugate)
    throw std::invalid_argument("apply_eom: spec_c must target the conjugate beam");
  const eom::EomSpec specs[] = {spec_p, spec_c};
  return apply_eoms(in, specs);
}

QuadratureTraces apply_eoms(const QuadratureTraces& in, std::span<const eom::EomSpec> specs) {
  QuadratureTraces out = in;
  for (auto beam : {gaussian::Beam::probe, gaussian::Beam::conjugate}) {
    std::int64_t period = 1;
    const auto table = phase_table(specs, beam, in.sample_rate, &period);
    bool any = false;
    for (const auto& s : specs) any |= s.beam == beam && s.active();
    if (!any) continue;
    if (beam == gaussian::Beam::probe)
      rotate(out.xp, out.pp, table);
    else
      rotate(out.xc, out.pc, table);
  }
  for (const auto& s : specs) {
    if (!s.active()) continue;
    char buf[160];
    std::snprintf(buf, sizeof buf, "eom(%s,%s,m=%.6g,phi=%.6g,f=%.6g)", gaussian::to_string(s.beam),
                  eom::to_string(s.placement), s.m, s.phi, s.f_drive);
    out.transforms.emplace_back(buf);
  }
  return out;
}

QuadratureTraces apply_loss_traces(const QuadratureTraces& in, double eta,
                                   std::uint64_t noise_seed, int workers) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::domain_error("apply_loss_traces: eta must lie in [0, 1]");
  QuadratureTraces out = in;
  if (eta == 0.0) return out;
  const auto n = in.size();
  std::vector<double> w1(n), w2(n), w3(n), w4(n);
  std::vector<double>* chans[] = {&w1, &w2, &w3, &w4};
  fill_normal(chans, noise_seed, kLossStream, workers);
  const double keep = std::sqrt(1.0 - eta), add = std::sqrt(eta);
  for (size_t i = 0; i < n; ++i) {
    out.xp[i] = keep * in.xp[i] + add * w1[i];
    out.pp[i] = keep * in.pp[i] + add * w2[i];
    out.xc[i] = keep * in.xc[i] + add * w3[i];
    out.pc[i] = keep * in.pc[i] + add * w4[i];
  }
  out.transforms.push_back("loss(eta=" + std::to_string(eta) + ")");
  return out;
}

Photocurrent homodyne(const QuadratureTraces& in, double theta_p, double theta_c,
                      const TraceConfig& cfg, int workers) {
  const auto n = in.size();
  Photocurrent out;
  out.sample_rate = in.sample_rate;
  out.theta_p = theta_p;
  out.theta_c = theta_c;
  out.probe.resize(n);
  out.conjugate.resize(n);
  const double cp = std::cos(theta_p), sp = std::sin(theta_p);
  const double cc = std::cos(theta_c), sc = std::sin(theta_c);
  for (size_t i = 0; i < n; ++i) {
    out.probe[i] = in.xp[i] * cp + in.pp[i] * sp;
    out.conjugate[i] = in.xc[i] * cc + in.pc[i] * sc;
  }
  if (cfg.electronic_noise_variance > 0.0) {
    std::vector<double> e1(n), e2(n);
    std::vector<double>* chans[] = {&e1, &e2};
    fill_normal(chans, cfg.seed, kElectronicStream, workers);
    const double sd = std::sqrt(cfg.electronic_noise_variance);
    for (size_t i = 0; i < n; ++i) {
      out.probe[i] += sd * e1[i];
      out.conjugate[i] += sd * e2[i];
    }
  }
  // Residual delay after electronic compensation, applied circularly.
  const int shift = cfg.net_shift();
  if (shift != 0 && n > 0) {
    const auto s = static_cast<std::int64_t>(n);
    const std::int64_t k = ((shift % s) + s) % s;
    std::rotate(out.conjugate.begin(), out.conjugate.begin() + (s - k), out.conjugate.end());
  }
  return out;
}

std::vector<double> joint_current(const Photocurrent& i, analytic::Branch branch) {
  if (i.probe.size() != i.conjugate.size())
    throw std::invalid_argument("joint_current: channel lengths differ");
  const double sign = branch == analytic::Branch::difference ? -1.0 : 1.0;
  std::vector<double> out(i.probe.size());
  for (size_t t = 0; t < out.size(); ++t)
    out[t] = (i.probe[t] + sign * i.conjugate[t]) / std::numbers::sqrt2;
  return out;
}

TraceFile to_trace_file(const QuadratureTraces& t) {
  return {t.sample_rate, t.seed, {"X_p", "P_p", "X_c", "P_c"}, t.transforms, {t.xp, t.pp, t.xc, t.pc}};
}

TraceFile to_trace_file(const Photocurrent& i, std::uint64_t seed) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "homodyne(theta_p=%.9g,theta_c=%.9g)", i.theta_p, i.theta_c);
  return {i.sample_rate, seed, {"i_p", "i_c"}, {buf}, {i.probe, i.conjugate}};
}

namespace {

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int b = 0; b < 8; ++b) r |= ((v >> (8 * b)) & 0xFFu) << (8 * (7 - b));
    return r;
  }
}

std::filesystem::path sidecar_path(const std::filesystem::path& p) {
  return std::filesystem::path(p.string() + ".json");
}

}  // namespace

void write_trace_file(const std::filesystem::path& path, const TraceFile& file) {
  if (file.data.size() != file.channels.size() || file.data.empty())
    throw std::invalid_argument("write_trace_file: channel list and data disagree");
  const size_t n = file.data.front().size();
  for (const auto& ch : file.data)
    if (ch.size() != n) throw std::invalid_argument("write_trace_file: ragged channels");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  std::vector<std::uint64_t> row(file.data.size());
  for (size_t t = 0; t < n; ++t) {
    for (size_t c = 0; c < file.data.size(); ++c)
      row[c] = to_little_endian(std::bit_cast<std::uint64_t>(file.data[c][t]));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(std::uint64_t)));
  }
  if (!out) throw IoError("write failed for " + path.string());

  nlohmann::ordered_json meta;
  meta["format"] = "float64-le-interleaved";
  meta["sample_rate"] = file.sample_rate;
  meta["seed"] = file.seed;
  meta["n_samples"] = n;
  meta["channels"] = file.channels;
  meta["transforms"] = file.transforms;
  std::ofstream side(sidecar_path(path), std::ios::trunc);
  if (!side) throw IoError("cannot open sidecar for " + path.string());
  side << meta.dump(2) << '\n';
  if (!side) throw IoError("write failed for sidecar of " + path.string());
}

TraceFile read_trace_file(const std::filesystem::path& path) {
  std::ifstream side(sidecar_path(path));
  if (!side) throw IoError("missing trace sidecar " + sidecar_path(path).string());
  nlohmann::json meta;
  try {
    side >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed trace sidecar: " + std::string(e.what()));
  }
  TraceFile file;
  try {
    file.sample_rate = meta.at("sample_rate").get<double>();
    file.seed = meta.value("seed", std::uint64_t{0});
    file.channels = meta.at("channels").get<std::vector<std::string>>();
    file.transforms = meta.value("transforms", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw IoError("trace sidecar missing field: " + std::string(e.what()));
  }
  if (file.channels.empty()) throw IoError("trace sidecar lists no channels");

  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<size_t>(in.tellg());
  in.seekg(0);
  const size_t stride = file.channels.size() * sizeof(std::uint64_t);
  if (bytes % stride != 0) throw IoError("trace size is not a whole number of frames");
  const size_t n = bytes / stride;
  file.data.assign(file.channels.size(), std::vector<double>(n));
  std::vector<std::uint64_t> row(file.channels.size());
  for (size_t t = 0; t < n; ++t) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(stride));
    for (size_t c = 0; c < row.size(); ++c)
      file.data[c][t] = std::bit_cast<double>(to_little_endian(row[c]));
  }
  if (!in) throw IoError("short read on " + path.string());
  return file;
}

Photocurrent photocurrent_from(const TraceFile& file) {
  Photocurrent out;
  out.sample_rate = file.sample_rate;
  bool have_p = false, have_c = false;
  for (size_t c = 0; c < file.channels.size(); ++c) {
    if (file.channels[c] == "i_p") {
      out.probe = file.data[c];
      have_p = true;
    } else if (file.channels[c] == "i_c") {
      out.conjugate = file.data[c];
      have_c = true;
    }
  }
  if (!have_p || !have_c) throw std::invalid_argument("trace file has no i_p/i_c channels");
  return out;
}

}  // namespace twinmod::timeseries
