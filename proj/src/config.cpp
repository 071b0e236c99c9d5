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

#include "twinmod/config.hpp"

#include "twinmod/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <stdexcept>

namespace twinmod::scenarios {

using nlohmann::json;
using nlohmann::ordered_json;
using std::numbers::pi;

namespace {

struct ScenarioName {
  ScenarioId id;
  const char* name;
};

constexpr ScenarioName kScenarioNames[] = {
    {ScenarioId::fig2_sweep, "fig2_sweep"},
    {ScenarioId::fig3a_single_eom, "fig3a_single_eom"},
    {ScenarioId::fig3b_relative_phase, "fig3b_relative_phase"},
    {ScenarioId::fig4_covariance, "fig4_covariance"},
    {ScenarioId::analytic_table, "analytic_table"},
    {ScenarioId::validate_pipelines, "validate_pipelines"},
};

PlacementMode placement_from_string(const std::string& s, const std::string& path) {
  if (s == "beam") return PlacementMode::beam;
  if (s == "local_oscillator") return PlacementMode::local_oscillator;
  if (s == "mixed") return PlacementMode::mixed;
  throw ConfigError(path + ": unknown placement '" + s + "' (beam, local_oscillator, mixed)");
}

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported as unknown fields.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* get(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const char* key, double& out) {
    if (const json* v = get(key)) {
      if (!v->is_number()) throw ConfigError(field(key) + ": expected a number");
      out = v->get<double>();
    }
  }

  template <typename Int>
  void integer(const char* key, Int& out) {
    if (const json* v = get(key)) {
      if (!v->is_number_integer()) throw ConfigError(field(key) + ": expected an integer");
      if constexpr (std::is_unsigned_v<Int>) {
        if (v->is_number_unsigned()) {
          out = v->get<Int>();
          return;
        }
        if (v->get<std::int64_t>() < 0) throw ConfigError(field(key) + ": must be >= 0");
      }
      out = v->get<Int>();
    }
  }

  void boolean(const char* key, bool& out) {
    if (const json* v = get(key)) {
      if (!v->is_boolean()) throw ConfigError(field(key) + ": expected true or false");
      out = v->get<bool>();
    }
  }

  void string(const char* key, std::string& out) {
    if (const json* v = get(key)) {
      if (!v->is_string()) throw ConfigError(field(key) + ": expected a string");
      out = v->get<std::string>();
    }
  }

  void numbers(const char* key, std::vector<double>& out) {
    if (const json* v = get(key)) {
      if (!v->is_array()) throw ConfigError(field(key) + ": expected an array of numbers");
      out.clear();
      for (size_t i = 0; i < v->size(); ++i) {
        if (!(*v)[i].is_number())
          throw ConfigError(field(key) + "[" + std::to_string(i) + "]: expected a number");
        out.push_back((*v)[i].get<double>());
      }
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(field(it.key().c_str()) + ": unknown field");
  }

  std::string where() const { return path_.empty() ? "config" : path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_source(Reader r, analytic::SourceSpec& s) {
  r.number("gain", s.gain);
  r.number("eta", s.eta);
  r.finish();
}

eom::EomSpec read_eom(Reader r, eom::EomSpec e) {
  std::string beam = gaussian::to_string(e.beam);
  std::string placement = e.placement == eom::Placement::beam ? "beam" : "local_oscillator";
  r.string("beam", beam);
  r.string("placement", placement);
  r.number("m", e.m);
  r.number("phi", e.phi);
  r.number("f_drive", e.f_drive);
  r.boolean("enabled", e.enabled);
  r.finish();
  if (beam == "probe") e.beam = gaussian::Beam::probe;
  else if (beam == "conjugate") e.beam = gaussian::Beam::conjugate;
  else throw ConfigError(r.field("beam") + ": expected 'probe' or 'conjugate'");
  if (placement == "beam") e.placement = eom::Placement::beam;
  else if (placement == "local_oscillator") e.placement = eom::Placement::local_oscillator;
  else throw ConfigError(r.field("placement") + ": expected 'beam' or 'local_oscillator'");
  return e;
}

void read_trace(Reader r, timeseries::TraceConfig& t) {
  r.number("sample_rate", t.sample_rate);
  r.integer("n_samples", t.n_samples);
  r.integer("seed", t.seed);
  if (const json* gp = r.get("gain_profile")) {
    Reader g(*gp, r.field("gain_profile"));
    std::string kind = t.gain_profile.kind == timeseries::ProfileKind::flat ? "flat" : "lorentzian";
    g.string("kind", kind);
    g.number("half_width_hz", t.gain_profile.half_width_hz);
    g.finish();
    if (kind == "flat") t.gain_profile.kind = timeseries::ProfileKind::flat;
    else if (kind == "lorentzian") t.gain_profile.kind = timeseries::ProfileKind::lorentzian;
    else throw ConfigError(g.field("kind") + ": expected 'flat' or 'lorentzian'");
  }
  r.integer("delay_samples", t.delay_samples);
  r.integer("compensation_samples", t.compensation_samples);
  r.number("electronic_noise_variance", t.electronic_noise_variance);
  r.finish();
}

void read_plan(Reader r, dsp::SegmentPlan& p) {
  r.integer("segment_len", p.segment_len);
  r.number("overlap", p.overlap);
  std::string window = dsp::to_string(p.window);
  r.string("window", window);
  r.boolean("drive_locked", p.drive_locked);
  r.number("f_drive", p.f_drive);
  r.finish();
  if (window == "hann") p.window = dsp::Window::hann;
  else if (window == "rectangular") p.window = dsp::Window::rectangular;
  else throw ConfigError(r.field("window") + ": expected 'hann' or 'rectangular'");
}

void read_grid(Reader r, gaussian::ModeGrid& g, double& eps) {
  r.integer("n_bins", g.n_bins);
  r.number("bin_spacing", g.bin_spacing);
  r.number("start_freq", g.start_freq);
  r.integer("guard_bins", g.guard_bins);
  r.number("eps", eps);
  r.finish();
}

void read_sweep(Reader r, SweepParams& s) {
  r.numbers("phases_deg", s.phases_deg);
  r.numbers("indices", s.indices);
  if (const json* v = r.get("index_pairs")) {
    if (!v->is_array()) throw ConfigError(r.field("index_pairs") + ": expected an array of [m_p, m_c] pairs");
    s.index_pairs.clear();
    for (size_t i = 0; i < v->size(); ++i) {
      const json& p = (*v)[i];
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
        throw ConfigError(r.field("index_pairs") + "[" + std::to_string(i) + "]: expected [m_p, m_c]");
      s.index_pairs.emplace_back(p[0].get<double>(), p[1].get<double>());
    }
  }
  if (const json* v = r.get("theta")) {
    Reader t(*v, r.field("theta"));
    t.number("min", s.theta.min);
    t.number("max", s.theta.max);
    t.integer("points", s.theta.points);
    t.finish();
  }
  if (const json* v = r.get("placements")) {
    if (!v->is_array()) throw ConfigError(r.field("placements") + ": expected an array of strings");
    s.placements.clear();
    for (size_t i = 0; i < v->size(); ++i) {
      const std::string f = r.field("placements") + "[" + std::to_string(i) + "]";
      if (!(*v)[i].is_string()) throw ConfigError(f + ": expected a string");
      s.placements.push_back(placement_from_string((*v)[i].get<std::string>(), f));
    }
  }
  r.numbers("etas", s.etas);
  r.numbers("gains", s.gains);
  r.finish();
}

ordered_json plan_json(const dsp::SegmentPlan& p) {
  ordered_json j;
  j["segment_len"] = p.segment_len;
  j["overlap"] = p.overlap;
  j["window"] = dsp::to_string(p.window);
  j["drive_locked"] = p.drive_locked;
  j["f_drive"] = p.f_drive;
  return j;
}

template <typename Fn>
void wrap(const std::string& field, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(field + ": " + e.what());
  }
}

void require(bool ok, const std::string& field, const std::string& msg) {
  if (!ok) throw ConfigError(field + ": " + msg);
}

}  // namespace

const char* to_string(ScenarioId id) {
  for (const auto& n : kScenarioNames)
    if (n.id == id) return n.name;
  return "?";
}

const char* to_string(PlacementMode p) {
  switch (p) {
    case PlacementMode::beam: return "beam";
    case PlacementMode::local_oscillator: return "local_oscillator";
    case PlacementMode::mixed: return "mixed";
  }
  return "?";
}

ScenarioId scenario_from_string(const std::string& s) {
  for (const auto& n : kScenarioNames)
    if (s == n.name) return n.id;
  throw ConfigError("scenario: unknown id '" + s + "'");
}

std::vector<double> ThetaGrid::values() const {
  std::vector<double> v(static_cast<size_t>(std::max(points, 0)));
  for (int i = 0; i < points; ++i)
    v[static_cast<size_t>(i)] = points == 1 ? min : min + (max - min) * i / (points - 1);
  return v;
}

const eom::EomSpec& ScenarioConfig::probe_template() const {
  for (const auto& e : eoms)
    if (e.beam == gaussian::Beam::probe) return e;
  throw ConfigError("eoms: no probe modulator");
}

const eom::EomSpec& ScenarioConfig::conjugate_template() const {
  for (const auto& e : eoms)
    if (e.beam == gaussian::Beam::conjugate) return e;
  throw ConfigError("eoms: no conjugate modulator");
}

bool ScenarioConfig::operator==(const ScenarioConfig& o) const {
  return to_json(*this).dump() == to_json(o).dump();
}

void ScenarioConfig::validate() const {
  wrap("source", [&] { src.validate(); });

  require(!eoms.empty(), "eoms", "need one probe and one conjugate modulator");
  std::set<std::pair<int, int>> slots;
  for (size_t i = 0; i < eoms.size(); ++i) {
    const std::string f = "eoms[" + std::to_string(i) + "]";
    wrap(f, [&] { eoms[i].validate(); });
    require(slots.insert({static_cast<int>(eoms[i].beam), static_cast<int>(eoms[i].placement)}).second, f,
            "at most one modulator per beam and placement");
    wrap(f + ".f_drive", [&] { eom::drive_harmonic(eoms[i], grid); });
    const double per = trace.sample_rate / eoms[i].f_drive;
    require(std::abs(per - std::round(per)) <= 1e-9 * per, f + ".f_drive",
            "sample_rate must be an integer multiple of the drive frequency");
  }
  probe_template();
  conjugate_template();

  wrap("trace", [&] { trace.validate(); });
  wrap("plan", [&] { plan.validate(trace.sample_rate); });
  require(plan.n_segments(trace.n_samples) >= 2, "plan.segment_len", "trace holds fewer than two segments");
  require(locked_plan.drive_locked, "locked_plan.drive_locked", "must be true");
  wrap("locked_plan", [&] { locked_plan.validate(trace.sample_rate); });
  require(locked_plan.n_segments(trace.n_samples) >= 2, "locked_plan.segment_len",
          "trace holds fewer than two segments");
  wrap("grid", [&] { grid.validate(); });
  require(eps > 0.0 && eps <= 1e-3, "grid.eps", "must lie in (0, 1e-3]");
  require(grid.frequency(grid.last_harmonic()) < trace.sample_rate / 2, "grid.n_bins",
          "bins reach the Nyquist frequency");

  for (double p : sweep.phases_deg) require(std::isfinite(p), "sweep.phases_deg", "must be finite");
  for (double m : sweep.indices) require(m >= 0.0 && std::isfinite(m), "sweep.indices", "must be >= 0");
  for (auto [a, b] : sweep.index_pairs)
    require(a >= 0.0 && b >= 0.0 && std::isfinite(a + b), "sweep.index_pairs", "indices must be >= 0");
  require(sweep.theta.points >= 2, "sweep.theta.points", "must be >= 2");
  require(sweep.theta.max > sweep.theta.min, "sweep.theta.max", "must exceed sweep.theta.min");
  for (double e : sweep.etas) require(e >= 0.0 && e <= 1.0, "sweep.etas", "must lie in [0, 1]");
  for (double g : sweep.gains) require(g >= 1.0 && std::isfinite(g), "sweep.gains", "must be >= 1");
  require(!outputs.empty(), "outputs", "must name a directory");

  switch (scenario) {
    case ScenarioId::fig3a_single_eom:
      require(!sweep.indices.empty(), "sweep.indices", "fig3a needs at least one index");
      break;
    case ScenarioId::fig3b_relative_phase:
      require(!sweep.phases_deg.empty(), "sweep.phases_deg", "fig3b needs at least one phase");
      break;
    case ScenarioId::fig4_covariance:
      require(!sweep.placements.empty(), "sweep.placements", "fig4 needs at least one placement");
      require(!sweep.phases_deg.empty(), "sweep.phases_deg", "fig4 needs at least one phase");
      break;
    case ScenarioId::analytic_table:
      require(!sweep.gains.empty() && !sweep.etas.empty() && !sweep.index_pairs.empty(), "sweep",
              "analytic_table needs gains, etas and index_pairs");
      break;
    case ScenarioId::validate_pipelines:
      require(!sweep.etas.empty() && !sweep.index_pairs.empty(), "sweep",
              "validate_pipelines needs etas and index_pairs");
      break;
    case ScenarioId::fig2_sweep:
      break;
  }

  // Sidebands of the strongest modulation used must stay inside the guard bins.
  if (scenario != ScenarioId::fig2_sweep) {
    double m_max = 0;
    for (const auto& e : eoms) m_max = std::max(m_max, e.m);
    for (double m : sweep.indices) m_max = std::max(m_max, m);
    for (auto [a, b] : sweep.index_pairs) m_max = std::max({m_max, a, b});
    if (scenario == ScenarioId::fig3b_relative_phase) m_max = std::max(m_max, 2 * probe_template().m);
    const int n_max = eom::truncation_order(m_max, eps);
    for (const auto& e : eoms) {
      const int need = n_max * eom::drive_harmonic(e, grid);
      require(grid.guard_bins >= need, "grid.guard_bins",
              "must be >= " + std::to_string(need) + " for the configured modulation");
    }
  }
}

ScenarioConfig default_config(ScenarioId id) {
  ScenarioConfig c;
  c.scenario = id;
  c.src = analytic::SourceSpec{std::sqrt(3.0), 0.15};
  eom::EomSpec p;
  p.m = 0.1 * pi;
  p.beam = gaussian::Beam::probe;
  eom::EomSpec q = p;
  q.beam = gaussian::Beam::conjugate;
  c.eoms = {p, q};
  c.trace.src = c.src;
  c.plan = dsp::SegmentPlan::display();
  c.locked_plan = dsp::SegmentPlan::locked();
  c.sweep.phases_deg = {0.0, 120.0, 180.0};
  c.sweep.indices = {0.1 * pi, 0.2 * pi};
  c.sweep.index_pairs = {{0.0, 0.0}, {0.1 * pi, 0.0}, {0.1 * pi, 0.1 * pi}, {0.2 * pi, 0.0}};
  c.sweep.placements = {PlacementMode::beam, PlacementMode::local_oscillator, PlacementMode::mixed};
  c.sweep.etas = {0.0, 0.15};
  c.sweep.gains = {std::sqrt(3.0)};
  c.outputs = std::string("out/") + to_string(id);
  switch (id) {
    case ScenarioId::fig2_sweep:
      c.trace.n_samples = 200'000;
      break;
    case ScenarioId::fig4_covariance:
      c.sweep.phases_deg = {0.0, 180.0};
      break;
    case ScenarioId::validate_pipelines:
      c.sweep.index_pairs = {{0.0, 0.0}, {0.1 * pi, 0.1 * pi}};
      break;
    default:
      break;
  }
  return c;
}

ordered_json to_json(const ScenarioConfig& c) {
  ordered_json j;
  j["scenario"] = to_string(c.scenario);
  j["source"] = {{"gain", c.src.gain}, {"eta", c.src.eta}};
  j["eoms"] = ordered_json::array();
  for (const auto& e : c.eoms) {
    ordered_json x;
    x["beam"] = gaussian::to_string(e.beam);
    x["placement"] = e.placement == eom::Placement::beam ? "beam" : "local_oscillator";
    x["m"] = e.m;
    x["phi"] = e.phi;
    x["f_drive"] = e.f_drive;
    x["enabled"] = e.enabled;
    j["eoms"].push_back(x);
  }
  ordered_json t;
  t["sample_rate"] = c.trace.sample_rate;
  t["n_samples"] = c.trace.n_samples;
  t["seed"] = c.trace.seed;
  t["gain_profile"] = {{"kind", c.trace.gain_profile.kind == timeseries::ProfileKind::flat ? "flat" : "lorentzian"},
                       {"half_width_hz", c.trace.gain_profile.half_width_hz}};
  t["delay_samples"] = c.trace.delay_samples;
  t["compensation_samples"] = c.trace.compensation_samples;
  t["electronic_noise_variance"] = c.trace.electronic_noise_variance;
  j["trace"] = t;
  j["plan"] = plan_json(c.plan);
  j["locked_plan"] = plan_json(c.locked_plan);
  j["grid"] = {{"n_bins", c.grid.n_bins},
               {"bin_spacing", c.grid.bin_spacing},
               {"start_freq", c.grid.start_freq},
               {"guard_bins", c.grid.guard_bins},
               {"eps", c.eps}};
  ordered_json s;
  s["phases_deg"] = c.sweep.phases_deg;
  s["indices"] = c.sweep.indices;
  s["index_pairs"] = ordered_json::array();
  for (auto [a, b] : c.sweep.index_pairs) s["index_pairs"].push_back({a, b});
  s["theta"] = {{"min", c.sweep.theta.min}, {"max", c.sweep.theta.max}, {"points", c.sweep.theta.points}};
  s["placements"] = ordered_json::array();
  for (auto p : c.sweep.placements) s["placements"].push_back(to_string(p));
  s["etas"] = c.sweep.etas;
  s["gains"] = c.sweep.gains;
  j["sweep"] = s;
  j["outputs"] = c.outputs;
  return j;
}

ScenarioConfig parse_config(const json& j) {
  Reader r(j, "");
  const json* id = r.get("scenario");
  if (!id || !id->is_string()) throw ConfigError("scenario: required string field");
  ScenarioConfig c = default_config(scenario_from_string(id->get<std::string>()));

  if (const json* v = r.get("source")) read_source(Reader(*v, "source"), c.src);
  if (const json* v = r.get("eoms")) {
    if (!v->is_array()) throw ConfigError("eoms: expected an array");
    std::vector<eom::EomSpec> list;
    for (size_t i = 0; i < v->size(); ++i) {
      const std::string f = "eoms[" + std::to_string(i) + "]";
      // Missing fields fall back to the default template of the same beam.
      eom::EomSpec base = c.eoms[0];
      if ((*v)[i].is_object() && (*v)[i].value("beam", std::string()) == "conjugate") base = c.eoms[1];
      list.push_back(read_eom(Reader((*v)[i], f), base));
    }
    c.eoms = std::move(list);
  }
  if (const json* v = r.get("trace")) read_trace(Reader(*v, "trace"), c.trace);
  if (const json* v = r.get("plan")) read_plan(Reader(*v, "plan"), c.plan);
  if (const json* v = r.get("locked_plan")) read_plan(Reader(*v, "locked_plan"), c.locked_plan);
  if (const json* v = r.get("grid")) read_grid(Reader(*v, "grid"), c.grid, c.eps);
  if (const json* v = r.get("sweep")) read_sweep(Reader(*v, "sweep"), c.sweep);
  r.string("outputs", c.outputs);
  r.finish();
  c.trace.src = c.src;
  c.validate();
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": malformed JSON: " + e.what());
  }
  return parse_config(j);
}

std::string config_hash(const ScenarioConfig& c) {
  // The output directory does not change results, so it stays out of the hash.
  auto j = to_json(c);
  j.erase("outputs");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace twinmod::scenarios
