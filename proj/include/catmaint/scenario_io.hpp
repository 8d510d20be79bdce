#ifndef CATMAINT_SCENARIO_IO_HPP
#define CATMAINT_SCENARIO_IO_HPP

// Flat scenario files:
//
//   # comment
//   sim.duration = 3600
//   sensor.alpha_deg = 20
//   deputy.1 = ellipse 200 0 0
//
// Angles and angular rates are given in degrees (keys ending in _deg); all
// other quantities are SI. Every key is typed; normalization expands the
// file to the full key set with defaults filled in and reals printed in
// shortest round-trip form, so normalize(parse(to_text(normalize(x)))) is a
// fixed point.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "catmaint/error.hpp"
#include "catmaint/simloop.hpp"

namespace catmaint::io {

struct ConfigEntry {
  std::string value;
  int line = 0;  // 0 for defaults and command-line overrides
};

using ConfigMap = std::map<std::string, ConfigEntry>;

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

inline std::string where(const std::string& key, const ConfigEntry& e) {
  return (e.line > 0 ? "line " + std::to_string(e.line) + ": " : std::string()) + "'" + key + "'";
}

[[noreturn]] inline void fail(const std::string& key, const ConfigEntry& e, const std::string& msg) {
  throw Error(ErrorCode::Config, where(key, e) + ": " + msg);
}

inline std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Shortest text that parses back to the same double.
inline std::string fmt_short(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::optional<double> to_real(const std::string& s) {
  const std::string t = trim(s);
  if (t.empty()) return std::nullopt;
  double v = 0.0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

// Splits on commas and/or whitespace.
inline std::vector<std::string> tokens(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

enum class Kind { Real, Int, UInt64, Bool, Vec, OptVec, Choice };

struct KeySpec {
  Kind kind;
  std::string def;
  int size = 0;                      // Vec/OptVec length; Vec also accepts 1 value when broadcast
  bool broadcast = false;
  std::vector<std::string> choices;  // Choice
};

inline const std::map<std::string, KeySpec>& schema() {
  static const std::map<std::string, KeySpec> s = {
      {"orbit.eta", {Kind::Real, "0.0012"}},
      {"sim.duration", {Kind::Real, "3600"}},
      {"sim.dt", {Kind::Real, "1"}},
      {"sim.seed", {Kind::UInt64, "42"}},
      {"sim.abort_on_violation", {Kind::Bool, "false"}},
      {"chief.inertia", {Kind::Vec, "1, 1, 1", 3, true}},
      {"sensor.alpha_deg", {Kind::Real, "20"}},
      {"sensor.boresight", {Kind::Vec, "1, 0, 0", 3}},
      {"sensor.sun", {Kind::Vec, "0, 0, 1", 3}},
      {"sensor.sun_exclusion", {Kind::Bool, "true"}},
      {"mpc.N", {Kind::Int, "10"}},
      {"mpc.W1", {Kind::Vec, "1, 1", 2, true}},
      {"mpc.W2", {Kind::Vec, "1, 1, 1", 3, true}},
      {"mpc.u_max", {Kind::Real, fmt_real(2.0 * kPi)}},
      {"mpc.omega_max_deg", {Kind::Real, "180"}},
      {"mpc.wrap_angle_errors", {Kind::Bool, "false"}},
      {"mpc.warm_start", {Kind::Bool, "true"}},
      {"mpc.max_iters", {Kind::Int, "40"}},
      {"mpc.tol_grad", {Kind::Real, "1e-06"}},
      {"mpc.tol_step", {Kind::Real, "1e-08"}},
      {"mpc.penalty_mu0", {Kind::Real, "1000"}},
      {"mpc.penalty_growth", {Kind::Real, "10"}},
      {"mpc.penalty_rounds", {Kind::Int, "3"}},
      {"mpc.omega_margin_deg", {Kind::Real, fmt_real(0.02 * 180.0 / kPi)}},
      {"mpc.sun_margin", {Kind::Real, "0.02"}},
      {"mpc.pitch_limit_deg", {Kind::Real, fmt_real(1.3 * 180.0 / kPi)}},
      {"supervisor.Delta", {Kind::Real, "100"}},
      {"supervisor.epsilon", {Kind::Real, "0"}},
      {"supervisor.candidate_above_threshold", {Kind::Bool, "false"}},
      {"noise.Q", {Kind::Vec, "1e-06, 1e-06, 1e-06, 1e-06, 1e-06, 1e-06", 6, true}},
      {"noise.R_meas", {Kind::Vec, "1, 1, 1, 0.01, 0.01, 0.01", 6, true}},
      {"init.attitude_deg", {Kind::OptVec, "random", 3}},
      {"init.omega_deg", {Kind::OptVec, "random", 3}},
      {"init.theta_box_deg", {Kind::Real, "30"}},
      {"init.omega_box_deg", {Kind::Real, "90"}},
      {"init.beta_lo", {Kind::Real, "10"}},
      {"init.beta_hi", {Kind::Real, "100"}},
      {"deputies.layout", {Kind::Choice, "ring", 0, false, {"ring", "list"}}},
      {"deputies.count", {Kind::Int, "3"}},
      {"deputies.ring_base", {Kind::Real, "50"}},
      {"deputies.ring_step", {Kind::Real, "150"}},
      {"deputies.ring_rz_ratio", {Kind::Real, "0"}},
  };
  return s;
}

inline bool is_deputy_key(const std::string& key, int* index = nullptr) {
  constexpr std::string_view prefix = "deputy.";
  if (key.rfind(prefix, 0) != 0 || key.size() == prefix.size()) return false;
  int v = 0;
  const char* b = key.data() + prefix.size();
  const char* e = key.data() + key.size();
  const auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e || v < 1) return false;
  if (index) *index = v;
  return true;
}

inline std::vector<double> reals(const std::string& key, const ConfigEntry& e,
                                 const std::vector<std::string>& toks) {
  std::vector<double> out;
  for (const auto& t : toks) {
    const auto v = to_real(t);
    if (!v) fail(key, e, "'" + t + "' is not a finite number");
    out.push_back(*v);
  }
  return out;
}

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt_short(v[i]);
  return s;
}

inline std::string canonical_value(const std::string& key, const ConfigEntry& e, const KeySpec& ks) {
  const std::string v = trim(e.value);
  switch (ks.kind) {
    case Kind::Real: {
      const auto r = to_real(v);
      if (!r) fail(key, e, "expected a finite number, got '" + v + "'");
      return fmt_short(*r);
    }
    case Kind::Int: {
      long long x = 0;
      const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
      if (v.empty() || ec != std::errc() || p != v.data() + v.size()) {
        fail(key, e, "expected an integer, got '" + v + "'");
      }
      return std::to_string(x);
    }
    case Kind::UInt64: {
      std::uint64_t x = 0;
      const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
      if (v.empty() || ec != std::errc() || p != v.data() + v.size()) {
        fail(key, e, "expected an unsigned integer, got '" + v + "'");
      }
      return std::to_string(x);
    }
    case Kind::Bool: {
      std::string l = v;
      std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
      if (l == "true" || l == "1" || l == "yes" || l == "on") return "true";
      if (l == "false" || l == "0" || l == "no" || l == "off") return "false";
      fail(key, e, "expected true/false, got '" + v + "'");
    }
    case Kind::Vec:
    case Kind::OptVec: {
      if (ks.kind == Kind::OptVec && v == "random") return "random";
      auto vals = reals(key, e, tokens(v));
      if (ks.broadcast && vals.size() == 1) vals.assign(static_cast<std::size_t>(ks.size), vals[0]);
      if (static_cast<int>(vals.size()) != ks.size) {
        fail(key, e, "expected " + std::to_string(ks.size) + " values, got " + std::to_string(vals.size()));
      }
      return join(vals);
    }
    case Kind::Choice:
      if (std::find(ks.choices.begin(), ks.choices.end(), v) == ks.choices.end()) {
        std::string all;
        for (const auto& c : ks.choices) all += (all.empty() ? "" : "|") + c;
        fail(key, e, "expected one of " + all + ", got '" + v + "'");
      }
      return v;
  }
  return v;
}

inline std::string canonical_deputy(const std::string& key, const ConfigEntry& e) {
  const auto toks = tokens(e.value);
  if (toks.empty()) fail(key, e, "empty deputy description");
  const std::string& type = toks.front();
  const std::vector<std::string> args(toks.begin() + 1, toks.end());
  std::size_t want = 0;
  if (type == "ellipse") want = 3;
  else if (type == "line") want = 2;
  else if (type == "stationary") want = 1;
  else fail(key, e, "unknown deputy type '" + type + "' (ellipse|line|stationary)");
  if (args.size() != want) {
    fail(key, e, type + " takes " + std::to_string(want) + " values, got " + std::to_string(args.size()));
  }
  std::string out = type;
  for (double x : reals(key, e, args)) out += " " + fmt_short(x);
  return out;
}

inline std::vector<double> vec_of(const ConfigMap& m, const std::string& key) {
  const auto& e = m.at(key);
  return reals(key, e, tokens(e.value));
}

inline double deg(double d) { return d * kPi / 180.0; }

}  // namespace detail

/// Parses `key = value` lines. Duplicate keys are errors; `#` starts a
/// comment. `source` prefixes diagnostics.
inline ConfigMap parse_config(const std::string& text, const std::string& source = "<config>") {
  ConfigMap out;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::Config, source + ":" + std::to_string(line) + ": expected 'key = value'");
    }
    const std::string key = detail::trim(body.substr(0, eq));
    const std::string value = detail::trim(body.substr(eq + 1));
    if (key.empty()) throw Error(ErrorCode::Config, source + ":" + std::to_string(line) + ": empty key");
    if (out.count(key)) {
      throw Error(ErrorCode::Config, source + ":" + std::to_string(line) + ": duplicate key '" + key +
                                         "' (first on line " + std::to_string(out[key].line) + ")");
    }
    out[key] = ConfigEntry{value, line};
  }
  return out;
}

inline ConfigMap read_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::Config, "cannot open scenario file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path);
}

/// Applies a `key=value` override; replaces any existing entry.
inline void apply_override(ConfigMap& m, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) throw Error(ErrorCode::Config, "override '" + kv + "' is not key=value");
  const std::string key = detail::trim(kv.substr(0, eq));
  if (key.empty()) throw Error(ErrorCode::Config, "override '" + kv + "' has an empty key");
  m[key] = ConfigEntry{detail::trim(kv.substr(eq + 1)), 0};
}

/// Full, canonical key set. Unknown keys and malformed values are errors.
inline ConfigMap normalize(const ConfigMap& m) {
  const auto& sch = detail::schema();
  ConfigMap out;
  for (const auto& [key, ks] : sch) out[key] = ConfigEntry{ks.def, 0};
  for (const auto& [key, e] : m) {
    if (detail::is_deputy_key(key)) {
      out[key] = ConfigEntry{detail::canonical_deputy(key, e), e.line};
      continue;
    }
    const auto it = sch.find(key);
    if (it == sch.end()) detail::fail(key, e, "unknown key");
    out[key] = ConfigEntry{detail::canonical_value(key, e, it->second), e.line};
  }
  // defaults are written in canonical form already, but run them through once
  for (auto& [key, e] : out) {
    if (e.line == 0 && !detail::is_deputy_key(key)) {
      e.value = detail::canonical_value(key, e, sch.at(key));
    }
  }
  // renumber deputies densely in index order
  std::map<int, ConfigEntry> deps;
  for (auto it = out.begin(); it != out.end();) {
    int idx = 0;
    if (detail::is_deputy_key(it->first, &idx)) {
      deps[idx] = it->second;
      it = out.erase(it);
    } else {
      ++it;
    }
  }
  int n = 0;
  for (auto& [idx, e] : deps) out["deputy." + std::to_string(++n)] = e;
  return out;
}

/// One `key = value` line per entry, deputies last in index order.
inline std::string to_text(const ConfigMap& m) {
  std::string s;
  std::map<int, std::string> deps;
  for (const auto& [key, e] : m) {
    int idx = 0;
    if (detail::is_deputy_key(key, &idx)) deps[idx] = key + " = " + e.value + "\n";
    else s += key + " = " + e.value + "\n";
  }
  for (const auto& [idx, line] : deps) s += line;
  return s;
}

/// Builds the typed scenario from a (normalized or raw) map and validates it.
inline ScenarioConfig build_scenario(const ConfigMap& raw) {
  using detail::deg;
  const ConfigMap m = normalize(raw);
  auto real = [&](const std::string& k) { return std::stod(m.at(k).value); };
  auto integer = [&](const std::string& k) { return std::stoi(m.at(k).value); };
  auto boolean = [&](const std::string& k) { return m.at(k).value == "true"; };
  auto vec3 = [&](const std::string& k) {
    const auto v = detail::vec_of(m, k);
    return Vec3(v[0], v[1], v[2]);
  };

  ScenarioConfig c;
  c.orbit.eta = real("orbit.eta");
  c.duration = real("sim.duration");
  c.dt = real("sim.dt");
  c.seed = std::stoull(m.at("sim.seed").value);
  c.abort_on_violation = boolean("sim.abort_on_violation");

  const Vec3 j = vec3("chief.inertia");
  c.inertia = InertiaMatrix{j(0), j(1), j(2)};

  c.sensor.alpha = deg(real("sensor.alpha_deg"));
  c.sensor.p_b = vec3("sensor.boresight");
  c.sensor.sun = vec3("sensor.sun");
  c.sensor.sun_exclusion = boolean("sensor.sun_exclusion");

  c.mpc.N = integer("mpc.N");
  const auto w1 = detail::vec_of(m, "mpc.W1");
  const auto w2 = detail::vec_of(m, "mpc.W2");
  c.mpc.W1 = Vec2(w1[0], w1[1]).asDiagonal();
  c.mpc.W2 = Vec3(w2[0], w2[1], w2[2]).asDiagonal();
  c.mpc.u_max = real("mpc.u_max");
  c.mpc.omega_max = deg(real("mpc.omega_max_deg"));
  c.mpc.wrap_angle_errors = boolean("mpc.wrap_angle_errors");
  c.mpc.warm_start = boolean("mpc.warm_start");
  c.mpc.solver.max_iters = integer("mpc.max_iters");
  c.mpc.solver.tol_grad = real("mpc.tol_grad");
  c.mpc.solver.tol_step = real("mpc.tol_step");
  c.mpc.solver.penalty_mu0 = real("mpc.penalty_mu0");
  c.mpc.solver.penalty_growth = real("mpc.penalty_growth");
  c.mpc.solver.penalty_rounds = integer("mpc.penalty_rounds");
  c.mpc.solver.omega_margin = deg(real("mpc.omega_margin_deg"));
  c.mpc.solver.sun_margin = real("mpc.sun_margin");
  c.mpc.solver.pitch_limit = deg(real("mpc.pitch_limit_deg"));
  c.mpc.dt = c.dt;

  c.supervisor.delta = real("supervisor.Delta");
  c.supervisor.epsilon = real("supervisor.epsilon");
  c.supervisor.options.candidate_above_threshold = boolean("supervisor.candidate_above_threshold");

  const auto q = detail::vec_of(m, "noise.Q");
  const auto r = detail::vec_of(m, "noise.R_meas");
  c.noise.Q = Vec6(q.data()).asDiagonal();
  c.noise.R_meas = Vec6(r.data()).asDiagonal();

  if (m.at("init.attitude_deg").value != "random") {
    const Vec3 a = vec3("init.attitude_deg");
    c.init.attitude = EulerAngles321{deg(a(0)), deg(a(1)), deg(a(2))};
  }
  if (m.at("init.omega_deg").value != "random") c.init.omega = vec3("init.omega_deg") * (kPi / 180.0);
  c.init.theta_box = deg(real("init.theta_box_deg"));
  c.init.omega_box = deg(real("init.omega_box_deg"));
  c.init.beta_lo = real("init.beta_lo");
  c.init.beta_hi = real("init.beta_hi");

  const bool list = m.at("deputies.layout").value == "list";
  c.deputies.kind = list ? DeputyLayout::Kind::List : DeputyLayout::Kind::Ring;
  c.deputies.count = integer("deputies.count");
  c.deputies.ring_base = real("deputies.ring_base");
  c.deputies.ring_step = real("deputies.ring_step");
  c.deputies.ring_rz_ratio = real("deputies.ring_rz_ratio");
  bool any_deputy = false;
  for (const auto& [key, e] : m) {
    if (!detail::is_deputy_key(key)) continue;
    any_deputy = true;
    if (!list) detail::fail(key, e, "deputy entries need deputies.layout = list");
    const auto toks = detail::tokens(e.value);
    std::vector<double> a;
    for (std::size_t i = 1; i < toks.size(); ++i) a.push_back(std::stod(toks[i]));
    NmtSpec spec;
    if (toks[0] == "ellipse") spec = Ellipse{a[0], a[1], deg(a[2])};
    else if (toks[0] == "line") spec = LineSegment{a[0], deg(a[1])};
    else spec = StationaryPoint{a[0]};
    try {
      (void)sample_nmt(spec, c.orbit);
    } catch (const Error& err) {
      detail::fail(key, e, err.what());
    }
    c.deputies.list.push_back(spec);
  }
  // to_text() orders deputies numerically; the map iterates lexically
  if (list) {
    std::map<int, NmtSpec> ordered;
    std::size_t k = 0;
    for (const auto& [key, e] : m) {
      int idx = 0;
      if (detail::is_deputy_key(key, &idx)) ordered[idx] = c.deputies.list[k++];
    }
    c.deputies.list.clear();
    for (auto& [idx, s] : ordered) c.deputies.list.push_back(s);
  }
  if (list && !any_deputy) {
    throw Error(ErrorCode::Config, "'deputies.layout' is list but no deputy.N entries are given");
  }
  if (!list && c.deputies.count < 1) throw Error(ErrorCode::Config, "'deputies.count' must be >= 1");

  c.validate();
  return c;
}

}  // namespace catmaint::io

#endif  // CATMAINT_SCENARIO_IO_HPP
