#ifndef CATMAINT_REPORT_HPP
#define CATMAINT_REPORT_HPP

// Run artifacts: per-step table, summary document, gnuplot scripts.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "catmaint/error.hpp"
#include "catmaint/scenario_io.hpp"
#include "catmaint/simloop.hpp"

namespace catmaint::io {

inline std::vector<std::string> step_columns(std::size_t num_deputies) {
  std::vector<std::string> c{"t", "target_j"};
  for (std::size_t i = 1; i <= num_deputies; ++i) c.push_back("entropy_" + std::to_string(i));
  for (const char* s : {"psi", "theta", "phi", "omega_1", "omega_2", "omega_3", "u_1", "u_2", "u_3",
                        "h1", "az_ref", "el_ref"}) {
    c.emplace_back(s);
  }
  return c;
}

inline std::string csv_header(std::size_t num_deputies) {
  std::string s;
  for (const auto& c : step_columns(num_deputies)) s += (s.empty() ? "" : ",") + c;
  return s;
}

// Row values in column order; target_j is 1-based.
inline std::vector<double> step_values(const StepRecord& r) {
  std::vector<double> v{r.t, static_cast<double>(r.target + 1)};
  v.insert(v.end(), r.entropy.begin(), r.entropy.end());
  const auto& g = r.attitude.gamma;
  for (double x : {g.psi, g.theta, g.phi}) v.push_back(x);
  for (int k = 0; k < 3; ++k) v.push_back(r.attitude.omega(k));
  for (int k = 0; k < 3; ++k) v.push_back(r.u(k));
  v.push_back(r.h(0));
  v.push_back(r.ref.az);
  v.push_back(r.ref.el);
  return v;
}

inline std::string steps_csv(const SimLog& log) {
  std::string out = csv_header(log.num_deputies) + "\n";
  for (const auto& r : log.steps) {
    const auto v = step_values(r);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ',';
      out += i == 1 ? std::to_string(r.target + 1) : detail::fmt_real(v[i]);
    }
    out += '\n';
  }
  return out;
}

inline std::string steps_jsonl(const SimLog& log) {
  const auto cols = step_columns(log.num_deputies);
  std::string out;
  for (const auto& r : log.steps) {
    const auto v = step_values(r);
    nlohmann::ordered_json j;
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (i == 1) j[cols[i]] = r.target + 1;
      else j[cols[i]] = v[i];
    }
    out += j.dump() + '\n';
  }
  return out;
}

inline nlohmann::ordered_json metrics_json(const Metrics& m) {
  nlohmann::ordered_json j;
  auto opt = [](const std::optional<double>& x) {
    return x ? nlohmann::ordered_json(*x) : nlohmann::ordered_json(nullptr);
  };
  auto settle = nlohmann::ordered_json::array();
  for (const auto& s : m.settle_time) settle.push_back(opt(s));
  j["settle_time"] = settle;
  j["all_settled_time"] = opt(m.all_settled_time);
  j["post_settle_steps"] = m.post_settle_steps;
  j["post_settle_fraction"] = m.post_settle_fraction;
  j["post_settle_fraction_tol"] = m.post_settle_fraction_tol;
  j["mean_margin"] = m.mean_margin;
  j["switch_count"] = m.switch_count;
  j["min_switch_gap"] = std::isfinite(m.min_switch_gap) ? nlohmann::ordered_json(m.min_switch_gap)
                                                        : nlohmann::ordered_json(nullptr);
  j["total_torque"] = m.total_torque;
  j["max_abs_omega"] = m.max_abs_omega;
  j["max_h1"] = m.max_h1;
  j["max_abs_u"] = m.max_abs_u;
  return j;
}

/// `status` is "ok" or the error code name; metrics are null when the run
/// produced no steps.
inline nlohmann::ordered_json summary_json(const ConfigMap& normalized, const std::string& status,
                                           const std::string& message, const SimLog* log) {
  nlohmann::ordered_json j;
  j["status"] = status;
  if (!message.empty()) j["message"] = message;
  if (log) {
    j["num_deputies"] = log->num_deputies;
    j["steps"] = log->steps.size();
    j["beta"] = log->beta;
  }
  j["metrics"] = (log && !log->steps.empty()) ? metrics_json(summarize(*log)) : nlohmann::ordered_json(nullptr);
  nlohmann::ordered_json cfg;
  for (const auto& [k, e] : normalized) cfg[k] = e.value;
  j["config"] = cfg;
  return j;
}

/// Config map back from the "config" object of a summary document.
inline ConfigMap config_from_summary(const nlohmann::json& summary) {
  ConfigMap m;
  for (const auto& [k, v] : summary.at("config").items()) m[k] = ConfigEntry{v.get<std::string>(), 0};
  return m;
}

inline std::string gnuplot_entropy(std::size_t d, double epsilon) {
  std::string s =
      "set datafile separator ','\n"
      "set key autotitle columnhead\n"
      "set xlabel 't [s]'\nset ylabel 'entropy [nats]'\n"
      "plot ";
  for (std::size_t i = 0; i < d; ++i) {
    s += (i ? ", \\\n     " : "") + std::string("'steps.csv' using 1:") + std::to_string(3 + i) +
         " with lines";
  }
  s += ", \\\n     " + detail::fmt_real(epsilon) + " title 'epsilon' dashtype 2\n";
  return s;
}

inline std::string gnuplot_azel(std::size_t d) {
  const std::size_t c = 3 + d;  // psi column
  auto col = [](std::size_t k) { return std::to_string(k); };
  return "set datafile separator ','\n"
         "set key autotitle columnhead\n"
         "set xlabel 't [s]'\nset ylabel 'angle [rad]'\n"
         "plot 'steps.csv' using 1:" + col(c + 10) + " with lines title 'az_ref', \\\n"
         "     'steps.csv' using 1:" + col(c) + " with lines title 'psi', \\\n"
         "     'steps.csv' using 1:" + col(c + 11) + " with lines title 'el_ref', \\\n"
         "     'steps.csv' using 1:(-$" + col(c + 1) + ") with lines title '-theta'\n";
}

inline std::string gnuplot_torque(std::size_t d) {
  const std::size_t c = 3 + d + 6;  // u_1 column
  std::string s =
      "set datafile separator ','\n"
      "set key autotitle columnhead\n"
      "set xlabel 't [s]'\nset ylabel 'torque [N m]'\n"
      "plot ";
  for (int k = 0; k < 3; ++k) {
    s += (k ? ", \\\n     " : "") + std::string("'steps.csv' using 1:") + std::to_string(c + k) +
         " with steps";
  }
  return s + "\n";
}

/// Writes through a temporary file and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::Config, "cannot write '" + tmp.string() + "'");
    f << content;
    if (!f) throw Error(ErrorCode::Config, "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::Config, "cannot rename into '" + path.string() + "': " + ec.message());
}

}  // namespace catmaint::io

#endif  // CATMAINT_REPORT_HPP
