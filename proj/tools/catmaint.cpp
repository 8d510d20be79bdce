// catmaint: run, validate and sweep catalog-maintenance scenarios.

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "catmaint/report.hpp"
#include "catmaint/scenario_io.hpp"
#include "catmaint/simloop.hpp"

namespace fs = std::filesystem;
using namespace catmaint;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitConstraint = 2;
constexpr int kExitSolver = 3;

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::NearSingularPitch:
    case ErrorCode::ConstraintViolation:
    case ErrorCode::GimbalLock:
      return kExitConstraint;
    case ErrorCode::SolverFailure:
    case ErrorCode::SingularInnovation:
    case ErrorCode::DegenerateCovariance:
      return kExitSolver;
    default:
      return kExitConfig;
  }
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

struct RunOptions {
  std::string scenario;
  std::string out = "out";
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string format = "csv";
};

io::ConfigMap load(const std::string& path, const std::vector<std::string>& overrides,
                   std::optional<std::uint64_t> seed) {
  io::ConfigMap m = io::read_config_file(path);
  for (const auto& kv : overrides) io::apply_override(m, kv);
  if (seed) m["sim.seed"] = io::ConfigEntry{std::to_string(*seed), 0};
  return io::normalize(m);
}

struct RunResult {
  int exit_code = kExitOk;
  std::string status = "ok";
  std::string message;
  SimLog log;
};

RunResult simulate(const ScenarioConfig& cfg) {
  RunResult r;
  try {
    run_scenario_into(cfg, r.log);
  } catch (const Error& e) {
    r.exit_code = exit_code_for(e.code());
    r.status = to_string(e.code());
    r.message = e.what();
  }
  return r;
}

void write_run(const fs::path& dir, const io::ConfigMap& norm, const RunResult& r, const std::string& format) {
  fs::create_directories(dir);
  if (format == "jsonl") io::write_file_atomic(dir / "steps.jsonl", io::steps_jsonl(r.log));
  else io::write_file_atomic(dir / "steps.csv", io::steps_csv(r.log));
  io::write_file_atomic(dir / "summary.json",
                        io::summary_json(norm, r.status, r.message, &r.log).dump(2) + "\n");
  io::write_file_atomic(dir / "effective.cfg", io::to_text(norm));
  const std::size_t d = r.log.num_deputies;
  io::write_file_atomic(dir / "entropy.gp", io::gnuplot_entropy(d, r.log.epsilon));
  io::write_file_atomic(dir / "azel.gp", io::gnuplot_azel(d));
  io::write_file_atomic(dir / "torque.gp", io::gnuplot_torque(d));
}

int cmd_run(const RunOptions& o) {
  const io::ConfigMap norm = load(o.scenario, o.overrides, o.seed);
  const ScenarioConfig cfg = io::build_scenario(norm);
  const RunResult r = simulate(cfg);
  write_run(o.out, norm, r, o.format);
  if (r.exit_code != kExitOk) {
    std::cerr << "catmaint: run aborted: " << r.message << "\n";
    return r.exit_code;
  }
  const Metrics m = summarize(r.log);
  std::printf("steps %zu  deputies %zu  switches %zu  total torque %.6g  mean margin %.6g\n",
              r.log.steps.size(), r.log.num_deputies, m.switch_count, m.total_torque, m.mean_margin);
  return kExitOk;
}

int cmd_validate(const RunOptions& o) {
  const io::ConfigMap norm = load(o.scenario, o.overrides, o.seed);
  (void)io::build_scenario(norm);
  std::cout << io::to_text(norm);
  return kExitOk;
}

// Sweep file:
//   base = three_deputy.cfg          (relative to the sweep file)
//   seed = 7                         (optional, defaults to the base sim.seed)
//   set.<key> = value                (fixed override)
//   grid.<key> = v1 | v2 | ...       (cartesian product over all grid keys)
int cmd_sweep(const RunOptions& o, int jobs) {
  const io::ConfigMap spec = io::read_config_file(o.scenario);
  std::string base;
  std::vector<std::string> fixed = o.overrides;
  std::vector<std::pair<std::string, std::vector<std::string>>> grid;
  std::optional<std::uint64_t> seed = o.seed;
  for (const auto& [k, e] : spec) {
    const std::string at = o.scenario + ":" + std::to_string(e.line) + ": ";
    if (k == "base") {
      base = e.value;
    } else if (k == "seed") {
      if (!seed) {
        try {
          seed = std::stoull(e.value);
        } catch (...) {
          throw Error(ErrorCode::Config, at + "'seed' is not an unsigned integer");
        }
      }
    } else if (k.rfind("set.", 0) == 0) {
      fixed.insert(fixed.begin(), k.substr(4) + "=" + e.value);
    } else if (k.rfind("grid.", 0) == 0) {
      std::vector<std::string> vals;
      std::string cur;
      for (char c : e.value + "|") {
        if (c == '|') {
          const std::string v = io::detail::trim(cur);
          if (!v.empty()) vals.push_back(v);
          cur.clear();
        } else {
          cur += c;
        }
      }
      if (vals.empty()) throw Error(ErrorCode::Config, at + "'" + k + "' has no values");
      grid.emplace_back(k.substr(5), vals);
    } else {
      throw Error(ErrorCode::Config, at + "unknown sweep key '" + k + "'");
    }
  }
  if (base.empty()) throw Error(ErrorCode::Config, o.scenario + ": missing 'base'");
  if (grid.empty()) throw Error(ErrorCode::Config, o.scenario + ": empty grid");
  const fs::path base_path = fs::path(o.scenario).parent_path() / base;

  std::vector<std::vector<std::string>> rows{{}};
  for (const auto& [key, vals] : grid) {
    std::vector<std::vector<std::string>> next;
    for (const auto& r : rows) {
      for (const auto& v : vals) {
        auto x = r;
        x.push_back(key + "=" + v);
        next.push_back(std::move(x));
      }
    }
    rows = std::move(next);
  }

  // Validate every point and derive seeds before running anything.
  const io::ConfigMap base_norm = load(base_path.string(), fixed, seed);
  std::uint64_t state = std::stoull(base_norm.at("sim.seed").value);
  std::vector<std::uint64_t> seeds;
  std::set<std::uint64_t> seen;
  while (seeds.size() < rows.size()) {
    const std::uint64_t s = splitmix64(state);
    if (seen.insert(s).second) seeds.push_back(s);
  }
  std::vector<io::ConfigMap> norms;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto ov = fixed;
    ov.insert(ov.end(), rows[i].begin(), rows[i].end());
    norms.push_back(load(base_path.string(), ov, seeds[i]));
    (void)io::build_scenario(norms.back());
  }

  fs::create_directories(o.out);
  std::vector<RunResult> results(rows.size());
  std::atomic<std::size_t> next{0};
  std::mutex io_mu;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < rows.size();) {
      results[i] = simulate(io::build_scenario(norms[i]));
      const fs::path dir = fs::path(o.out) / ("run_" + std::to_string(i + 1));
      fs::create_directories(dir);
      io::write_file_atomic(dir / "summary.json",
                            io::summary_json(norms[i], results[i].status, results[i].message, &results[i].log)
                                    .dump(2) +
                                "\n");
      io::write_file_atomic(dir / "effective.cfg", io::to_text(norms[i]));
      std::lock_guard lk(io_mu);
      std::fprintf(stderr, "run %zu/%zu: %s\n", i + 1, rows.size(), results[i].status.c_str());
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(rows.size())));
  std::vector<std::thread> pool;
  for (int w = 0; w < n; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::string csv = "run,seed";
  for (const auto& [key, vals] : grid) csv += "," + key;
  csv += ",status,num_deputies,all_settled_time,post_settle_fraction,post_settle_fraction_tol,"
         "mean_margin,switch_count,min_switch_gap,total_torque,max_abs_omega,max_h1,max_abs_u\n";
  auto num = [](double v) { return io::detail::fmt_real(v); };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    csv += std::to_string(i + 1) + "," + std::to_string(seeds[i]);
    for (const auto& kv : rows[i]) csv += "," + kv.substr(kv.find('=') + 1);
    const RunResult& r = results[i];
    csv += "," + r.status + "," + std::to_string(r.log.num_deputies);
    if (r.exit_code == kExitOk && !r.log.steps.empty()) {
      const Metrics m = summarize(r.log);
      csv += "," + (m.all_settled_time ? num(*m.all_settled_time) : std::string()) + "," +
             num(m.post_settle_fraction) + "," + num(m.post_settle_fraction_tol) + "," + num(m.mean_margin) +
             "," + std::to_string(m.switch_count) + "," +
             (std::isfinite(m.min_switch_gap) ? num(m.min_switch_gap) : std::string()) + "," +
             num(m.total_torque) + "," + num(m.max_abs_omega) + "," + num(m.max_h1) + "," + num(m.max_abs_u);
    } else {
      csv += ",,,,,,,,,,,";
    }
    csv += "\n";
  }
  io::write_file_atomic(fs::path(o.out) / "sweep.csv", csv);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attitude-guided catalog maintenance simulator"};
  app.require_subcommand(1);

  RunOptions run_opt, val_opt, sweep_opt;
  int jobs = 1;

  auto add_common = [&](CLI::App* sub, RunOptions& o, const char* what) {
    sub->add_option("scenario", o.scenario, what)->required()->check(CLI::ExistingFile);
    sub->add_option("--set", o.overrides, "Override a config key (key=value), repeatable")
        ->allow_extra_args(false);
    sub->add_option_function<std::uint64_t>(
        "--seed", [&o](const std::uint64_t& s) { o.seed = s; }, "Random seed");
  };

  auto* run = app.add_subcommand("run", "Run a scenario and write logs, metrics and plot scripts");
  add_common(run, run_opt, "Scenario file");
  run->add_option("--out", run_opt.out, "Output directory")->capture_default_str();
  run->add_option("--format", run_opt.format, "Step log format")
      ->check(CLI::IsMember({"csv", "jsonl"}))
      ->capture_default_str();

  auto* val = app.add_subcommand("validate", "Print the normalized effective config");
  add_common(val, val_opt, "Scenario file");

  auto* sweep = app.add_subcommand("sweep", "Run a parameter grid and write sweep.csv");
  add_common(sweep, sweep_opt, "Sweep file");
  sweep->add_option("--out", sweep_opt.out, "Output directory")->capture_default_str();
  sweep->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(run_opt);
    if (*val) return cmd_validate(val_opt);
    if (*sweep) return cmd_sweep(sweep_opt, jobs);
  } catch (const Error& e) {
    std::cerr << "catmaint: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "catmaint: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
