#ifndef CATMAINT_SIMLOOP_HPP
#define CATMAINT_SIMLOOP_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "catmaint/attitude.hpp"
#include "catmaint/error.hpp"
#include "catmaint/estimation.hpp"
#include "catmaint/frames.hpp"
#include "catmaint/mpc.hpp"
#include "catmaint/relmotion.hpp"
#include "catmaint/sensing.hpp"
#include "catmaint/supervisor.hpp"

namespace catmaint {

/// How the deputy catalog is described: an explicit list or a ring of
/// ellipses with amplitudes base + step * i (i = 1..count), uniform phases
/// and out-of-plane amplitude rz_ratio * ry0 with alternating sign.
struct DeputyLayout {
  enum class Kind { List, Ring };
  Kind kind = Kind::Ring;
  std::vector<NmtSpec> list;
  int count = 3;
  double ring_base = 50.0;   // m
  double ring_step = 150.0;  // m
  double ring_rz_ratio = 0.0;

  std::vector<NmtSpec> resolve() const {
    if (kind == Kind::List) return list;
    std::vector<NmtSpec> out;
    for (int i = 1; i <= count; ++i) {
      const double ry0 = ring_base + ring_step * i;
      const double sign = (i % 2 == 1) ? 1.0 : -1.0;
      out.emplace_back(Ellipse{ry0, sign * ring_rz_ratio * ry0, 2.0 * kPi * (i - 1) / count});
    }
    return out;
  }
};

struct SupervisorConfig {
  double delta = 100.0;
  double epsilon = 0.0;
  SupervisorOptions options;
};

struct NoiseConfig {
  Mat6 Q = 1e-6 * Mat6::Identity();
  Mat6 R_meas = Vec6(1.0, 1.0, 1.0, 1e-2, 1e-2, 1e-2).asDiagonal();
};

/// Initial chief state and covariance scale. Unset attitude/omega are drawn
/// from the seeded generator: yaw and roll uniform on [-pi, pi], pitch on
/// [-theta_box, theta_box], each rate on [-omega_box, omega_box].
struct InitConfig {
  std::optional<EulerAngles321> attitude;
  std::optional<Vec3> omega;
  double theta_box = kPi / 6.0;
  double omega_box = kPi / 2.0;
  double beta_lo = 10.0;
  double beta_hi = 100.0;
};

struct ScenarioConfig {
  OrbitParams orbit;
  double duration = 3600.0;  // s
  double dt = 1.0;           // s, also the MPC discretization
  DeputyLayout deputies;
  InertiaMatrix inertia;
  SensorConfig sensor;
  MpcConfig mpc;
  SupervisorConfig supervisor;
  NoiseConfig noise;
  InitConfig init;
  std::uint64_t seed = 42;
  bool abort_on_violation = false;

  void validate() const {
    auto bad = [](const std::string& m) { throw Error(ErrorCode::Config, m); };
    if (!(orbit.eta > 0.0)) bad("orbit.eta must be positive");
    if (!(dt > 0.0) || !(duration > dt)) bad("need duration > dt > 0");
    if (deputies.resolve().empty()) bad("deputy catalog is empty");
    if (!inertia.is_valid()) bad("inertia moments must be positive");
    if (!sensor.is_valid()) bad("sensor boresight/sun must be unit vectors and 0 < alpha < 90 deg");
    if (!(init.beta_lo > 0.0) || init.beta_lo > init.beta_hi) bad("need 0 < beta_lo <= beta_hi");
    if (init.omega_box < 0.0 || init.theta_box < 0.0 || init.theta_box >= kPitchGuard) {
      bad("initial attitude boxes out of range");
    }
    if (supervisor.delta < 0.0) bad("supervisor.Delta must be >= 0");
    try {
      MpcConfig m = mpc;
      m.dt = dt;
      m.validate();
    } catch (const Error& e) {
      bad(e.what());
    }
  }
};

struct StepRecord {
  double t = 0.0;
  std::size_t target = 0;
  bool switched = false;
  std::vector<DeputyState> truth;
  Eigen::VectorXd xhat;
  std::vector<double> entropy_prior;  // after propagation, before the update
  std::vector<double> entropy;        // after the update
  std::vector<double> logdet_prior;
  std::vector<double> logdet;
  std::vector<double> min_eig;
  std::vector<bool> visible;
  ChiefAttitudeState attitude;
  Vec3 u = Vec3::Zero();  // torque applied over [t, t + dt)
  Vec7 h = Vec7::Zero();
  AzEl ref;               // stage-0 reference direction
  MpcDiagnostics mpc;
};

struct SimLog {
  std::size_t num_deputies = 0;
  double dt = 1.0;
  double epsilon = 0.0;
  double delta = 100.0;
  double u_max = 0.0;
  double omega_max = 0.0;
  bool sun_exclusion = false;
  std::vector<double> beta;
  std::vector<StepRecord> steps;
};

/// Closed loop: truth and attitude propagation under the held torque,
/// belief propagation, measurement fusion, target selection, reference
/// generation and MPC, once per dt. Deterministic for a given seed.
/// Steps completed before a failure stay in `log`.
inline void run_scenario_into(const ScenarioConfig& cfg, SimLog& log) {
  cfg.validate();
  const std::vector<NmtSpec> specs = cfg.deputies.resolve();
  const std::size_t d = specs.size();
  MpcConfig mpc = cfg.mpc;
  mpc.dt = cfg.dt;
  const ActuationBounds bounds{mpc.u_max, mpc.omega_max};

  std::mt19937_64 rng(cfg.seed);
  auto uniform = [&rng](double lo, double hi) {
    return lo + (hi - lo) * std::generate_canonical<double, 53>(rng);
  };
  std::normal_distribution<double> normal(0.0, 1.0);

  ChiefAttitudeState att;
  att.gamma = EulerAngles321{uniform(-kPi, kPi), uniform(-cfg.init.theta_box, cfg.init.theta_box),
                             uniform(-kPi, kPi)};
  att.omega = Vec3(uniform(-cfg.init.omega_box, cfg.init.omega_box),
                   uniform(-cfg.init.omega_box, cfg.init.omega_box),
                   uniform(-cfg.init.omega_box, cfg.init.omega_box));
  if (cfg.init.attitude) att.gamma = *cfg.init.attitude;
  if (cfg.init.omega) att.omega = *cfg.init.omega;

  log = SimLog{};
  log.num_deputies = d;
  log.dt = cfg.dt;
  log.epsilon = cfg.supervisor.epsilon;
  log.delta = cfg.supervisor.delta;
  log.u_max = mpc.u_max;
  log.omega_max = mpc.omega_max;
  log.sun_exclusion = cfg.sensor.sun_exclusion;

  std::vector<DeputyState> truth;
  for (const auto& s : specs) truth.push_back(sample_nmt(s, cfg.orbit));
  for (std::size_t i = 0; i < d; ++i) log.beta.push_back(uniform(cfg.init.beta_lo, cfg.init.beta_hi));

  BeliefCatalog belief = BeliefCatalog::from_states(truth, log.beta);
  belief.Q = cfg.noise.Q;
  belief.R_meas = cfg.noise.R_meas;
  const Mat6 r_chol = Eigen::LLT<Mat6>(cfg.noise.R_meas).matrixL();

  SupervisorState sup;
  sup.delta = cfg.supervisor.delta;
  sup.epsilon = cfg.supervisor.epsilon;
  sup.tau = 0.0;
  {
    const auto h0 = entropies(belief);
    sup.j = argmax_entropy(h0);
  }

  const auto steps = static_cast<long>(std::llround(cfg.duration / cfg.dt));
  log.steps.reserve(static_cast<std::size_t>(steps));
  Vec3 u_hold = Vec3::Zero();
  std::optional<ControlSequence> warm;

  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * cfg.dt;
    try {
      if (k > 0) {
        for (auto& x : truth) x = propagate_deputy(x, cfg.orbit, cfg.dt);
        att = step_attitude(att, TorqueCommand{u_hold}, cfg.inertia, cfg.orbit, cfg.dt);
        belief = propagate_belief(belief, cfg.orbit, cfg.dt);
      }
      StepRecord rec;
      rec.t = t;
      for (const auto& p : belief.P) {
        rec.logdet_prior.push_back(log_determinant(p));
        rec.entropy_prior.push_back(entropy(p));
      }

      const ObservationMatrix obs = build_observation(att, truth, cfg.sensor);
      Measurement meas;
      meas.visible = obs.visible;
      meas.y.resize(6 * static_cast<Eigen::Index>(obs.num_visible()));
      Eigen::Index row = 0;
      for (std::size_t i = 0; i < d; ++i) {
        if (!obs.visible[i]) continue;
        Vec6 n;
        for (int c = 0; c < 6; ++c) n(c) = normal(rng);
        meas.y.segment<6>(row) = truth[i].vec() + r_chol * n;
        row += 6;
      }
      belief = update_belief(belief, meas, obs);

      for (const auto& p : belief.P) {
        rec.logdet.push_back(log_determinant(p));
        rec.entropy.push_back(entropy(p));
        rec.min_eig.push_back(min_eigenvalue(p));
      }

      const TargetDecision dec = select_target(std::span<const double>(rec.entropy), sup, t,
                                               cfg.supervisor.options);
      rec.switched = dec.switched;
      sup.j = dec.j;
      sup.tau = dec.tau;
      rec.target = sup.j;

      const ReferenceTrajectory ref = build_reference(belief.mean(sup.j), cfg.orbit, mpc);
      const MpcSolution sol = solve_mpc(att, ref, cfg.inertia, cfg.orbit, mpc, cfg.sensor,
                                        (mpc.warm_start && warm) ? &*warm : nullptr);
      u_hold = sol.u.u.front();
      warm = shift_sequence(sol.u);

      rec.truth = truth;
      rec.xhat = belief.xhat;
      rec.visible = obs.visible;
      rec.attitude = att;
      rec.u = u_hold;
      rec.h = constraint_vector(att, TorqueCommand{u_hold}, cfg.sensor, bounds);
      rec.ref = ref.azel.front();
      rec.mpc = sol.diag;

      if (cfg.abort_on_violation) {
        const bool sun_bad = cfg.sensor.sun_exclusion && rec.h(0) > 1e-6;
        const bool rate_bad = rec.h.segment<3>(1).maxCoeff() > 1e-6;
        if (sun_bad || rate_bad) throw Error(ErrorCode::ConstraintViolation, "state constraint violated");
      }
      log.steps.push_back(std::move(rec));
    } catch (const Error& e) {
      throw Error(e.code(), "step " + std::to_string(k) + " (t=" + std::to_string(t) + "): " + e.detail());
    }
  }
}

inline SimLog run_scenario(const ScenarioConfig& cfg) {
  SimLog log;
  run_scenario_into(cfg, log);
  return log;
}

struct Metrics {
  std::vector<std::optional<double>> settle_time;  // first t with entropy <= epsilon
  std::optional<double> all_settled_time;
  std::size_t post_settle_steps = 0;
  double post_settle_fraction = 0.0;      // post-settle steps with max entropy <= epsilon
  double post_settle_fraction_tol = 0.0;  // same, with epsilon + 0.5 nats
  double mean_margin = 0.0;               // mean epsilon - entropy after each deputy settles
  std::size_t switch_count = 0;
  double min_switch_gap = std::numeric_limits<double>::infinity();
  double total_torque = 0.0;  // ∫ Σ|u_k| dt, N m s
  double max_abs_omega = 0.0;
  double max_h1 = -std::numeric_limits<double>::infinity();
  double max_abs_u = 0.0;
};

inline constexpr double kSettleTolerance = 0.5;  // nats above epsilon

inline Metrics summarize(const SimLog& log) {
  if (log.steps.empty()) throw Error(ErrorCode::InvalidArgument, "cannot summarize an empty log");
  const std::size_t d = log.num_deputies;
  Metrics m;
  m.settle_time.assign(d, std::nullopt);
  std::vector<std::size_t> settle_idx(d, log.steps.size());
  for (std::size_t k = 0; k < log.steps.size(); ++k) {
    for (std::size_t i = 0; i < d; ++i) {
      if (!m.settle_time[i] && log.steps[k].entropy[i] <= log.epsilon) {
        m.settle_time[i] = log.steps[k].t;
        settle_idx[i] = k;
      }
    }
  }
  std::size_t all_idx = 0;
  bool all = true;
  for (std::size_t i = 0; i < d; ++i) {
    if (!m.settle_time[i]) all = false;
    else all_idx = std::max(all_idx, settle_idx[i]);
  }
  if (all) {
    m.all_settled_time = log.steps[all_idx].t;
    std::size_t ok = 0, ok_tol = 0;
    for (std::size_t k = all_idx; k < log.steps.size(); ++k) {
      double hmax = -std::numeric_limits<double>::infinity();
      for (double h : log.steps[k].entropy) hmax = std::max(hmax, h);
      ok += hmax <= log.epsilon;
      ok_tol += hmax <= log.epsilon + kSettleTolerance;
    }
    m.post_settle_steps = log.steps.size() - all_idx;
    m.post_settle_fraction = static_cast<double>(ok) / static_cast<double>(m.post_settle_steps);
    m.post_settle_fraction_tol = static_cast<double>(ok_tol) / static_cast<double>(m.post_settle_steps);
  }
  double margin_sum = 0.0;
  std::size_t margin_n = 0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t k = settle_idx[i]; k < log.steps.size(); ++k) {
      margin_sum += log.epsilon - log.steps[k].entropy[i];
      ++margin_n;
    }
  }
  m.mean_margin = margin_n ? margin_sum / static_cast<double>(margin_n) : 0.0;

  std::optional<double> last_switch;
  for (const auto& s : log.steps) {
    if (s.switched) {
      ++m.switch_count;
      if (last_switch) m.min_switch_gap = std::min(m.min_switch_gap, s.t - *last_switch);
      last_switch = s.t;
    }
    m.total_torque += s.u.cwiseAbs().sum() * log.dt;
    m.max_abs_omega = std::max(m.max_abs_omega, s.attitude.omega.cwiseAbs().maxCoeff());
    m.max_h1 = std::max(m.max_h1, s.h(0));
    m.max_abs_u = std::max(m.max_abs_u, s.u.cwiseAbs().maxCoeff());
  }
  return m;
}

}  // namespace catmaint

#endif  // CATMAINT_SIMLOOP_HPP
