#ifndef CATMAINT_MPC_HPP
#define CATMAINT_MPC_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/AutoDiff>

#include "catmaint/attitude.hpp"
#include "catmaint/box_qp.hpp"
#include "catmaint/error.hpp"
#include "catmaint/frames.hpp"
#include "catmaint/relmotion.hpp"
#include "catmaint/sensing.hpp"

namespace catmaint {

using Mat2 = Eigen::Matrix2d;

struct SolverOptions {
  int max_iters = 40;            // Levenberg-Marquardt iterations per penalty round
  double tol_grad = 1e-6;        // projected-gradient norm
  double tol_step = 1e-8;        // max-norm of an accepted step
  double penalty_mu0 = 1e3;
  double penalty_growth = 10.0;
  int penalty_rounds = 3;
  double omega_margin = 0.02;    // rad/s, tightening of the rate bound
  double sun_margin = 0.02;      // tightening of h1 (cosine units)
  double pitch_limit = 1.3;      // rad, soft keep-out from the Euler singularity
};

struct MpcConfig {
  int N = 10;
  double dt = 1.0;
  Mat2 W1 = Mat2::Identity();
  Mat3 W2 = Mat3::Identity();
  double u_max = 2.0 * kPi;
  double omega_max = kPi;
  bool wrap_angle_errors = false;
  bool warm_start = true;
  SolverOptions solver;

  void validate() const {
    auto spd = [](const auto& w) {
      if (!w.isApprox(w.transpose(), 1e-12)) return false;
      Eigen::LLT<std::decay_t<decltype(w)>> llt(w);
      return llt.info() == Eigen::Success;
    };
    if (N < 2) throw Error(ErrorCode::InvalidArgument, "MPC horizon must be >= 2");
    if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "MPC dt must be positive");
    if (!spd(W1) || !spd(W2)) throw Error(ErrorCode::InvalidArgument, "MPC weights must be SPD");
    if (!(u_max > 0.0) || !(omega_max > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "MPC bounds must be positive");
    }
  }
};

/// Angle pairs (psi_r, theta_r) per stage plus the raw az-el they came from.
struct ReferenceTrajectory {
  std::vector<Vec2> z;
  std::vector<AzEl> azel;
};

struct ControlSequence {
  std::vector<Vec3> u;

  static ControlSequence zeros(int n) { return ControlSequence{std::vector<Vec3>(static_cast<std::size_t>(n), Vec3::Zero())}; }

  Eigen::VectorXd flat() const {
    Eigen::VectorXd v(3 * static_cast<Eigen::Index>(u.size()));
    for (std::size_t i = 0; i < u.size(); ++i) v.segment<3>(3 * static_cast<Eigen::Index>(i)) = u[i];
    return v;
  }
  static ControlSequence from_flat(const Eigen::VectorXd& v) {
    ControlSequence c;
    for (Eigen::Index i = 0; i + 2 < v.size(); i += 3) c.u.emplace_back(v.segment<3>(i));
    return c;
  }
};

/// Pointing pair that puts the body x-axis on a given az-el direction.
/// With the adopted 3-2-1 matrix the boresight is (cψcθ, sψcθ, -sθ), so
/// the pitch reference is the negated elevation.
inline Vec2 pointing_angles(const AzEl& ae) { return Vec2(ae.az, -ae.el); }

/// Az-el track of a deputy mean over the horizon, stage i at t0 + i dt.
inline ReferenceTrajectory build_reference(const Vec6& xhat_j, const OrbitParams& p,
                                           const MpcConfig& cfg) {
  ReferenceTrajectory ref;
  ref.z.reserve(static_cast<std::size_t>(cfg.N));
  ref.azel.reserve(static_cast<std::size_t>(cfg.N));
  for (int i = 0; i < cfg.N; ++i) {
    const Vec6 x = cw_transition(p, i * cfg.dt) * xhat_j;
    const Vec3 r = x.head<3>();
    if (!(r.norm() > 1e-9)) throw Error(ErrorCode::ZeroRange, "reference deputy at the chief");
    const AzEl ae = azel(r);
    ref.azel.push_back(ae);
    ref.z.push_back(pointing_angles(ae));
  }
  return ref;
}

struct RolloutResult {
  std::vector<Vec2> z;                     // (psi, theta) of the pre-input state, stages 0..N-1
  std::vector<ChiefAttitudeState> states;  // stages 0..N
};

/// Forward integration with zero-order-hold torque. Angles are not wrapped
/// inside the horizon; the plant wraps after each applied step.
inline RolloutResult rollout(const ChiefAttitudeState& z0, const ControlSequence& useq,
                             const InertiaMatrix& inertia, const OrbitParams& p,
                             const MpcConfig& cfg) {
  if (static_cast<int>(useq.u.size()) != cfg.N) {
    throw Error(ErrorCode::InvalidArgument, "control sequence length differs from horizon");
  }
  RolloutResult out;
  out.states.reserve(useq.u.size() + 1);
  out.states.push_back(z0);
  Vec6 x = z0.vec();
  for (const Vec3& u : useq.u) {
    if (!(std::abs(x(1)) < kPitchGuard)) {
      throw Error(ErrorCode::NearSingularPitch, "rollout reached the pitch guard");
    }
    out.z.emplace_back(x(0), x(1));
    x = detail::attitude_rk4<double>(x, u, inertia, p.eta, cfg.dt);
    if (!x.allFinite() || !(std::abs(x(1)) < kPitchGuard)) {
      throw Error(ErrorCode::NearSingularPitch, "rollout reached the pitch guard");
    }
    out.states.push_back(ChiefAttitudeState::from_vec(x));
  }
  return out;
}

inline Vec2 angle_error(const Vec2& z, const Vec2& zr, bool wrap) {
  Vec2 e = z - zr;
  if (wrap) e = Vec2(wrap_pi(e(0)), wrap_pi(e(1)));
  return e;
}

/// Σ (z_i - z^r_i)ᵀ W1 (z_i - z^r_i) + u_iᵀ W2 u_i over the horizon.
inline double mpc_cost(const std::vector<Vec2>& zseq, const ControlSequence& useq,
                       const ReferenceTrajectory& ref, const Mat2& w1, const Mat3& w2,
                       bool wrap_angle_errors = false) {
  if (zseq.size() != useq.u.size() || zseq.size() != ref.z.size()) {
    throw Error(ErrorCode::InvalidArgument, "mpc_cost sequences differ in length");
  }
  double j = 0.0;
  for (std::size_t i = 0; i < zseq.size(); ++i) {
    const Vec2 e = angle_error(zseq[i], ref.z[i], wrap_angle_errors);
    j += e.dot(w1 * e) + useq.u[i].dot(w2 * useq.u[i]);
  }
  return j;
}

enum class SolveStatus { Converged, MaxIterations };

struct MpcDiagnostics {
  SolveStatus status = SolveStatus::Converged;
  int iterations = 0;
  int penalty_rounds = 0;
  double grad_norm = 0.0;        // projected gradient, final round
  double cost = 0.0;             // tracking cost of the returned sequence
  double objective = 0.0;        // cost plus penalties at the final weight
  double objective_zero = 0.0;   // same objective for the zero sequence
  double final_mu = 0.0;
  double max_omega_violation = 0.0;  // predicted, against the untightened bound
  double max_sun_violation = 0.0;    // predicted h1 if positive
};

struct MpcSolution {
  ControlSequence u;
  MpcDiagnostics diag;
};

/// Residual form of the single-shooting problem. The objective is rᵀr, where
/// r stacks the weighted angle errors, weighted torques, and exterior
/// penalty terms sqrt(mu) * max(0, g) for the rate, sun and pitch keep-outs.
class MpcProblem {
 public:
  MpcProblem(const ChiefAttitudeState& z0, ReferenceTrajectory ref, const InertiaMatrix& inertia,
             const OrbitParams& orbit, const MpcConfig& cfg, const SensorConfig& sensor)
      : z0_(z0), ref_(std::move(ref)), inertia_(inertia), orbit_(orbit), cfg_(cfg), sensor_(sensor) {
    cfg_.validate();
    if (static_cast<int>(ref_.z.size()) != cfg_.N) {
      throw Error(ErrorCode::InvalidArgument, "reference length differs from horizon");
    }
    l1_ = Eigen::LLT<Mat2>(cfg_.W1).matrixU();
    l2_ = Eigen::LLT<Mat3>(cfg_.W2).matrixU();
  }

  int num_vars() const { return 3 * cfg_.N; }
  int num_residuals() const { return 10 * cfg_.N; }
  const MpcConfig& config() const { return cfg_; }

  /// Tracking cost of the rollout, +inf if it reaches the pitch guard.
  double cost(const Eigen::VectorXd& u) const {
    const auto r = residuals(u, 0.0);
    return r ? r->head(5 * cfg_.N).squaredNorm() : std::numeric_limits<double>::infinity();
  }

  /// Penalized objective at weight mu, +inf if the rollout reaches the guard.
  double objective(const Eigen::VectorXd& u, double mu) const {
    const auto r = residuals(u, mu);
    return r ? r->squaredNorm() : std::numeric_limits<double>::infinity();
  }

  std::optional<Eigen::VectorXd> residuals(const Eigen::VectorXd& u, double mu) const {
    Linearization lin;
    if (!evaluate(u, mu, false, lin)) return std::nullopt;
    return lin.r;
  }

  struct Linearization {
    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
  };

  std::optional<Linearization> linearize(const Eigen::VectorXd& u, double mu) const {
    Linearization lin;
    if (!evaluate(u, mu, true, lin)) return std::nullopt;
    return lin;
  }

  /// Gradient of objective(u, mu): 2 Jᵀ r.
  Eigen::VectorXd gradient(const Eigen::VectorXd& u, double mu) const {
    const auto lin = linearize(u, mu);
    if (!lin) throw Error(ErrorCode::NearSingularPitch, "gradient at a singular rollout");
    return 2.0 * lin->jac.transpose() * lin->r;
  }

  /// Violations of the untightened rate and sun constraints along the
  /// predicted trajectory.
  std::pair<double, double> predicted_violations(const Eigen::VectorXd& u) const {
    double w = 0.0, s = 0.0;
    try {
      const auto ro = rollout(z0_, ControlSequence::from_flat(u), inertia_, orbit_, cfg_);
      for (std::size_t i = 1; i < ro.states.size(); ++i) {
        const auto& st = ro.states[i];
        w = std::max(w, st.omega.cwiseAbs().maxCoeff() - cfg_.omega_max);
        if (sensor_.sun_exclusion) {
          s = std::max(s, sun_constraint(st.gamma.psi, st.gamma.theta, st.gamma.phi, sensor_));
        }
      }
    } catch (const Error&) {
      return {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    }
    return {std::max(w, 0.0), std::max(s, 0.0)};
  }

 private:
  using Ad9 = Eigen::AutoDiffScalar<Eigen::Matrix<double, 9, 1>>;
  using Ad3 = Eigen::AutoDiffScalar<Eigen::Matrix<double, 3, 1>>;

  // Jacobians of one RK4 step with respect to state and torque.
  void step_jacobian(const Vec6& x, const Vec3& u, Mat6& a, Eigen::Matrix<double, 6, 3>& b) const {
    Eigen::Matrix<Ad9, 6, 1> xa;
    Eigen::Matrix<Ad9, 3, 1> ua;
    for (int k = 0; k < 6; ++k) xa(k) = Ad9(x(k), 9, k);
    for (int k = 0; k < 3; ++k) ua(k) = Ad9(u(k), 9, 6 + k);
    const Eigen::Matrix<Ad9, 6, 1> ya =
        detail::attitude_rk4<Ad9>(xa, ua, inertia_, orbit_.eta, cfg_.dt);
    for (int r = 0; r < 6; ++r) {
      const auto& d = ya(r).derivatives();
      for (int c = 0; c < 6; ++c) a(r, c) = d.size() ? d(c) : 0.0;
      for (int c = 0; c < 3; ++c) b(r, c) = d.size() ? d(6 + c) : 0.0;
    }
  }

  bool evaluate(const Eigen::VectorXd& u, double mu, bool want_jac, Linearization& out) const {
    const int n = cfg_.N;
    const Eigen::Index nv = 3 * n;
    if (u.size() != nv) throw Error(ErrorCode::InvalidArgument, "decision vector size");
    const double smu = std::sqrt(mu);
    const double w_lim = cfg_.omega_max - cfg_.solver.omega_margin;
    const double p_lim = cfg_.solver.pitch_limit;
    const bool sun_on = sensor_.sun_exclusion;

    // residual blocks: [angles 2N | torques 3N | rates 3N | sun N | pitch N]
    const Eigen::Index off_u = 2 * n, off_w = 5 * n, off_s = 8 * n, off_p = 9 * n;
    out.r = Eigen::VectorXd::Zero(10 * n);
    if (want_jac) out.jac = Eigen::MatrixXd::Zero(10 * n, nv);

    Eigen::MatrixXd sens = Eigen::MatrixXd::Zero(6, nv);  // d state_i / d u
    Vec6 x = z0_.vec();
    Mat6 a;
    Eigen::Matrix<double, 6, 3> b;
    for (int i = 0; i < n; ++i) {
      if (!x.allFinite() || !(std::abs(x(1)) < kPitchGuard)) return false;
      // stage cost on the pre-input state
      const Vec2 e = angle_error(Vec2(x(0), x(1)), ref_.z[static_cast<std::size_t>(i)],
                                 cfg_.wrap_angle_errors);
      out.r.segment<2>(2 * i) = l1_ * e;
      const Vec3 ui = u.segment<3>(3 * i);
      out.r.segment<3>(off_u + 3 * i) = l2_ * ui;
      if (want_jac) {
        out.jac.block(2 * i, 0, 2, nv) = l1_ * sens.topRows<2>();
        out.jac.block<3, 3>(off_u + 3 * i, 3 * i) = l2_;
      }

      if (want_jac) {
        step_jacobian(x, ui, a, b);
        Eigen::MatrixXd s_next = a * sens;
        s_next.middleCols<3>(3 * i) += b;
        sens = std::move(s_next);
      }
      x = detail::attitude_rk4<double>(x, ui, inertia_, orbit_.eta, cfg_.dt);
      if (!x.allFinite() || !(std::abs(x(1)) < kPitchGuard)) return false;

      // keep-out penalties on the post-input state i+1
      for (int c = 0; c < 3; ++c) {
        const double g = std::abs(x(3 + c)) - w_lim;
        if (g > 0.0) {
          out.r(off_w + 3 * i + c) = smu * g;
          if (want_jac) {
            const double sgn = x(3 + c) >= 0.0 ? 1.0 : -1.0;
            out.jac.row(off_w + 3 * i + c) = smu * sgn * sens.row(3 + c);
          }
        }
      }
      if (sun_on) {
        Ad3 psi(x(0), 3, 0), th(x(1), 3, 1), ph(x(2), 3, 2);
        const Ad3 h1 = sun_constraint<Ad3>(psi, th, ph, sensor_);
        const double g = h1.value() + cfg_.solver.sun_margin;
        if (g > 0.0) {
          out.r(off_s + i) = smu * g;
          if (want_jac) {
            out.jac.row(off_s + i) = smu * (h1.derivatives().transpose() * sens.topRows<3>());
          }
        }
      }
      {
        const double g = std::abs(x(1)) - p_lim;
        if (g > 0.0) {
          out.r(off_p + i) = smu * g;
          if (want_jac) {
            const double sgn = x(1) >= 0.0 ? 1.0 : -1.0;
            out.jac.row(off_p + i) = smu * sgn * sens.row(1);
          }
        }
      }
    }
    return true;
  }

  ChiefAttitudeState z0_;
  ReferenceTrajectory ref_;
  InertiaMatrix inertia_;
  OrbitParams orbit_;
  MpcConfig cfg_;
  SensorConfig sensor_;
  Mat2 l1_;
  Mat3 l2_;
};

namespace detail {

// Rate-damping torque sequence, one of the candidate start points.
inline Eigen::VectorXd damping_sequence(const ChiefAttitudeState& z0, const InertiaMatrix& inertia,
                                        const OrbitParams& p, const MpcConfig& cfg, double gain) {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(3 * cfg.N);
  Vec6 x = z0.vec();
  for (int i = 0; i < cfg.N; ++i) {
    const Vec3 w = x.tail<3>();
    const Vec3 ui = (-gain / cfg.dt) * inertia.diagonal().cwiseProduct(w);
    u.segment<3>(3 * i) = ui.cwiseMax(-cfg.u_max).cwiseMin(cfg.u_max);
    x = attitude_rk4<double>(x, Vec3(u.segment<3>(3 * i)), inertia, p.eta, cfg.dt);
    if (!x.allFinite()) break;
  }
  return u;
}

inline double projected_gradient_norm(const Eigen::VectorXd& u, const Eigen::VectorXd& g,
                                      double u_max) {
  return (u - (u - g).cwiseMax(-u_max).cwiseMin(u_max)).norm();
}

}  // namespace detail

/// Box-constrained Levenberg-Marquardt on the penalized residuals. Torque
/// bounds are enforced exactly by the box; rate, sun and pitch keep-outs by
/// exterior quadratic penalties whose weight grows per round.
inline MpcSolution solve_mpc(const ChiefAttitudeState& z0, const ReferenceTrajectory& ref,
                             const InertiaMatrix& inertia, const OrbitParams& p,
                             const MpcConfig& cfg, const SensorConfig& sensor,
                             const ControlSequence* warm = nullptr) {
  if (!(std::abs(z0.gamma.theta) < kPitchGuard)) {
    throw Error(ErrorCode::NearSingularPitch, "initial pitch beyond guard");
  }
  const MpcProblem prob(z0, ref, inertia, p, cfg, sensor);
  const SolverOptions& so = cfg.solver;
  const Eigen::Index nv = prob.num_vars();
  const Eigen::VectorXd lo = Eigen::VectorXd::Constant(nv, -cfg.u_max);
  const Eigen::VectorXd hi = Eigen::VectorXd::Constant(nv, cfg.u_max);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(nv);

  double mu = so.penalty_mu0;
  Eigen::VectorXd u = zero;
  double f = prob.objective(zero, mu);
  auto consider = [&](const Eigen::VectorXd& cand) {
    const Eigen::VectorXd c = cand.cwiseMax(lo).cwiseMin(hi);
    const double fc = prob.objective(c, mu);
    if (fc < f) {
      u = c;
      f = fc;
    }
  };
  if (warm != nullptr && static_cast<int>(warm->u.size()) == cfg.N) consider(warm->flat());
  for (double gain : {0.5, 1.0, 0.25}) consider(detail::damping_sequence(z0, inertia, p, cfg, gain));
  if (!std::isfinite(f)) {
    throw Error(ErrorCode::NearSingularPitch, "no start sequence avoids the pitch singularity");
  }

  MpcDiagnostics diag;
  for (int round = 0; round < so.penalty_rounds; ++round) {
    if (round > 0) {
      mu *= so.penalty_growth;
      f = prob.objective(u, mu);
    }
    diag.penalty_rounds = round + 1;
    diag.status = SolveStatus::MaxIterations;
    double lambda = 1e-3;
    for (int it = 0; it < so.max_iters; ++it) {
      const auto lin = prob.linearize(u, mu);
      if (!lin) throw Error(ErrorCode::SolverFailure, "accepted iterate has no finite rollout");
      const Eigen::VectorXd g = 2.0 * lin->jac.transpose() * lin->r;
      diag.grad_norm = detail::projected_gradient_norm(u, g, cfg.u_max);
      if (diag.grad_norm < so.tol_grad) {
        diag.status = SolveStatus::Converged;
        break;
      }
      const Eigen::MatrixXd h = 2.0 * lin->jac.transpose() * lin->jac;
      const double hscale = std::max(1.0, h.diagonal().maxCoeff());
      bool accepted = false;
      Eigen::VectorXd step;
      while (lambda < 1e12) {
        Eigen::MatrixXd hd = h;
        hd.diagonal().array() += lambda * hscale;
        step = solve_box_qp(hd, g, lo - u, hi - u).x;
        const Eigen::VectorXd trial = (u + step).cwiseMax(lo).cwiseMin(hi);
        const double ft = prob.objective(trial, mu);
        if (ft < f) {
          u = trial;
          f = ft;
          accepted = true;
          lambda = std::max(lambda / 3.0, 1e-9);
          break;
        }
        lambda *= 4.0;
      }
      ++diag.iterations;
      if (!accepted || step.lpNorm<Eigen::Infinity>() < so.tol_step) {
        diag.status = SolveStatus::Converged;
        break;
      }
    }
    // stop escalating once the tightened keep-outs hold
    const auto r = prob.residuals(u, 1.0);
    if (!r || r->tail(5 * cfg.N).squaredNorm() == 0.0) break;
  }

  // never return something worse than doing nothing
  diag.objective_zero = prob.objective(zero, mu);
  if (!(f <= diag.objective_zero)) {
    u = zero;
    f = diag.objective_zero;
  }
  diag.final_mu = mu;
  diag.objective = f;
  diag.cost = prob.cost(u);
  const auto [wv, sv] = prob.predicted_violations(u);
  diag.max_omega_violation = wv;
  diag.max_sun_violation = sv;
  if (!std::isfinite(f)) throw Error(ErrorCode::SolverFailure, "MPC objective is not finite");
  return MpcSolution{ControlSequence::from_flat(u), diag};
}

/// Receding-horizon warm start: drop the applied stage and append zero.
inline ControlSequence shift_sequence(const ControlSequence& c) {
  ControlSequence s;
  if (c.u.empty()) return s;
  s.u.assign(c.u.begin() + 1, c.u.end());
  s.u.push_back(Vec3::Zero());
  return s;
}

}  // namespace catmaint

#endif  // CATMAINT_MPC_HPP
