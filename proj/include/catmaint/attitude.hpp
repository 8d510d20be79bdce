#ifndef CATMAINT_ATTITUDE_HPP
#define CATMAINT_ATTITUDE_HPP

#include <cmath>

#include <Eigen/Dense>

#include "catmaint/error.hpp"
#include "catmaint/frames.hpp"
#include "catmaint/relmotion.hpp"

namespace catmaint {

/// Principal moments of inertia, kg m^2.
struct InertiaMatrix {
  double j1 = 1.0, j2 = 1.0, j3 = 1.0;

  bool is_valid() const { return j1 > 0.0 && j2 > 0.0 && j3 > 0.0; }
  Vec3 diagonal() const { return Vec3(j1, j2, j3); }
};

/// Attitude of the body frame relative to Hill's frame and the body rate
/// of B relative to H expressed in B.
struct ChiefAttitudeState {
  EulerAngles321 gamma;
  Vec3 omega = Vec3::Zero();

  Vec6 vec() const {
    Vec6 x;
    x << gamma.psi, gamma.theta, gamma.phi, omega;
    return x;
  }
  static ChiefAttitudeState from_vec(const Vec6& x) {
    return ChiefAttitudeState{EulerAngles321{x(0), x(1), x(2)}, x.tail<3>()};
  }
};

struct TorqueCommand {
  Vec3 u = Vec3::Zero();  // body torque, N m
};

/// |theta| bound checked by euler_rates.
inline constexpr double kKinematicPitchLimit = kPi / 2.0 - 1e-6;
/// |theta| bound at which a simulation step aborts.
inline constexpr double kPitchGuard = kPi / 2.0 - 1e-3;

namespace detail {

// Euler-angle kinematics matrix, entries exactly as used by the controller
// model:
//   [ -cψ tθ   -sψ tθ   -1 ]
//   [  sψ      -cψ       0 ]
//   [ -cψ/cθ   -sψ/cθ    0 ]
template <typename T>
Eigen::Matrix<T, 3, 3> kinematics_matrix(const T& psi, const T& theta) {
  using std::cos;
  using std::sin;
  const T cps = cos(psi), sps = sin(psi);
  const T tth = sin(theta) / cos(theta);
  const T sec = T(1.0) / cos(theta);
  Eigen::Matrix<T, 3, 3> m;
  m << -cps * tth, -sps * tth, T(-1.0),
       sps, -cps, T(0.0),
       -cps * sec, -sps * sec, T(0.0);
  return m;
}

// Relative angular acceleration of B w.r.t. H in B, with Ω = R_H^B (0,0,η):
//   ω̇ = -J⁻¹(ω×Jω + ω×JΩ + Ω×Jω + Ω×JΩ) + ω×Ω + J⁻¹u
template <typename T>
Eigen::Matrix<T, 3, 1> omega_dot(const Eigen::Matrix<T, 3, 1>& gamma,
                                 const Eigen::Matrix<T, 3, 1>& omega,
                                 const Eigen::Matrix<T, 3, 1>& u, const InertiaMatrix& inertia,
                                 double eta) {
  const Eigen::Matrix<T, 3, 1> jd = inertia.diagonal().template cast<T>();
  const Eigen::Matrix<T, 3, 3> r_bh = rotation_321(gamma(0), gamma(1), gamma(2));
  const Eigen::Matrix<T, 3, 1> big_omega = r_bh.row(2).transpose() * T(eta);
  const Eigen::Matrix<T, 3, 1> j_omega = jd.cwiseProduct(omega);
  const Eigen::Matrix<T, 3, 1> j_big = jd.cwiseProduct(big_omega);
  const Eigen::Matrix<T, 3, 1> gyro = omega.cross(j_omega) + omega.cross(j_big) +
                                      big_omega.cross(j_omega) + big_omega.cross(j_big);
  return (u - gyro).cwiseQuotient(jd) + omega.cross(big_omega);
}

template <typename T>
Eigen::Matrix<T, 6, 1> attitude_derivative(const Eigen::Matrix<T, 6, 1>& x,
                                           const Eigen::Matrix<T, 3, 1>& u,
                                           const InertiaMatrix& inertia, double eta) {
  const Eigen::Matrix<T, 3, 1> gamma = x.template head<3>();
  const Eigen::Matrix<T, 3, 1> omega = x.template tail<3>();
  Eigen::Matrix<T, 6, 1> dx;
  dx.template head<3>() = kinematics_matrix(gamma(0), gamma(1)) * omega;
  dx.template tail<3>() = omega_dot<T>(gamma, omega, u, inertia, eta);
  return dx;
}

/// One RK4 step with zero-order-hold torque. No angle wrapping, no guard.
template <typename T>
Eigen::Matrix<T, 6, 1> attitude_rk4(const Eigen::Matrix<T, 6, 1>& x,
                                    const Eigen::Matrix<T, 3, 1>& u,
                                    const InertiaMatrix& inertia, double eta, double dt) {
  const T h(dt);
  const auto k1 = attitude_derivative<T>(x, u, inertia, eta);
  const auto k2 = attitude_derivative<T>(Eigen::Matrix<T, 6, 1>(x + k1 * (h * 0.5)), u, inertia, eta);
  const auto k3 = attitude_derivative<T>(Eigen::Matrix<T, 6, 1>(x + k2 * (h * 0.5)), u, inertia, eta);
  const auto k4 = attitude_derivative<T>(Eigen::Matrix<T, 6, 1>(x + k3 * h), u, inertia, eta);
  return x + (k1 + k2 * T(2.0) + k3 * T(2.0) + k4) * (h / 6.0);
}

}  // namespace detail

inline Vec3 euler_rates(const EulerAngles321& g, const Vec3& omega) {
  if (!(std::abs(g.theta) < kKinematicPitchLimit)) {
    throw Error(ErrorCode::NearSingularPitch, "pitch at the 3-2-1 kinematic singularity");
  }
  return detail::kinematics_matrix(g.psi, g.theta) * omega;
}

inline Vec3 omega_dot(const ChiefAttitudeState& s, const TorqueCommand& u,
                      const InertiaMatrix& inertia, const OrbitParams& p) {
  const Vec3 gamma(s.gamma.psi, s.gamma.theta, s.gamma.phi);
  return detail::omega_dot<double>(gamma, s.omega, u.u, inertia, p.eta);
}

/// RK4 step of the attitude kinematics and dynamics; yaw and roll are
/// wrapped into [-pi, pi] afterwards. Throws NearSingularPitch if either end
/// of the step lies beyond the pitch guard.
inline ChiefAttitudeState step_attitude(const ChiefAttitudeState& s, const TorqueCommand& u,
                                        const InertiaMatrix& inertia, const OrbitParams& p,
                                        double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "step_attitude needs dt > 0");
  if (!(std::abs(s.gamma.theta) < kPitchGuard)) {
    throw Error(ErrorCode::NearSingularPitch, "pitch beyond guard before step");
  }
  Vec6 x = detail::attitude_rk4<double>(s.vec(), u.u, inertia, p.eta, dt);
  if (!x.allFinite() || !(std::abs(x(1)) < kPitchGuard)) {
    throw Error(ErrorCode::NearSingularPitch, "pitch beyond guard after step");
  }
  x(0) = wrap_pi(x(0));
  x(2) = wrap_pi(x(2));
  return ChiefAttitudeState::from_vec(x);
}

inline double kinetic_energy(const Vec3& omega, const InertiaMatrix& inertia) {
  return 0.5 * omega.dot(inertia.diagonal().cwiseProduct(omega));
}

}  // namespace catmaint

#endif  // CATMAINT_ATTITUDE_HPP
