#ifndef CATMAINT_SENSING_HPP
#define CATMAINT_SENSING_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "catmaint/attitude.hpp"
#include "catmaint/error.hpp"
#include "catmaint/frames.hpp"
#include "catmaint/relmotion.hpp"

namespace catmaint {

using Vec7 = Eigen::Matrix<double, 7, 1>;

/// Conical sensor and the static sun direction.
struct SensorConfig {
  Vec3 p_b = Vec3::UnitX();          // boresight in B, unit
  double alpha = 20.0 * kPi / 180.0;  // half-angle, rad
  Vec3 sun = Vec3::UnitZ();          // sun direction in H, unit
  bool sun_exclusion = true;         // whether the controller enforces h1

  bool is_valid() const {
    return std::abs(p_b.norm() - 1.0) <= 1e-9 && std::abs(sun.norm() - 1.0) <= 1e-9 &&
           alpha > 0.0 && alpha < kPi / 2.0;
  }
};

/// Boundary slack on the cone test, radians.
inline constexpr double kFovSlack = 1e-12;

/// Boresight direction expressed in Hill's frame.
inline Vec3 boresight_hill(const EulerAngles321& g, const SensorConfig& cfg) {
  return euler_to_rotmat(g).m * cfg.p_b;
}

inline bool in_fov(const ChiefAttitudeState& att, const DeputyState& x, const SensorConfig& cfg) {
  const double range = x.r.norm();
  if (!(range > 1e-9)) throw Error(ErrorCode::ZeroRange, "deputy coincides with the chief");
  const double c = std::clamp(boresight_hill(att.gamma, cfg).dot(x.r / range), -1.0, 1.0);
  return std::acos(c) <= cfg.alpha + kFovSlack;
}

/// Logical form of the block observation matrix: one flag per deputy.
/// Invisible deputies contribute no rows.
struct ObservationMatrix {
  std::vector<bool> visible;

  std::size_t num_deputies() const { return visible.size(); }
  std::size_t num_visible() const {
    return static_cast<std::size_t>(std::count(visible.begin(), visible.end(), true));
  }

  /// 6v x 6d matrix stacking an identity block per visible deputy.
  Eigen::MatrixXd materialize() const {
    const auto d = static_cast<Eigen::Index>(visible.size());
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(6 * static_cast<Eigen::Index>(num_visible()), 6 * d);
    Eigen::Index row = 0;
    for (Eigen::Index i = 0; i < d; ++i) {
      if (!visible[static_cast<std::size_t>(i)]) continue;
      c.block<6, 6>(row, 6 * i).setIdentity();
      row += 6;
    }
    return c;
  }
};

inline ObservationMatrix build_observation(const ChiefAttitudeState& att,
                                           const std::vector<DeputyState>& catalog,
                                           const SensorConfig& cfg) {
  ObservationMatrix obs;
  obs.visible.reserve(catalog.size());
  for (const auto& x : catalog) obs.visible.push_back(in_fov(att, x, cfg));
  return obs;
}

struct ActuationBounds {
  double u_max = 2.0 * kPi;  // N m
  double omega_max = kPi;    // rad/s
};

/// Sun-exclusion term: s . (R p_B) - cos(alpha), feasible when <= 0.
template <typename T>
T sun_constraint(const T& psi, const T& theta, const T& phi, const SensorConfig& cfg) {
  using std::cos;
  const Eigen::Matrix<T, 3, 1> b = rotation_321(psi, theta, phi) * cfg.p_b.template cast<T>();
  return b.dot(cfg.sun.template cast<T>()) - T(std::cos(cfg.alpha));
}

/// h = (h1, |ω1|-ωmax, |ω2|-ωmax, |ω3|-ωmax, |u1|-umax, |u2|-umax, |u3|-umax).
inline Vec7 constraint_vector(const ChiefAttitudeState& att, const TorqueCommand& u,
                              const SensorConfig& cfg, const ActuationBounds& bounds) {
  Vec7 h;
  h(0) = sun_constraint(att.gamma.psi, att.gamma.theta, att.gamma.phi, cfg);
  for (int k = 0; k < 3; ++k) {
    h(1 + k) = std::abs(att.omega(k)) - bounds.omega_max;
    h(4 + k) = std::abs(u.u(k)) - bounds.u_max;
  }
  return h;
}

}  // namespace catmaint

#endif  // CATMAINT_SENSING_HPP
