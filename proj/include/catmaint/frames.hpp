#ifndef CATMAINT_FRAMES_HPP
#define CATMAINT_FRAMES_HPP

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "catmaint/error.hpp"

namespace catmaint {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;

/// Cross-product matrix: skew(a) * b == a.cross(b).
template <typename T>
Eigen::Matrix<T, 3, 3> skew(const Eigen::Matrix<T, 3, 1>& a) {
  Eigen::Matrix<T, 3, 3> m;
  m << T(0), -a(2), a(1),
       a(2), T(0), -a(0),
       -a(1), a(0), T(0);
  return m;
}

inline Mat3 skew(const Vec3& a) { return skew<double>(a); }

/// Wraps an angle into [-pi, pi].
inline double wrap_pi(double a) {
  return std::remainder(a, 2.0 * kPi);
}

/// Yaw-pitch-roll set of the 3-2-1 sequence, radians.
struct EulerAngles321 {
  double psi = 0.0;    // yaw
  double theta = 0.0;  // pitch
  double phi = 0.0;    // roll

  bool operator==(const EulerAngles321&) const = default;
};

/// Orientation of the chief body frame B with respect to Hill's frame H.
///
/// `m` maps body components to Hill components (x^H = m * x^B). The matrix
/// is the transpose of the frame-transformation product R1(phi) R2(theta)
/// R3(psi) built from passive elementary rotations, i.e. the active product
/// Rz(psi) Ry(theta) Rx(phi):
///
///   [ cψcθ   cψsθsφ - sψcφ   cψsθcφ + sψsφ ]
///   [ sψcθ   sψsθsφ + cψcφ   sψsθcφ - cψsφ ]
///   [ -sθ    cθsφ            cθcφ          ]
///
/// so the body x-axis points at (cψcθ, sψcθ, -sθ) in H.
struct RotationMatrix {
  Mat3 m = Mat3::Identity();

  /// Orthonormality and determinant checks, Frobenius norm.
  bool is_valid(double tol = 1e-9) const {
    return (m.transpose() * m - Mat3::Identity()).norm() <= tol &&
           std::abs(m.determinant() - 1.0) <= tol;
  }

  Mat3 transpose() const { return m.transpose(); }
};

template <typename T>
Eigen::Matrix<T, 3, 3> rotation_321(const T& psi, const T& theta, const T& phi) {
  using std::cos;
  using std::sin;
  const T cps = cos(psi), sps = sin(psi);
  const T cth = cos(theta), sth = sin(theta);
  const T cph = cos(phi), sph = sin(phi);
  Eigen::Matrix<T, 3, 3> r;
  r << cps * cth, cps * sth * sph - sps * cph, cps * sth * cph + sps * sph,
       sps * cth, sps * sth * sph + cps * cph, sps * sth * cph - cps * sph,
       -sth, cth * sph, cth * cph;
  return r;
}

inline RotationMatrix euler_to_rotmat(const EulerAngles321& g) {
  return RotationMatrix{rotation_321(g.psi, g.theta, g.phi)};
}

/// Inverse of euler_to_rotmat. Throws GimbalLock when |sin(theta)| is
/// within 1e-9 of one.
inline EulerAngles321 rotmat_to_euler(const RotationMatrix& r) {
  const double s = -r.m(2, 0);
  if (std::abs(s) >= 1.0 - 1e-9) {
    throw Error(ErrorCode::GimbalLock, "pitch extraction argument at +-1");
  }
  return EulerAngles321{std::atan2(r.m(1, 0), r.m(0, 0)), std::asin(s),
                        std::atan2(r.m(2, 1), r.m(2, 2))};
}

struct AzEl {
  double az = 0.0;  // [-pi, pi]
  double el = 0.0;  // [-pi/2, pi/2]
};

/// Cartesian direction to azimuth-elevation. az = atan2(s2, s1) with
/// atan2(0, 0) taken as 0 at the poles; el = asin(s3).
inline AzEl azel(const Vec3& x) {
  const double n = x.norm();
  if (!(n > 1e-12)) {
    throw Error(ErrorCode::ZeroVector, "azel of a vector with norm <= 1e-12");
  }
  const Vec3 s = x / n;
  const double az = (s(0) == 0.0 && s(1) == 0.0) ? 0.0 : std::atan2(s(1), s(0));
  const double el = std::asin(std::clamp(s(2), -1.0, 1.0));
  return AzEl{az, el};
}

}  // namespace catmaint

#endif  // CATMAINT_FRAMES_HPP
