#ifndef CATMAINT_RELMOTION_HPP
#define CATMAINT_RELMOTION_HPP

#include <cmath>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "catmaint/error.hpp"
#include "catmaint/frames.hpp"

namespace catmaint {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

struct OrbitParams {
  double eta = 0.0012;  // mean motion, rad/s
};

/// Deputy position/velocity in Hill's frame (x radial, y along-track,
/// z orbit normal).
struct DeputyState {
  Vec3 r = Vec3::Zero();  // m
  Vec3 v = Vec3::Zero();  // m/s

  Vec6 vec() const {
    Vec6 x;
    x << r, v;
    return x;
  }
  static DeputyState from_vec(const Vec6& x) {
    return DeputyState{x.head<3>(), x.tail<3>()};
  }
};

/// Clohessy-Wiltshire state matrix:
///   ẍ = 3η²x + 2ηẏ,  ÿ = -2ηẋ,  z̈ = -η²z.
inline Mat6 cw_matrix(const OrbitParams& p) {
  const double n = p.eta;
  Mat6 a = Mat6::Zero();
  a.topRightCorner<3, 3>().setIdentity();
  a(3, 0) = 3.0 * n * n;
  a(3, 4) = 2.0 * n;
  a(4, 3) = -2.0 * n;
  a(5, 2) = -n * n;
  return a;
}

namespace detail {

// sin(nt)/n, (1 - cos(nt))/n and (sin(nt) - nt)/n, with series near nt = 0
// so that eta -> 0 reduces to the double integrator without cancellation.
struct CwCoefficients {
  double c, s, s_over_n, omc_over_n, s_minus_nt_over_n;
};

inline CwCoefficients cw_coefficients(double n, double t) {
  const double nt = n * t;
  CwCoefficients k{};
  k.c = std::cos(nt);
  k.s = std::sin(nt);
  if (std::abs(nt) < 1e-4) {
    const double nt2 = nt * nt;
    k.s_over_n = t * (1.0 - nt2 / 6.0 + nt2 * nt2 / 120.0);
    k.omc_over_n = t * nt * (0.5 - nt2 / 24.0 + nt2 * nt2 / 720.0);
    k.s_minus_nt_over_n = -t * nt2 * (1.0 / 6.0 - nt2 / 120.0);
  } else {
    k.s_over_n = k.s / n;
    k.omc_over_n = (1.0 - k.c) / n;
    k.s_minus_nt_over_n = (k.s - nt) / n;
  }
  return k;
}

}  // namespace detail

/// Closed-form state transition exp(A t) of the CW equations.
inline Mat6 cw_transition(const OrbitParams& p, double t) {
  const double n = p.eta;
  const auto k = detail::cw_coefficients(n, t);
  Mat6 phi = Mat6::Zero();
  // position rows
  phi(0, 0) = 4.0 - 3.0 * k.c;
  phi(0, 3) = k.s_over_n;
  phi(0, 4) = 2.0 * k.omc_over_n;
  phi(1, 0) = 6.0 * n * k.s_minus_nt_over_n;  // 6(s - nt)
  phi(1, 1) = 1.0;
  phi(1, 3) = -2.0 * k.omc_over_n;
  phi(1, 4) = 4.0 * k.s_minus_nt_over_n + t;  // (4s - 3nt)/n
  phi(2, 2) = k.c;
  phi(2, 5) = k.s_over_n;
  // velocity rows
  phi(3, 0) = 3.0 * n * k.s;
  phi(3, 3) = k.c;
  phi(3, 4) = 2.0 * k.s;
  phi(4, 0) = -6.0 * n * n * k.omc_over_n;  // -6n(1 - c)
  phi(4, 3) = -2.0 * k.s;
  phi(4, 4) = 4.0 * k.c - 3.0;
  phi(5, 2) = -n * k.s;
  phi(5, 5) = k.c;
  return phi;
}

inline DeputyState propagate_deputy(const DeputyState& x, const OrbitParams& p, double dt) {
  return DeputyState::from_vec(cw_transition(p, dt) * x.vec());
}

/// Classical RK4 step of ẋ = A x; kept as a cross-check of the closed form.
inline Vec6 rk4_step(const Mat6& a, const Vec6& x, double dt) {
  const Vec6 k1 = a * x;
  const Vec6 k2 = a * (x + 0.5 * dt * k1);
  const Vec6 k3 = a * (x + 0.5 * dt * k2);
  const Vec6 k4 = a * (x + dt * k3);
  return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline DeputyState propagate_deputy_rk4(const DeputyState& x, const OrbitParams& p, double dt,
                                        int steps = 1) {
  const Mat6 a = cw_matrix(p);
  Vec6 s = x.vec();
  for (int i = 0; i < steps; ++i) s = rk4_step(a, s, dt);
  return DeputyState::from_vec(s);
}

// ---------------------------------------------------------------------------
// Natural motion trajectories

struct StationaryPoint {
  double ry = 0.0;  // along-track offset, m
};

struct LineSegment {
  double c = 0.0;    // out-of-plane amplitude, m
  double psi = 0.0;  // phase, rad
};

/// Centred 2x1 ellipse. At phase 0 the deputy sits at (0, ry0, rz0).
struct Ellipse {
  double ry0 = 0.0;    // along-track amplitude, m
  double rz0 = 0.0;    // out-of-plane amplitude, m
  double phase = 0.0;  // rad
};

using NmtSpec = std::variant<StationaryPoint, LineSegment, Ellipse>;

/// Deputy state on the requested NMT at t = 0.
inline DeputyState sample_nmt(const NmtSpec& spec, const OrbitParams& p) {
  const double n = p.eta;
  if (!(n > 0.0)) throw Error(ErrorCode::InvalidSpec, "mean motion must be positive");
  return std::visit(
      [n](const auto& s) -> DeputyState {
        using S = std::decay_t<decltype(s)>;
        DeputyState x;
        if constexpr (std::is_same_v<S, StationaryPoint>) {
          x.r = Vec3(0.0, s.ry, 0.0);
        } else if constexpr (std::is_same_v<S, LineSegment>) {
          if (!(s.c > 0.0)) throw Error(ErrorCode::InvalidSpec, "line segment needs c > 0");
          x.r = Vec3(0.0, 0.0, s.c * std::sin(s.psi));
          x.v = Vec3(0.0, 0.0, n * s.c * std::cos(s.psi));
        } else {
          if (s.ry0 == 0.0 && s.rz0 == 0.0) {
            throw Error(ErrorCode::InvalidSpec, "ellipse needs ry0 or rz0 nonzero");
          }
          const double sp = std::sin(s.phase), cp = std::cos(s.phase);
          x.r = Vec3(0.5 * s.ry0 * sp, s.ry0 * cp, s.rz0 * cp);
          x.v = Vec3(0.5 * n * s.ry0 * cp, -n * s.ry0 * sp, -n * s.rz0 * sp);
        }
        return x;
      },
      spec);
}

enum class NmtClass { StationaryPoint, LineSegment, Ellipse, OffsetEllipse, NotClosed };

inline std::string to_string(NmtClass c) {
  switch (c) {
    case NmtClass::StationaryPoint: return "StationaryPoint";
    case NmtClass::LineSegment: return "LineSegment";
    case NmtClass::Ellipse: return "Ellipse";
    case NmtClass::OffsetEllipse: return "OffsetEllipse";
    case NmtClass::NotClosed: return "NotClosed";
  }
  return "?";
}

/// Classifies a state against the closed-NMT conditions with tolerance
/// 1e-9 * max(1, |x|). A state satisfying ẏ = -2ηx but not the centring
/// condition ẋ = ηy/2 is a closed ellipse offset along-track.
inline NmtClass validate_nmt(const DeputyState& x, const OrbitParams& p) {
  const double n = p.eta;
  const double tol = 1e-9 * std::max(1.0, x.vec().norm());
  auto zero = [tol](double v) { return std::abs(v) <= tol; };
  if (!zero(x.v.y() + 2.0 * n * x.r.x())) return NmtClass::NotClosed;
  if (zero(x.r.x()) && zero(x.v.x())) {
    return (zero(x.r.z()) && zero(x.v.z())) ? NmtClass::StationaryPoint : NmtClass::LineSegment;
  }
  if (zero(x.v.x() - 0.5 * n * x.r.y())) return NmtClass::Ellipse;
  return NmtClass::OffsetEllipse;
}

}  // namespace catmaint

#endif  // CATMAINT_RELMOTION_HPP
