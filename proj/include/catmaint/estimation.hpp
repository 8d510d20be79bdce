#ifndef CATMAINT_ESTIMATION_HPP
#define CATMAINT_ESTIMATION_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "catmaint/error.hpp"
#include "catmaint/relmotion.hpp"
#include "catmaint/sensing.hpp"

namespace catmaint {

/// Gaussian beliefs over d deputies: stacked means and the diagonal blocks
/// of the (block-diagonal) covariance. Q and R_meas are shared per deputy;
/// the noise input matrix is the identity.
struct BeliefCatalog {
  Eigen::VectorXd xhat;     // 6d
  std::vector<Mat6> P;      // d blocks
  Mat6 Q = 1e-6 * Mat6::Identity();
  Mat6 R_meas = Vec6(1.0, 1.0, 1.0, 1e-2, 1e-2, 1e-2).asDiagonal();

  std::size_t size() const { return P.size(); }
  Vec6 mean(std::size_t i) const { return xhat.segment<6>(6 * static_cast<Eigen::Index>(i)); }
  void set_mean(std::size_t i, const Vec6& m) {
    xhat.segment<6>(6 * static_cast<Eigen::Index>(i)) = m;
  }

  static BeliefCatalog from_states(const std::vector<DeputyState>& states,
                                   const std::vector<double>& beta) {
    if (states.empty() || states.size() != beta.size()) {
      throw Error(ErrorCode::InvalidArgument, "belief catalog needs d >= 1 means and variances");
    }
    BeliefCatalog b;
    b.xhat.resize(6 * static_cast<Eigen::Index>(states.size()));
    for (std::size_t i = 0; i < states.size(); ++i) {
      b.set_mean(i, states[i].vec());
      b.P.push_back(beta[i] * Mat6::Identity());
    }
    return b;
  }
};

/// Stacked measurements of the visible deputies, in catalog order.
struct Measurement {
  Eigen::VectorXd y;
  std::vector<bool> visible;
};

inline Mat6 symmetrize(const Mat6& m) { return 0.5 * (m + m.transpose()); }

/// Zero-order-hold process noise over one step, trapezoid rule:
/// Q_d = dt/2 (Φ Q Φᵀ + Q).
inline Mat6 discrete_process_noise(const Mat6& phi, const Mat6& q, double dt) {
  return symmetrize(0.5 * dt * (phi * q * phi.transpose() + q));
}

inline BeliefCatalog propagate_belief(const BeliefCatalog& b, const OrbitParams& p, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "propagate_belief needs dt > 0");
  const Mat6 phi = cw_transition(p, dt);
  const Mat6 qd = discrete_process_noise(phi, b.Q, dt);
  BeliefCatalog out = b;
  for (std::size_t i = 0; i < b.size(); ++i) {
    out.set_mean(i, phi * b.mean(i));
    out.P[i] = symmetrize(phi * b.P[i] * phi.transpose() + qd);
  }
  return out;
}

/// Kalman update with H = I6 for every visible deputy.
inline BeliefCatalog update_belief(const BeliefCatalog& b, const Measurement& m,
                                   const ObservationMatrix& obs) {
  if (obs.num_deputies() != b.size() ||
      m.y.size() != 6 * static_cast<Eigen::Index>(obs.num_visible())) {
    throw Error(ErrorCode::InvalidArgument, "measurement inconsistent with observation matrix");
  }
  BeliefCatalog out = b;
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!obs.visible[i]) continue;
    const Mat6 s = b.P[i] + b.R_meas;
    Eigen::SelfAdjointEigenSolver<Mat6> eig(s, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > 1e12) {
      throw Error(ErrorCode::SingularInnovation, "innovation covariance is numerically singular");
    }
    // P and S are symmetric, so K = P S⁻¹ = (S⁻¹ P)ᵀ.
    const Mat6 k = s.ldlt().solve(b.P[i]).transpose();
    const Vec6 y = m.y.segment<6>(row);
    out.set_mean(i, b.mean(i) + k * (y - b.mean(i)));
    out.P[i] = symmetrize((Mat6::Identity() - k) * b.P[i]);
    row += 6;
  }
  return out;
}

inline double entropy_constant(int k) { return 0.5 * k * (1.0 + std::log(2.0 * kPi)); }

/// log|P| via Cholesky; a 1e-12 diagonal jitter is added when the plain
/// factorization fails. Returns -inf when |P| <= 1e-300.
template <int Dim>
double log_determinant(const Eigen::Matrix<double, Dim, Dim>& p) {
  Eigen::LLT<Eigen::Matrix<double, Dim, Dim>> llt(p);
  double ld;
  if (llt.info() == Eigen::Success) {
    ld = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, Dim, Dim>> eig(p, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0) {
      return -std::numeric_limits<double>::infinity();
    }
    ld = eig.eigenvalues().array().log().sum();
  }
  return ld <= std::log(1e-300) ? -std::numeric_limits<double>::infinity() : ld;
}

/// Shannon entropy of a Gaussian, nats: k/2 (1 + ln 2π) + ln|P|. A
/// degenerate covariance yields -inf.
inline double entropy(const Mat6& p, int k = 6) { return entropy_constant(k) + log_determinant(p); }

/// As entropy(), but a degenerate covariance is an error.
inline double checked_entropy(const Mat6& p, int k = 6) {
  const double h = entropy(p, k);
  if (std::isinf(h)) throw Error(ErrorCode::DegenerateCovariance, "covariance determinant <= 1e-300");
  return h;
}

inline std::vector<double> entropies(const BeliefCatalog& b) {
  std::vector<double> h;
  h.reserve(b.size());
  for (const auto& p : b.P) h.push_back(entropy(p));
  return h;
}

inline double min_eigenvalue(const Mat6& p) {
  Eigen::SelfAdjointEigenSolver<Mat6> eig(p, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

}  // namespace catmaint

#endif  // CATMAINT_ESTIMATION_HPP
