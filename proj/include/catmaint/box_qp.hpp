#ifndef CATMAINT_BOX_QP_HPP
#define CATMAINT_BOX_QP_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "catmaint/error.hpp"

namespace catmaint {

struct BoxQpResult {
  Eigen::VectorXd x;
  int iterations = 0;
  bool converged = false;
};

/// Primal active-set solver for
///   minimize ½ xᵀHx + gᵀx  subject to  lo <= x <= hi
/// with H symmetric positive definite and lo <= 0 <= hi (x = 0 feasible).
inline BoxQpResult solve_box_qp(const Eigen::MatrixXd& h, const Eigen::VectorXd& g,
                                const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                int max_iters = -1) {
  const Eigen::Index n = g.size();
  if (h.rows() != n || h.cols() != n || lo.size() != n || hi.size() != n) {
    throw Error(ErrorCode::InvalidArgument, "box QP dimension mismatch");
  }
  if ((lo.array() > 0.0).any() || (hi.array() < 0.0).any()) {
    throw Error(ErrorCode::InvalidArgument, "box QP needs lo <= 0 <= hi");
  }
  if (max_iters < 0) max_iters = static_cast<int>(10 * n + 10);

  // 0 free, -1 held at lower bound, +1 held at upper bound
  std::vector<int> state(static_cast<std::size_t>(n), 0);
  BoxQpResult res;
  res.x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd& x = res.x;

  for (int it = 0; it < max_iters; ++it) {
    res.iterations = it + 1;
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (state[static_cast<std::size_t>(i)] == 0) free.push_back(i);
    }
    const Eigen::VectorXd grad = h * x + g;
    Eigen::VectorXd step = Eigen::VectorXd::Zero(n);
    if (!free.empty()) {
      const auto nf = static_cast<Eigen::Index>(free.size());
      Eigen::MatrixXd hf(nf, nf);
      Eigen::VectorXd gf(nf);
      for (Eigen::Index a = 0; a < nf; ++a) {
        gf(a) = grad(free[a]);
        for (Eigen::Index b = 0; b < nf; ++b) hf(a, b) = h(free[a], free[b]);
      }
      const Eigen::VectorXd pf = hf.ldlt().solve(-gf);
      for (Eigen::Index a = 0; a < nf; ++a) step(free[a]) = pf(a);
    }

    const double scale = 1.0 + x.lpNorm<Eigen::Infinity>();
    if (step.lpNorm<Eigen::Infinity>() <= 1e-13 * scale) {
      // Stationary on the current face: release the worst wrong-signed bound.
      Eigen::Index worst = -1;
      double worst_val = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const int s = state[static_cast<std::size_t>(i)];
        // At the lower bound the gradient must be >= 0, at the upper <= 0.
        const double v = s == -1 ? -grad(i) : (s == 1 ? grad(i) : 0.0);
        if (v > worst_val) {
          worst_val = v;
          worst = i;
        }
      }
      if (worst < 0 || worst_val <= 1e-12 * (1.0 + grad.lpNorm<Eigen::Infinity>())) {
        res.converged = true;
        return res;
      }
      state[static_cast<std::size_t>(worst)] = 0;
      continue;
    }

    double alpha = 1.0;
    Eigen::Index block = -1;
    int block_side = 0;
    for (Eigen::Index i : free) {
      if (step(i) < 0.0) {
        const double a = (lo(i) - x(i)) / step(i);
        if (a < alpha) {
          alpha = a;
          block = i;
          block_side = -1;
        }
      } else if (step(i) > 0.0) {
        const double a = (hi(i) - x(i)) / step(i);
        if (a < alpha) {
          alpha = a;
          block = i;
          block_side = 1;
        }
      }
    }
    alpha = std::max(alpha, 0.0);
    x += alpha * step;
    if (block >= 0) {
      x(block) = block_side < 0 ? lo(block) : hi(block);
      state[static_cast<std::size_t>(block)] = block_side;
    }
  }
  x = x.cwiseMax(lo).cwiseMin(hi);
  return res;
}

}  // namespace catmaint

#endif  // CATMAINT_BOX_QP_HPP
