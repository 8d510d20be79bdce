#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "catmaint/relmotion.hpp"
#include "test_util.hpp"

using namespace catmaint;
using catmaint::testing::rel_err;
using catmaint::testing::uni;

namespace {

const OrbitParams kLeo{0.0012};

Vec6 rand_state(std::mt19937_64& rng) {
  Vec6 x;
  for (int i = 0; i < 3; ++i) x(i) = uni(rng, -500, 500);
  for (int i = 3; i < 6; ++i) x(i) = uni(rng, -0.5, 0.5);
  return x;
}

}  // namespace

TEST(CwMatrix, UnitMeanMotion) {
  const Mat6 a = cw_matrix(OrbitParams{1.0});
  Mat6 want = Mat6::Zero();
  want.topRightCorner<3, 3>().setIdentity();
  want(3, 0) = 3;
  want(3, 4) = 2;
  want(4, 3) = -2;
  want(5, 2) = -1;
  EXPECT_EQ(a, want);
}

TEST(CwMatrix, ZeroMeanMotionIsDoubleIntegrator) {
  const Mat6 a = cw_matrix(OrbitParams{0.0});
  Mat6 want = Mat6::Zero();
  want.topRightCorner<3, 3>().setIdentity();
  EXPECT_EQ(a, want);
}

TEST(CwMatrix, Eigenvalues) {
  const Eigen::VectorXcd ev = cw_matrix(kLeo).eigenvalues();
  int zeros = 0, plus = 0, minus = 0;
  for (int i = 0; i < 6; ++i) {
    // the zero eigenvalue is defective, so its computed value scatters by ~sqrt(eps)*eta
    if (std::abs(ev(i)) < 1e-9) ++zeros;
    else if (std::abs(ev(i) - std::complex<double>(0, kLeo.eta)) < 1e-12) ++plus;
    else if (std::abs(ev(i) - std::complex<double>(0, -kLeo.eta)) < 1e-12) ++minus;
  }
  EXPECT_EQ(zeros, 2);
  EXPECT_EQ(plus, 2);
  EXPECT_EQ(minus, 2);
}

TEST(CwTransition, IdentityAtZero) {
  EXPECT_TRUE(cw_transition(kLeo, 0.0).isApprox(Mat6::Identity(), 0.0));
}

TEST(CwTransition, MatchesScipyExpm) {
  Vec6 x0, want;
  x0 << 12.0, -340.0, 55.0, 0.31, -0.07, 0.02;
  want << 186.85848724742877, -582.3025989276741, 46.15916780498759, 0.10699612064339545,
      -0.48966036939382906, -0.04108329304806804;
  EXPECT_LT(rel_err(cw_transition(kLeo, 777.0) * x0, want), 1e-12);
}

TEST(CwTransition, MatchesMatrixExponential) {
  for (double t : {1e-9, 1e-4, 0.5, 1.0, 37.0, 1000.0, 5235.98}) {
    const Mat6 e = (cw_matrix(kLeo) * t).exp();
    EXPECT_LT((cw_transition(kLeo, t) - e).norm() / e.norm(), 1e-12) << "t=" << t;
  }
}

TEST(CwTransition, Semigroup) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const double a = uni(rng, -3000, 3000), b = uni(rng, -3000, 3000);
    const Mat6 lhs = cw_transition(kLeo, a) * cw_transition(kLeo, b);
    EXPECT_LT((lhs - cw_transition(kLeo, a + b)).norm(), 1e-10 * std::max(1.0, lhs.norm()));
  }
}

TEST(CwTransition, EllipsePeriodic) {
  const Vec6 x = sample_nmt(Ellipse{350, -120, 0.7}, kLeo).vec();
  EXPECT_LT(rel_err(cw_transition(kLeo, 2 * kPi / kLeo.eta) * x, x), 1e-9);
}

TEST(PropagateDeputy, StationaryUnchanged) {
  const DeputyState x = sample_nmt(StationaryPoint{250}, kLeo);
  for (double dt : {1.0, 100.0, 12345.0}) {
    EXPECT_LT(rel_err(propagate_deputy(x, kLeo, dt).vec(), x.vec()), 1e-12);
  }
}

TEST(PropagateDeputy, EllipseReturnsAfterPeriod) {
  const DeputyState x = sample_nmt(Ellipse{200, 80, 1.1}, kLeo);
  const auto y = propagate_deputy(x, kLeo, 2 * kPi / kLeo.eta);
  EXPECT_LT(rel_err(y.vec(), x.vec()), 1e-8);
}

TEST(PropagateDeputy, Rk4MatchesClosedForm) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 20; ++i) {
    const DeputyState x = DeputyState::from_vec(rand_state(rng));
    const auto a = propagate_deputy_rk4(x, kLeo, 1.0, 1);
    const auto b = propagate_deputy(x, kLeo, 1.0);
    EXPECT_LT(rel_err(a.vec(), b.vec()), 1e-8);
  }
}

TEST(PropagateDeputy, Rk4LongHorizon) {
  std::mt19937_64 rng(7);
  const Mat6 phi = cw_transition(kLeo, 1.0);
  for (int i = 0; i < 5; ++i) {
    Vec6 x = rand_state(rng), y = x;
    const Mat6 a = cw_matrix(kLeo);
    for (int k = 0; k < 10000; ++k) {
      x = rk4_step(a, x, 1.0);
      y = phi * y;
    }
    EXPECT_LT(rel_err(x, y), 1e-8);
  }
}

TEST(SampleNmt, Examples) {
  const OrbitParams p{0.001};
  auto x = sample_nmt(Ellipse{200, 0, 0}, p);
  EXPECT_LT((x.r - Vec3(0, 200, 0)).norm(), 1e-12);
  EXPECT_LT((x.v - Vec3(0.1, 0, 0)).norm(), 1e-15);
  EXPECT_DOUBLE_EQ(x.v.x(), 0.5 * p.eta * x.r.y());

  x = sample_nmt(LineSegment{100, kPi / 2}, p);
  EXPECT_LT((x.r - Vec3(0, 0, 100)).norm(), 1e-12);
  EXPECT_LT(x.v.norm(), 1e-15);

  x = sample_nmt(StationaryPoint{-75}, p);
  EXPECT_EQ(x.r, Vec3(0, -75, 0));
  EXPECT_EQ(x.v, Vec3::Zero());
}

TEST(SampleNmt, InvalidSpecs) {
  EXPECT_THROW(sample_nmt(Ellipse{0, 0, 0}, kLeo), Error);
  EXPECT_THROW(sample_nmt(LineSegment{0, 1}, kLeo), Error);
  EXPECT_THROW(sample_nmt(StationaryPoint{10}, OrbitParams{0.0}), Error);
}

TEST(ValidateNmt, Examples) {
  EXPECT_EQ(validate_nmt(sample_nmt(Ellipse{300, 50, 2.0}, kLeo), kLeo), NmtClass::Ellipse);
  EXPECT_EQ(validate_nmt(sample_nmt(LineSegment{40, 0.3}, kLeo), kLeo), NmtClass::LineSegment);
  EXPECT_EQ(validate_nmt(sample_nmt(StationaryPoint{10}, kLeo), kLeo), NmtClass::StationaryPoint);
  EXPECT_EQ(validate_nmt(DeputyState{}, kLeo), NmtClass::StationaryPoint);

  auto bad = sample_nmt(Ellipse{300, 0, 0.4}, kLeo);
  bad.v.y() += 1.0;
  EXPECT_EQ(validate_nmt(bad, kLeo), NmtClass::NotClosed);

  auto offset = sample_nmt(Ellipse{300, 0, 0.4}, kLeo);
  offset.r.y() += 100.0;
  EXPECT_EQ(validate_nmt(offset, kLeo), NmtClass::OffsetEllipse);
}

TEST(ValidateNmt, ClassPreservedByFlow) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 50; ++i) {
    NmtSpec spec;
    switch (i % 3) {
      case 0: spec = Ellipse{uni(rng, 10, 800), uni(rng, -400, 400), uni(rng, -kPi, kPi)}; break;
      case 1: spec = LineSegment{uni(rng, 1, 300), uni(rng, -kPi, kPi)}; break;
      default: spec = StationaryPoint{uni(rng, -500, 500)}; break;
    }
    const DeputyState x = sample_nmt(spec, kLeo);
    const NmtClass c = validate_nmt(x, kLeo);
    for (double dt : {1.0, 333.0, 2000.0, 7000.0}) {
      EXPECT_EQ(validate_nmt(propagate_deputy(x, kLeo, dt), kLeo), c);
    }
  }
}

TEST(Nmt, EllipseInPlaneInvariant) {
  const DeputyState x0 = sample_nmt(Ellipse{420, 90, 0.3}, kLeo);
  const double c0 = std::pow(2 * x0.r.x(), 2) + x0.r.y() * x0.r.y();
  const double period = 2 * kPi / kLeo.eta;
  for (int k = 1; k <= 200; ++k) {
    const auto x = propagate_deputy(x0, kLeo, period * k / 200.0);
    const double c = std::pow(2 * x.r.x(), 2) + x.r.y() * x.r.y();
    EXPECT_NEAR(c / c0, 1.0, 1e-6);
  }
}
