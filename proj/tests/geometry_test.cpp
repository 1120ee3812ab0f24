#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "halo/geometry.hpp"

namespace halo {
namespace {

BallPoint pt(double x, double y) { return BallPoint(Vec{{x, y}}); }

ManifoldParams curv(double c) {
  ManifoldParams m;
  m.c = c;
  return m;
}

TEST(ConformalFactor, ClosedForm) {
  EXPECT_DOUBLE_EQ(conformal_factor(pt(0, 0), curv(1)), 2.0);
  EXPECT_NEAR(conformal_factor(pt(0.5, 0), curv(1)), 2.0 / 0.75, 1e-12);
  EXPECT_NEAR(conformal_factor(pt(0.5, 0), curv(0.5)), 2.0 / 0.875, 1e-12);
}

TEST(MobiusAdd, Identities) {
  const auto m = curv(1);
  const auto a = mobius_add(pt(0.3, 0.2), pt(0, 0), m);
  EXPECT_NEAR(a.coords[0], 0.3, 1e-15);
  EXPECT_NEAR(a.coords[1], 0.2, 1e-15);
  const auto b = mobius_add(pt(0, 0), pt(0.4, 0), m);
  EXPECT_NEAR(b.coords[0], 0.4, 1e-15);
  EXPECT_NEAR(b.coords[1], 0.0, 1e-15);
}

TEST(MobiusAdd, CollinearMatchesScalarFormula) {
  const auto r = mobius_add(pt(0.3, 0), pt(0.4, 0), curv(1));
  EXPECT_NEAR(r.coords[0], 0.7 / 1.12, 1e-12);
  EXPECT_NEAR(r.coords[1], 0.0, 1e-15);
}

TEST(MobiusAdd, LeftInverse) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  const auto m = curv(1.7);
  for (int t = 0; t < 200; ++t) {
    const auto x = project_to_ball(Vec{{u(rng), u(rng), u(rng)}}, m);
    const auto y = project_to_ball(Vec{{u(rng), u(rng), u(rng)}}, m);
    const BallPoint neg(-x.coords);
    const auto back = mobius_add(neg, mobius_add(x, y, m), m);
    EXPECT_LT((back.coords - y.coords).norm(), 1e-12);
  }
}

TEST(ExpMap, Origin) {
  const auto m = curv(1);
  EXPECT_EQ(exp_map(BallPoint::origin(2), Vec::Zero(2), m).coords.norm(), 0.0);
  const auto e = exp_map(BallPoint::origin(2), Vec{{1.0, 0.0}}, m);
  EXPECT_NEAR(e.coords[0], std::tanh(1.0), 1e-12);
  EXPECT_NEAR(e.coords[1], 0.0, 1e-15);
}

TEST(ExpMap, RadiusIsTwiceTangentNorm) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 0.7);
  const auto m = curv(1);
  for (int t = 0; t < 100; ++t) {
    const Vec v{{g(rng), g(rng), g(rng)}};
    if (v.norm() > 3.0) continue;  // tanh saturates into the margin beyond this
    EXPECT_NEAR(hyperbolic_radius(exp_map(BallPoint::origin(3), v, m), m), 2.0 * v.norm(), 1e-9);
  }
}

TEST(LogMap, IdentityAndInverse) {
  const auto m = curv(1);
  const auto z = log_map(pt(0.2, 0.1), pt(0.2, 0.1), m);
  EXPECT_EQ(z.coords.norm(), 0.0);
  const auto v = log_map(BallPoint::origin(2), pt(std::tanh(1.0), 0), m);
  EXPECT_NEAR(v.coords[0], 1.0, 1e-9);
  EXPECT_NEAR(v.coords[1], 0.0, 1e-12);
}

TEST(LogMap, RoundTrip) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto m = curv(1);
  for (int t = 0; t < 1000; ++t) {
    const auto x = project_to_ball(Vec{{0.6 * u(rng), 0.6 * u(rng)}}, m);
    Vec v{{u(rng), u(rng)}};
    v *= 2.0 * std::abs(u(rng)) / std::max(v.norm(), 1e-12);
    const auto y = exp_map(x, v, m);
    if (y.coords.norm() >= m.max_norm() - 1e-12) continue;  // clipped by the margin
    EXPECT_LT((log_map(x, y, m).coords - v).norm(), 1e-9);
  }
}

TEST(Distance, ClosedFormAndSymmetry) {
  const auto m = curv(1);
  EXPECT_EQ(poincare_distance(pt(0.1, 0.2), pt(0.1, 0.2), m), 0.0);
  EXPECT_NEAR(poincare_distance(pt(0, 0), pt(0.5, 0), m), 2.0 * std::atanh(0.5), 1e-12);
  EXPECT_NEAR(2.0 * std::atanh(0.5), 1.098612, 1e-6);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-0.7, 0.7);
  for (int t = 0; t < 500; ++t) {
    const auto x = project_to_ball(Vec{{u(rng), u(rng)}}, m);
    const auto y = project_to_ball(Vec{{u(rng), u(rng)}}, m);
    EXPECT_LT(std::abs(poincare_distance(x, y, m) - poincare_distance(y, x, m)), 1e-12);
  }
}

TEST(Radius, MatchesDistanceToOrigin) {
  const auto m = curv(1);
  EXPECT_EQ(hyperbolic_radius(pt(0, 0), m), 0.0);
  EXPECT_NEAR(hyperbolic_radius(pt(std::tanh(1.0), 0), m), 2.0, 1e-12);
  const auto h = pt(0.3, -0.45);
  EXPECT_NEAR(hyperbolic_radius(h, m), poincare_distance(h, BallPoint::origin(2), m), 1e-12);
}

TEST(Project, MarginAndErrors) {
  const auto m = curv(1);
  EXPECT_EQ(project_to_ball(Vec{{0.1, 0.0}}, m).coords[0], 0.1);
  EXPECT_NEAR(project_to_ball(Vec{{2.0, 0.0}}, m).coords[0], 0.99999, 1e-12);
  EXPECT_EQ(project_to_ball(Vec{{0.0, 0.0}}, m).coords.norm(), 0.0);
  EXPECT_THROW(project_to_ball(Vec{{NAN, 0.0}}, m), std::invalid_argument);
}

TEST(ManifoldParams, Validation) {
  ManifoldParams m;
  m.c = 0.0;
  EXPECT_THROW(m.validate(), std::invalid_argument);
  m.c = 1.0;
  m.eps = 1e-2;
  EXPECT_THROW(m.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace halo
