#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "halo/optim.hpp"

namespace halo {
namespace {

OptimConfig plain(double momentum = 0.0, double wd = 0.0) {
  OptimConfig cfg;
  cfg.momentum = momentum;
  cfg.weight_decay = wd;
  return cfg;
}

TEST(PolyLr, Schedule) {
  OptimConfig cfg;
  cfg.total_steps = 1000;
  cfg.poly_power = 0.5;
  EXPECT_DOUBLE_EQ(poly_lr(cfg, 0, 0.02), 0.02);
  EXPECT_DOUBLE_EQ(poly_lr(cfg, 1000, 0.02), 0.0);
  EXPECT_DOUBLE_EQ(poly_lr(cfg, 5000, 0.02), 0.0);
  EXPECT_NEAR(poly_lr(cfg, 500, 0.02), 0.02 * std::sqrt(0.5), 1e-15);
}

TEST(EuclideanSgd, FixedPointAndVanilla) {
  std::vector<double> p{1.0, -2.0}, g{0.0, 0.0}, buf{0.0, 0.0};
  sgd_step_euclidean(p, g, buf, 0.1, plain(0.9));
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));

  g = {0.5, -1.0};
  sgd_step_euclidean(p, g, buf, 0.1, plain());
  EXPECT_DOUBLE_EQ(p[0], 1.0 - 0.05);
  EXPECT_DOUBLE_EQ(p[1], -2.0 + 0.1);
}

TEST(EuclideanSgd, MomentumRecurrence) {
  std::vector<double> p{0.0}, g{2.0}, buf{0.0};
  sgd_step_euclidean(p, g, buf, 0.1, plain(0.9));
  sgd_step_euclidean(p, g, buf, 0.1, plain(0.9));
  EXPECT_NEAR(p[0], -0.1 * 2.0 * (1.0 + 1.9), 1e-15);
}

TEST(EuclideanSgd, WeightDecayFoldsIntoGradient) {
  std::vector<double> p{2.0}, g{0.0}, buf{0.0};
  sgd_step_euclidean(p, g, buf, 0.5, plain(0.0, 0.1));
  EXPECT_DOUBLE_EQ(p[0], 2.0 - 0.5 * 0.2);
}

TEST(RiemannianSgd, FixedPoint) {
  ManifoldParams m;
  const BallPoint p(Vec{{0.3, -0.1}});
  Vec buf = Vec::Zero(2);
  const auto q = rsgd_step_manifold(p, Vec::Zero(2), buf, 1.0, m, plain(0.9));
  EXPECT_EQ(q.coords, p.coords);
}

TEST(RiemannianSgd, OriginStepUsesInverseMetric) {
  ManifoldParams m;
  Vec buf = Vec::Zero(2);
  const auto q = rsgd_step_manifold(BallPoint::origin(2), Vec{{4.0, 0.0}}, buf, 1.0, m, plain());
  const auto want = exp_map(BallPoint::origin(2), Vec{{-1.0, 0.0}}, m);
  EXPECT_NEAR((q.coords - want.coords).norm(), 0.0, 1e-15);
  EXPECT_NEAR(q.coords[0], -std::tanh(1.0), 1e-12);
}

TEST(RiemannianSgd, LargeStepsStayInBall) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1e3);
  for (double c : {0.5, 1.0, 2.0}) {
    ManifoldParams m;
    m.c = c;
    BallPoint p = BallPoint::origin(3);
    Vec buf = Vec::Zero(3);
    for (int t = 0; t < 10000; ++t) {
      p = rsgd_step_manifold(p, Vec{{g(rng), g(rng), g(rng)}}, buf, 10.0, m, plain(0.9));
      ASSERT_LE(p.coords.norm(), m.max_norm() * (1.0 + 1e-15));
      ASSERT_TRUE(p.coords.allFinite());
    }
  }
}

TEST(OptimConfig, Validation) {
  OptimConfig cfg;
  cfg.momentum = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.poly_power = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace halo
