#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "halo/uncertainty.hpp"
#include "test_support.hpp"

namespace halo {
namespace {

EnsembleProbs single_pixel(std::initializer_list<std::vector<double>> members) {
  EnsembleProbs e;
  e.height = 1;
  e.width = 1;
  for (const auto& p : members) {
    RowMatrix m(1, static_cast<Eigen::Index>(p.size()));
    for (std::size_t k = 0; k < p.size(); ++k) m(0, static_cast<Eigen::Index>(k)) = p[k];
    e.members.push_back(m);
  }
  return e;
}

TEST(EntropyMap, HandValues) {
  RowMatrix p(3, 8);
  p.setZero();
  p(0, 2) = 1.0;
  p.row(1).setConstant(0.125);
  p(2, 0) = 0.5;
  p(2, 1) = 0.5;
  const auto h = entropy_map(p, 1, 1, 3);
  EXPECT_EQ(h.kind, ScoreKind::entropy);
  EXPECT_EQ(h.values[0], 0.0);
  EXPECT_NEAR(h.values[1], std::log(8.0), 1e-12);
  EXPECT_NEAR(h.values[2], std::log(2.0), 1e-12);
}

TEST(RadiusMap, OriginTanhAndRotation) {
  ManifoldParams m;
  RowMatrix e = RowMatrix::Zero(4, 2);
  EXPECT_EQ(radius_map(e, 1, 2, 2, m).values, std::vector<double>(4, 0.0));
  e(1, 0) = std::tanh(1.0);
  e(2, 0) = 0.3;
  e(2, 1) = -0.4;
  const auto r = radius_map(e, 1, 2, 2, m);
  EXPECT_NEAR(r.values[1], 2.0, 1e-12);

  const double a = 0.7;
  Eigen::Matrix2d rot;
  rot << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  const RowMatrix turned = e * rot.transpose();
  const auto rr = radius_map(turned, 1, 2, 2, m);
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(rr.values[i], r.values[i], 1e-12);
}

TEST(Decomposition, DisagreeingOneHotMembers) {
  const auto e = single_pixel({{1.0, 0.0}, {0.0, 1.0}});
  EXPECT_EQ(total_uncertainty(e).values[0], 1.0);
  EXPECT_EQ(aleatoric_uncertainty(e).values[0], 0.0);
  EXPECT_EQ(epistemic_uncertainty(e).values[0], 1.0);
}

TEST(Decomposition, UniformAndMixedMembers) {
  const auto u = single_pixel({{0.25, 0.25, 0.25, 0.25}, {0.25, 0.25, 0.25, 0.25}});
  EXPECT_NEAR(total_uncertainty(u).values[0], 2.0, 1e-15);
  EXPECT_NEAR(aleatoric_uncertainty(u).values[0], 2.0, 1e-15);
  EXPECT_EQ(epistemic_uncertainty(u).values[0], 0.0);

  const auto mixed = single_pixel({{0.5, 0.5}, {1.0, 0.0}});
  EXPECT_NEAR(aleatoric_uncertainty(mixed).values[0], 0.5, 1e-15);

  const auto same = single_pixel({{1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}});
  EXPECT_EQ(total_uncertainty(same).values[0], 0.0);
}

TEST(Decomposition, IdenticalRandomMembersGiveExactlyZero) {
  std::mt19937_64 rng(5);
  std::gamma_distribution<double> g(1.0, 1.0);
  EnsembleProbs e;
  e.height = 1;
  e.width = 50;
  RowMatrix p(50, 6);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = g(rng);
  p = (p.array().colwise() / p.rowwise().sum().array()).matrix();
  e.members.assign(4, p);
  for (double v : epistemic_uncertainty(e).values) EXPECT_EQ(v, 0.0);
}

TEST(Decomposition, EpistemicNonNegative) {
  std::mt19937_64 rng(17);
  std::gamma_distribution<double> g(0.3, 1.0);
  for (int members : {2, 4, 8}) {
    for (int classes : {2, 8}) {
      EnsembleProbs e;
      e.height = 1;
      e.width = 500;
      for (int mbr = 0; mbr < members; ++mbr) {
        RowMatrix p(500, classes);
        for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = g(rng) + 1e-300;
        e.members.push_back((p.array().colwise() / p.rowwise().sum().array()).matrix());
      }
      for (double v : epistemic_uncertainty(e).values) ASSERT_GE(v, -1e-9);
    }
  }
}

TEST(Decomposition, TooSmallEnsembleRejected) {
  EXPECT_THROW(total_uncertainty(single_pixel({{1.0, 0.0}})), std::invalid_argument);
}

TEST(ScoreMapIo, RoundTrip) {
  testing::TempDir tmp;
  ScoreMap m = ScoreMap::zeros(2, 3, 4, ScoreKind::acquisition);
  for (std::size_t i = 0; i < m.size(); ++i) m.values[i] = 0.25 * static_cast<double>(i);
  export_score_map(m, tmp / "a.bin");
  const auto back = import_score_map(tmp / "a.bin");
  EXPECT_TRUE(back.same_shape(m));
  EXPECT_EQ(back.kind, ScoreKind::acquisition);
  EXPECT_EQ(back.values, m.values);  // quarter steps are exact in float32
}

}  // namespace
}  // namespace halo
