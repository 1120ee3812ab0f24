#include <gtest/gtest.h>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <cmath>
#include <random>

#include "halo/analysis.hpp"
#include "test_support.hpp"

namespace halo {
namespace {

namespace fs = std::filesystem;

BallPoint pt(double x, double y) { return BallPoint(Vec{{x, y}}); }

// Objective of the 1-D mean on the real diameter, computed from the scalar
// distance 2 atanh(|t - x| / (1 - t x)).
double line_objective(double t, const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) {
    const double d = 2.0 * std::atanh(std::abs(t - x) / (1.0 - t * x));
    s += d * d;
  }
  return s / static_cast<double>(xs.size());
}

double grid_minimizer(const std::vector<double>& xs) {
  double best = 0.0, best_f = INFINITY;
  for (double t = -0.9999; t <= 0.9999; t += 1e-4) {
    const double f = line_objective(t, xs);
    if (f < best_f) {
      best_f = f;
      best = t;
    }
  }
  double lo = best - 1e-4, hi = best + 1e-4;
  for (int it = 0; it < 100; ++it) {
    const double a = lo + (hi - lo) / 3.0, b = hi - (hi - lo) / 3.0;
    if (line_objective(a, xs) < line_objective(b, xs)) {
      hi = b;
    } else {
      lo = a;
    }
  }
  return 0.5 * (lo + hi);
}

TEST(Pearson, HandValues) {
  const std::vector<double> x{1, 2, 3, 4};
  std::vector<double> y;
  for (double v : x) y.push_back(2 * v + 3);
  EXPECT_NEAR(pearson(x, y), 1.0, 1e-15);
  std::vector<double> neg;
  for (double v : x) neg.push_back(-v);
  EXPECT_NEAR(pearson(x, neg), -1.0, 1e-15);
  const std::vector<double> a{1, 2, 3}, b{1, 3, 2};
  EXPECT_NEAR(pearson(a, b), 0.5, 1e-15);
}

TEST(Pearson, DegenerateInputs) {
  const std::vector<double> a{1, 2, 3}, flat{2, 2, 2}, one{1};
  EXPECT_THROW(pearson(a, flat), std::invalid_argument);
  EXPECT_THROW(pearson(one, one), std::invalid_argument);
}

TEST(Spearman, MonotoneAndTies) {
  const std::vector<double> x{1, 2, 3, 4, 5}, y{1, 4, 9, 16, 100};
  EXPECT_NEAR(spearman(x, y), 1.0, 1e-15);
  const std::vector<double> t{1, 1, 2}, u{0, 0, 5};
  EXPECT_NEAR(spearman(t, u), 1.0, 1e-15);
}

DatasetInference synthetic_inference(const std::vector<std::uint16_t>& labels, int classes,
                                     std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 0.2);
  std::gamma_distribution<double> gam(1.0, 1.0);
  DatasetInference inf;
  inf.embeddings.resize(static_cast<Eigen::Index>(labels.size()), 3);
  inf.probs.resize(static_cast<Eigen::Index>(labels.size()), classes);
  for (Eigen::Index i = 0; i < inf.embeddings.size(); ++i) inf.embeddings.data()[i] = g(rng);
  for (Eigen::Index i = 0; i < inf.probs.size(); ++i) inf.probs.data()[i] = gam(rng);
  inf.probs = (inf.probs.array().colwise() / inf.probs.rowwise().sum().array()).matrix();
  return inf;
}

TEST(ClassStats, MatchesTwoPassAccumulation) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> cls(0, 3);
  std::vector<std::uint16_t> labels(400);
  for (auto& l : labels) l = static_cast<std::uint16_t>(cls(rng));
  labels[0] = 4;  // class 4 has one pixel; class 5 none
  const auto inf = synthetic_inference(labels, 6, rng);
  ManifoldParams m;
  const auto stats = class_stats(inf, labels, 6, m, {false, 0});
  const auto pred = inf.predicted();

  for (int k = 0; k < 6; ++k) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == k) idx.push_back(i);
    }
    const auto& s = stats.classes[static_cast<std::size_t>(k)];
    EXPECT_EQ(s.defined, !idx.empty());
    EXPECT_EQ(s.pixels, idx.size());
    if (idx.empty()) continue;
    double r = 0, h = 0, acc = 0;
    for (std::size_t i : idx) {
      const double n = inf.embeddings.row(static_cast<Eigen::Index>(i)).norm();
      r += 2.0 * std::atanh(n);
      for (int c = 0; c < 6; ++c) {
        const double p = inf.probs(static_cast<Eigen::Index>(i), c);
        if (p > 0) h -= p * std::log(p);
      }
      acc += pred[i] == k;
    }
    const double n = static_cast<double>(idx.size());
    EXPECT_NEAR(s.pixel_fraction, n / 400.0, 1e-12);
    EXPECT_NEAR(s.mean_radius, r / n, 1e-10);
    EXPECT_NEAR(s.mean_entropy, h / n, 1e-10);
    EXPECT_NEAR(s.accuracy, acc / n, 1e-12);
  }
}

TEST(ClassStats, SingleClassAndPerfectPredictions) {
  std::mt19937_64 rng(1);
  const std::vector<std::uint16_t> labels(50, 2);
  auto inf = synthetic_inference(labels, 3, rng);
  inf.probs.setZero();
  inf.probs.col(2).setOnes();
  const auto stats = class_stats(inf, labels, 3, ManifoldParams{});
  EXPECT_EQ(stats.classes[2].pixel_fraction, 1.0);
  EXPECT_EQ(stats.classes[0].pixel_fraction, 0.0);
  EXPECT_EQ(stats.classes[2].accuracy, 1.0);
  EXPECT_EQ(stats.classes[2].mean_entropy, 0.0);
  EXPECT_GT(stats.classes[2].riemannian_variance, 0.0);
}

TEST(Frechet, TrivialCases) {
  ManifoldParams m;
  const auto single = frechet_mean({pt(0.3, -0.2)}, m);
  EXPECT_LT((single.coords - Vec{{0.3, -0.2}}).norm(), 1e-12);
  const auto sym = frechet_mean({pt(0.4, 0.3), pt(-0.4, -0.3)}, m);
  EXPECT_LT(sym.coords.norm(), 1e-8);
  EXPECT_EQ(riemannian_variance({pt(0.1, 0.1), pt(0.1, 0.1), pt(0.1, 0.1)}, m), 0.0);
}

TEST(Frechet, MatchesGridOracleOnLine) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-0.95, 0.95);
  std::uniform_int_distribution<int> count(1, 5);
  ManifoldParams m;
  for (int t = 0; t < 50; ++t) {
    std::vector<double> xs(static_cast<std::size_t>(count(rng)));
    std::vector<BallPoint> pts;
    for (auto& x : xs) {
      x = u(rng);
      pts.push_back(pt(x, 0.0));
    }
    const double want = grid_minimizer(xs);
    const auto mu = frechet_mean(pts, m);
    EXPECT_NEAR(mu.coords[0], want, 1e-3);
    EXPECT_NEAR(mu.coords[1], 0.0, 1e-12);
  }
}

TEST(Frechet, TwoPointVariance) {
  ManifoldParams m;
  const double v = riemannian_variance({pt(0, 0), pt(0.5, 0)}, m);
  const double d = 2.0 * std::atanh(0.5);
  EXPECT_NEAR(v, d * d / 4.0, 1e-9);
  EXPECT_NEAR(v, line_objective(grid_minimizer({0.0, 0.5}), {0.0, 0.5}), 1e-8);
}

TEST(Frechet, RotationInvariantVariance) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 0.3);
  ManifoldParams m;
  std::vector<BallPoint> pts, turned;
  const double a = 1.1;
  for (int i = 0; i < 6; ++i) {
    const double x = g(rng), y = g(rng);
    pts.push_back(pt(x, y));
    turned.push_back(pt(std::cos(a) * x - std::sin(a) * y, std::sin(a) * x + std::cos(a) * y));
  }
  EXPECT_NEAR(riemannian_variance(pts, m), riemannian_variance(turned, m), 1e-9);
}

TEST(Frechet, FailureCarriesLastIterate) {
  ManifoldParams m;
  try {
    frechet_mean({pt(0.9, 0), pt(-0.2, 0.7), pt(0.1, -0.8)}, m, 1e-300, 1);
    FAIL() << "expected FrechetError";
  } catch (const FrechetError& e) {
    EXPECT_EQ(e.last_iterate.dim(), 2);
    EXPECT_GT(e.residual, 0.0);
  }
}

PixelDataset labeled(const std::vector<std::uint16_t>& labels, int classes) {
  PixelDataset ds;
  ds.images = 1;
  ds.height = 1;
  ds.width = static_cast<int>(labels.size());
  ds.num_classes = classes;
  ds.feature_dim = 1;
  ds.labels = labels;
  ds.features.assign(labels.size(), 0.0f);
  return ds;
}

TEST(Selection, DistributionByHand) {
  const auto ds = labeled({0, 0, 1, 1, 1, 2}, 3);
  const AcquisitionLog log{{1, {0, 0, 0}, 0, 1.0}, {1, {0, 0, 2}, 1, 1.0}, {3, {0, 0, 5}, 2, 1.0}};
  const auto r = selection_distribution(log, ds);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_DOUBLE_EQ(r[0][0], 0.5);
  EXPECT_DOUBLE_EQ(r[0][1], 1.0 / 3.0);
  EXPECT_EQ(r[1], (std::vector<double>{0, 0, 0}));
  EXPECT_DOUBLE_EQ(r[2][2], 1.0);
}

TEST(Selection, ExhaustedClassSumsToOne) {
  const auto ds = labeled({1, 0, 1, 1}, 2);
  const AcquisitionLog log{{1, {0, 0, 0}, 1, 0}, {2, {0, 0, 2}, 1, 0}, {2, {0, 0, 3}, 1, 0}};
  const auto r = selection_distribution(log, ds);
  EXPECT_DOUBLE_EQ(r[0][1] + r[1][1], 1.0);
}

TEST(Selection, Variance) {
  const AcquisitionLog one{{1, {0, 0, 0}, 2, 0}, {1, {0, 0, 1}, 2, 0}};
  EXPECT_DOUBLE_EQ(selection_variance(one, 4), 0.1875);
  const AcquisitionLog balanced{{1, {0, 0, 0}, 0, 0}, {1, {0, 0, 1}, 1, 0}, {1, {0, 0, 2}, 2, 0}};
  EXPECT_EQ(selection_variance(balanced, 3), 0.0);
  const auto curve = selection_variance_curve({{0.05, balanced}, {0.01, one}}, 4);  // sorted by budget
  ASSERT_EQ(curve.size(), 2u);
  EXPECT_EQ(curve[0].first, 0.01);
  EXPECT_DOUBLE_EQ(curve[0].second, 0.1875);
}

TEST(Report, EmptyStatsGiveHeaderOnlyCsv) {
  testing::TempDir tmp;
  emit_report(AnalysisReport{}, tmp.path());
  const auto t = read_csv(tmp / "class_stats.csv");
  EXPECT_FALSE(t.header.empty());
  EXPECT_TRUE(t.rows.empty());
  EXPECT_TRUE(read_csv(tmp / "correlations.csv").rows.empty());
}

TEST(Report, CsvRoundTripAndWellFormedSvg) {
  testing::TempDir tmp;
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> cls(0, 4);
  std::vector<std::uint16_t> labels(300);
  for (auto& l : labels) l = static_cast<std::uint16_t>(cls(rng));
  const auto inf = synthetic_inference(labels, 5, rng);
  AnalysisReport rep;
  rep.stats = class_stats(inf, labels, 5, ManifoldParams{});
  rep.correlations = class_correlations(rep.stats);
  rep.selection = {{0.1, 0.2, 0.0, 0.3, 1.0 / 7.0}, {0.0, 0.1, 0.2, 0.0, 0.0}};
  rep.variance_curve = {{0.01, 0.02}, {0.05, 0.01}};
  emit_report(rep, tmp.path());

  const auto t = read_csv(tmp / "class_stats.csv");
  ASSERT_EQ(t.rows.size(), 5u);
  const int col = t.column("mean_radius");
  for (std::size_t k = 0; k < 5; ++k) {
    const double v = std::stod(t.rows[k][static_cast<std::size_t>(col)]);
    const double want = rep.stats.classes[k].mean_radius;
    EXPECT_LE(std::abs(v - want), 5e-7 * std::abs(want));
  }
  const auto c = read_csv(tmp / "correlations.csv");
  ASSERT_EQ(c.rows.size(), rep.correlations.size());
  const auto p = std::stod(c.rows[1][static_cast<std::size_t>(c.column("pearson"))]);
  EXPECT_LE(std::abs(p - rep.correlations[1].pearson), 5e-7 * std::abs(rep.correlations[1].pearson));

  int svgs = 0;
  for (const auto& entry : fs::directory_iterator(tmp.path())) {
    if (entry.path().extension() != ".svg") continue;
    ++svgs;
    boost::property_tree::ptree tree;
    EXPECT_NO_THROW(boost::property_tree::read_xml(entry.path().string(), tree)) << entry.path();
    EXPECT_EQ(tree.count("svg"), 1u) << entry.path();
  }
  EXPECT_EQ(svgs, 6);

  fs::remove(tmp / "selection_variance.svg");
  const auto rendered = render_report(tmp.path());
  EXPECT_EQ(rendered.size(), 6u);
  EXPECT_TRUE(fs::exists(tmp / "selection_variance.svg"));
}

}  // namespace
}  // namespace halo
