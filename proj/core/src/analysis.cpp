#include "halo/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace halo {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

Correlation correlate(std::string name, const std::vector<double>& x, const std::vector<double>& y) {
  Correlation c{std::move(name), x.size(), kNaN, kNaN};
  try {
    c.pearson = pearson(x, y);
    c.spearman = spearman(x, y);
  } catch (const std::invalid_argument&) {
  }
  return c;
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("degenerate correlate: fewer than 2 samples");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw std::invalid_argument("degenerate correlate: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

ClassStats class_stats(const DatasetInference& inference, std::span<const std::uint16_t> labels,
                       int num_classes, const ManifoldParams& m, const ClassStatsOptions& opts) {
  const auto n = labels.size();
  if (static_cast<std::size_t>(inference.probs.rows()) != n ||
      static_cast<std::size_t>(inference.embeddings.rows()) != n) {
    throw std::invalid_argument("class_stats: inference does not match the label count");
  }
  const auto c = static_cast<std::size_t>(num_classes);
  std::vector<double> radius_sum(c, 0.0), entropy_sum(c, 0.0);
  std::vector<std::size_t> count(c, 0), correct(c, 0);
  std::vector<std::vector<std::size_t>> members(c);
  const RowMatrix& p = inference.probs;
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = labels[i];
    if (y >= c) throw std::invalid_argument("class_stats: label out of range");
    const auto r = static_cast<Eigen::Index>(i);
    radius_sum[y] += detail::radius_from_norm(inference.embeddings.row(r).norm(), m);
    double h = 0.0;
    Eigen::Index arg = 0;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      if (p(r, j) > 0.0) h -= p(r, j) * std::log(p(r, j));
      if (p(r, j) > p(r, arg)) arg = j;
    }
    entropy_sum[y] += h;
    ++count[y];
    if (arg == y) ++correct[y];
    members[y].push_back(i);
  }
  ClassStats out;
  out.classes.resize(c);
  for (std::size_t k = 0; k < c; ++k) {
    auto& s = out.classes[k];
    s.pixels = count[k];
    s.pixel_fraction = n > 0 ? static_cast<double>(count[k]) / static_cast<double>(n) : 0.0;
    if (count[k] == 0) continue;
    s.defined = true;
    const double cnt = static_cast<double>(count[k]);
    s.mean_radius = radius_sum[k] / cnt;
    s.mean_entropy = entropy_sum[k] / cnt;
    s.accuracy = static_cast<double>(correct[k]) / cnt;
    if (!opts.with_variance) continue;
    const auto& idx = members[k];
    const std::size_t take = std::min(idx.size(), std::max<std::size_t>(1, opts.variance_sample));
    std::vector<BallPoint> pts;
    pts.reserve(take);
    for (std::size_t t = 0; t < take; ++t) {
      const auto row = static_cast<Eigen::Index>(idx[t * idx.size() / take]);
      pts.emplace_back(Vec(inference.embeddings.row(row).transpose()));
    }
    try {
      s.riemannian_variance = riemannian_variance(pts, m);
    } catch (const FrechetError& e) {
      s.riemannian_variance = mean_squared_distance(pts, e.last_iterate, m);
    }
  }
  return out;
}

ClassStats class_stats(const Model& model, const PixelDataset& dataset, const ManifoldParams& m,
                       const ClassStatsOptions& opts) {
  return class_stats(infer(model, dataset), dataset.labels, model.config.dims.num_classes, m, opts);
}

double mean_squared_distance(const std::vector<BallPoint>& points, const BallPoint& centre,
                             const ManifoldParams& m) {
  double acc = 0.0;
  for (const auto& x : points) {
    const double d = poincare_distance(centre, x, m);
    acc += d * d;
  }
  return acc / static_cast<double>(points.size());
}

BallPoint frechet_mean(const std::vector<BallPoint>& points, const ManifoldParams& m, double tol,
                       int max_iter) {
  if (points.empty()) throw std::invalid_argument("frechet_mean: empty point set");
  const auto dim = points.front().dim();
  Vec start = Vec::Zero(dim);
  for (const auto& x : points) {
    if (x.dim() != dim) throw std::invalid_argument("frechet_mean: dimension mismatch");
    start += x.coords;
  }
  if (std::all_of(points.begin(), points.end(),
                  [&](const BallPoint& x) { return x.coords == points.front().coords; })) {
    return points.front();
  }
  BallPoint mu = project_to_ball(start / static_cast<double>(points.size()), m);
  double var = mean_squared_distance(points, mu, m);
  double residual = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iter; ++it) {
    Vec g = Vec::Zero(dim);
    for (const auto& x : points) g += log_map(mu, x, m).coords;
    g /= static_cast<double>(points.size());
    residual = g.norm();
    if (residual < tol) return mu;
    double step = 1.0;
    BallPoint cand = exp_map(mu, g, m);
    double cand_var = mean_squared_distance(points, cand, m);
    // Ties within rounding count as progress; otherwise near the optimum the
    // variance is flat to machine precision and every step would be damped.
    while (cand_var > var * (1.0 + 1e-12) && step > 1e-8) {
      step *= 0.5;
      cand = exp_map(mu, step * g, m);
      cand_var = mean_squared_distance(points, cand, m);
    }
    mu = std::move(cand);
    var = cand_var;
  }
  Vec g = Vec::Zero(dim);
  for (const auto& x : points) g += log_map(mu, x, m).coords;
  residual = (g / static_cast<double>(points.size())).norm();
  if (residual < tol) return mu;
  throw FrechetError("frechet_mean: no convergence after " + std::to_string(max_iter) +
                         " iterations (residual " + std::to_string(residual) + ")",
                     mu, residual);
}

double riemannian_variance(const std::vector<BallPoint>& points, const ManifoldParams& m) {
  return mean_squared_distance(points, frechet_mean(points, m), m);
}

std::vector<std::vector<double>> selection_distribution(const AcquisitionLog& log,
                                                        const PixelDataset& dataset, int rounds) {
  int r_max = rounds;
  for (const auto& rec : log) r_max = std::max(r_max, rec.round);
  const auto c = static_cast<std::size_t>(dataset.num_classes);
  const auto totals = dataset.class_counts();
  std::vector<std::vector<double>> out(static_cast<std::size_t>(r_max), std::vector<double>(c, 0.0));
  for (const auto& rec : log) {
    if (rec.round < 1) throw std::invalid_argument("selection_distribution: round index < 1");
    if (rec.true_class < 0 || static_cast<std::size_t>(rec.true_class) >= c) {
      throw std::invalid_argument("selection_distribution: class out of range");
    }
    out[static_cast<std::size_t>(rec.round - 1)][static_cast<std::size_t>(rec.true_class)] += 1.0;
  }
  for (auto& row : out) {
    for (std::size_t k = 0; k < c; ++k) {
      row[k] = totals[k] > 0 ? row[k] / static_cast<double>(totals[k]) : 0.0;
    }
  }
  return out;
}

double selection_variance(const AcquisitionLog& log, int num_classes) {
  if (num_classes < 1) throw std::invalid_argument("selection_variance: need at least one class");
  if (log.empty()) return 0.0;
  std::vector<double> frac(static_cast<std::size_t>(num_classes), 0.0);
  for (const auto& rec : log) {
    if (rec.true_class < 0 || rec.true_class >= num_classes) {
      throw std::invalid_argument("selection_variance: class out of range");
    }
    frac[static_cast<std::size_t>(rec.true_class)] += 1.0;
  }
  for (auto& f : frac) f /= static_cast<double>(log.size());
  const double mean = 1.0 / num_classes;
  double var = 0.0;
  for (double f : frac) var += (f - mean) * (f - mean);
  return var / num_classes;
}

std::vector<std::pair<double, double>> selection_variance_curve(
    const std::vector<std::pair<double, AcquisitionLog>>& logs, int num_classes) {
  std::vector<std::pair<double, double>> out;
  out.reserve(logs.size());
  for (const auto& [budget, log] : logs) out.emplace_back(budget, selection_variance(log, num_classes));
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

std::vector<Correlation> class_correlations(const ClassStats& stats) {
  std::vector<double> radius, fraction, entropy, accuracy, variance;
  for (const auto& s : stats.classes) {
    if (!s.defined) continue;
    radius.push_back(s.mean_radius);
    fraction.push_back(s.pixel_fraction);
    entropy.push_back(s.mean_entropy);
    accuracy.push_back(s.accuracy);
    variance.push_back(s.riemannian_variance);
  }
  return {correlate("radius_vs_pixel_fraction", radius, fraction),
          correlate("entropy_vs_accuracy", entropy, accuracy),
          correlate("radius_vs_accuracy", radius, accuracy),
          correlate("variance_vs_accuracy", variance, accuracy)};
}

Correlation map_correlation(const std::string& name, const ScoreMap& a, const ScoreMap& b) {
  if (!a.same_shape(b) || a.size() != b.size()) {
    throw std::invalid_argument("map_correlation: maps differ in shape");
  }
  return correlate(name, a.values, b.values);
}

}  // namespace halo
