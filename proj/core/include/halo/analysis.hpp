#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "halo/acquisition.hpp"
#include "halo/adapt.hpp"
#include "halo/geometry.hpp"
#include "halo/synthdata.hpp"

namespace halo {

/// Pearson product-moment correlation. Throws std::invalid_argument
/// ("degenerate correlate") on length < 2 or zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

/// Pearson correlation of average ranks.
double spearman(std::span<const double> x, std::span<const double> y);

struct ClassStat {
  bool defined = false;  // false when the class has no ground-truth pixel
  std::size_t pixels = 0;
  double pixel_fraction = 0.0;
  double mean_radius = 0.0;
  double mean_entropy = 0.0;
  double accuracy = 0.0;
  double riemannian_variance = 0.0;
};

struct ClassStats {
  std::vector<ClassStat> classes;
};

struct ClassStatsOptions {
  bool with_variance = true;
  std::size_t variance_sample = 256;  // embeddings per class, evenly strided
};

ClassStats class_stats(const DatasetInference& inference, std::span<const std::uint16_t> labels,
                       int num_classes, const ManifoldParams& m, const ClassStatsOptions& opts = {});

ClassStats class_stats(const Model& model, const PixelDataset& dataset, const ManifoldParams& m,
                       const ClassStatsOptions& opts = {});

/// Karcher iteration did not reach the tolerance.
class FrechetError : public std::runtime_error {
 public:
  FrechetError(const std::string& what, BallPoint last, double residual)
      : std::runtime_error(what), last_iterate(std::move(last)), residual(residual) {}
  BallPoint last_iterate;
  double residual;
};

/// mu <- exp_mu(mean_i log_mu(x_i)) until the tangent mean has norm < tol.
/// A step that fails to lower the variance is halved (repeatedly).
BallPoint frechet_mean(const std::vector<BallPoint>& points, const ManifoldParams& m,
                       double tol = 1e-9, int max_iter = 200);

/// Mean squared distance to a given centre.
double mean_squared_distance(const std::vector<BallPoint>& points, const BallPoint& centre,
                             const ManifoldParams& m);

/// Mean squared distance to the Frechet mean.
double riemannian_variance(const std::vector<BallPoint>& points, const ManifoldParams& m);

/// ratio[r][c] = selected pixels of class c in round r+1 / target pixels of
/// class c. `rounds` = 0 takes the largest round in the log.
std::vector<std::vector<double>> selection_distribution(const AcquisitionLog& log,
                                                        const PixelDataset& dataset,
                                                        int rounds = 0);

/// Population variance of the per-class fractions of a selection.
double selection_variance(const AcquisitionLog& log, int num_classes);

/// Sorted by budget.
std::vector<std::pair<double, double>> selection_variance_curve(
    const std::vector<std::pair<double, AcquisitionLog>>& logs, int num_classes);

struct Correlation {
  std::string name;
  std::size_t n = 0;
  double pearson = 0.0;   // NaN when undefined
  double spearman = 0.0;
};

/// Over defined classes: radius vs pixel fraction, entropy vs accuracy,
/// radius vs accuracy, Riemannian variance vs accuracy.
std::vector<Correlation> class_correlations(const ClassStats& stats);

/// Pixel-level correlation of two equally shaped score maps.
Correlation map_correlation(const std::string& name, const ScoreMap& a, const ScoreMap& b);

struct AnalysisReport {
  ClassStats stats;
  std::vector<Correlation> correlations;
  std::vector<std::vector<double>> selection;              // [round][class]
  std::vector<std::pair<double, double>> variance_curve;   // (budget, variance)
};

/// Writes class_stats.csv, correlations.csv, selection_distribution.csv,
/// selection_variance.csv and renders the SVG plots next to them.
void emit_report(const AnalysisReport& report, const std::filesystem::path& dir);

/// Renders SVG plots from the CSV tables found in `dir`; returns the files written.
std::vector<std::filesystem::path> render_report(const std::filesystem::path& dir);

/// Parses a CSV written by emit_report: header plus rows of raw fields.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  int column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

}  // namespace halo
