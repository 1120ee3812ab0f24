#include "halo/uncertainty.hpp"

#include <json.hpp>

#include <cmath>
#include <stdexcept>

#include "halo/io.hpp"

namespace halo {

namespace {

constexpr std::string_view kKindNames[] = {"radius",    "entropy",   "acquisition", "total",
                                           "aleatoric", "epistemic", "other"};

template <typename Log>
double row_entropy(const double* p, Eigen::Index n, Log log_fn) {
  double h = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (p[j] > 0.0) h -= p[j] * log_fn(p[j]);
  }
  return h;
}

void require_ensemble(const EnsembleProbs& e) {
  if (e.num_members() < 2) throw std::invalid_argument("ensemble too small");
  const auto rows = e.members.front().rows();
  const auto cols = e.members.front().cols();
  for (const auto& m : e.members) {
    if (m.rows() != rows || m.cols() != cols) {
      throw std::invalid_argument("ensemble members disagree in shape");
    }
  }
  if (rows != static_cast<Eigen::Index>(e.images) * e.height * e.width) {
    throw std::invalid_argument("ensemble pixel count does not match map shape");
  }
}

double log2_fn(double x) { return std::log2(x); }

// Averages written as first + mean(delta from first) so that identical
// members reproduce the first member bit for bit.
double anchored_mean(const std::vector<double>& xs) {
  double acc = 0.0;
  for (std::size_t i = 1; i < xs.size(); ++i) acc += xs[i] - xs[0];
  return xs[0] + acc / static_cast<double>(xs.size());
}

}  // namespace

std::string_view to_string(ScoreKind kind) { return kKindNames[static_cast<int>(kind)]; }

ScoreKind score_kind_from_string(std::string_view name) {
  for (int i = 0; i < 7; ++i) {
    if (kKindNames[i] == name) return static_cast<ScoreKind>(i);
  }
  throw std::invalid_argument("unknown score kind: " + std::string(name));
}

ScoreMap ScoreMap::zeros(int images, int height, int width, ScoreKind kind) {
  ScoreMap m;
  m.images = images;
  m.height = height;
  m.width = width;
  m.kind = kind;
  m.values.assign(static_cast<std::size_t>(images) * height * width, 0.0);
  return m;
}

ScoreMap entropy_map(const RowMatrix& probs, int images, int height, int width) {
  ScoreMap out = ScoreMap::zeros(images, height, width, ScoreKind::entropy);
  if (probs.rows() != static_cast<Eigen::Index>(out.size())) {
    throw std::invalid_argument("entropy_map: probability rows do not match map shape");
  }
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    out.values[static_cast<std::size_t>(i)] =
        row_entropy(probs.row(i).data(), probs.cols(), [](double x) { return std::log(x); });
  }
  return out;
}

ScoreMap radius_map(const RowMatrix& embeddings, int images, int height, int width,
                    const ManifoldParams& m) {
  ScoreMap out = ScoreMap::zeros(images, height, width, ScoreKind::radius);
  if (embeddings.rows() != static_cast<Eigen::Index>(out.size())) {
    throw std::invalid_argument("radius_map: embedding rows do not match map shape");
  }
  for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
    out.values[static_cast<std::size_t>(i)] = detail::radius_from_norm(embeddings.row(i).norm(), m);
  }
  return out;
}

ScoreMap total_uncertainty(const EnsembleProbs& e) {
  require_ensemble(e);
  ScoreMap out = ScoreMap::zeros(e.images, e.height, e.width, ScoreKind::total);
  const auto classes = e.members.front().cols();
  std::vector<double> mean(static_cast<std::size_t>(classes));
  std::vector<double> column(e.members.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < classes; ++j) {
      for (std::size_t k = 0; k < e.members.size(); ++k) column[k] = e.members[k](r, j);
      mean[static_cast<std::size_t>(j)] = anchored_mean(column);
    }
    out.values[i] = row_entropy(mean.data(), classes, log2_fn);
  }
  return out;
}

ScoreMap aleatoric_uncertainty(const EnsembleProbs& e) {
  require_ensemble(e);
  ScoreMap out = ScoreMap::zeros(e.images, e.height, e.width, ScoreKind::aleatoric);
  const auto classes = e.members.front().cols();
  std::vector<double> ent(e.members.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (std::size_t k = 0; k < e.members.size(); ++k) {
      ent[k] = row_entropy(e.members[k].row(r).data(), classes, log2_fn);
    }
    out.values[i] = anchored_mean(ent);
  }
  return out;
}

ScoreMap epistemic_uncertainty(const EnsembleProbs& e) {
  const ScoreMap total = total_uncertainty(e);
  const ScoreMap alea = aleatoric_uncertainty(e);
  ScoreMap out = ScoreMap::zeros(e.images, e.height, e.width, ScoreKind::epistemic);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = total.values[i] - alea.values[i];
    if (d < -1e-9) {
      throw std::logic_error("epistemic uncertainty below -1e-9 at pixel " + std::to_string(i));
    }
    out.values[i] = d < 0.0 ? 0.0 : d;
  }
  return out;
}

void export_score_map(const ScoreMap& map, const std::filesystem::path& bin_path) {
  std::vector<float> values(map.values.begin(), map.values.end());
  io::write_f32_le(bin_path, values);
  nlohmann::json side = {{"images", map.images},
                         {"height", map.height},
                         {"width", map.width},
                         {"kind", std::string(to_string(map.kind))},
                         {"dtype", "float32-le"}};
  auto sidecar = bin_path;
  sidecar.replace_extension(".json");
  io::write_text(sidecar, side.dump(2) + "\n");
}

ScoreMap import_score_map(const std::filesystem::path& bin_path) {
  auto sidecar = bin_path;
  sidecar.replace_extension(".json");
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(io::read_text(sidecar));
  } catch (const nlohmann::json::exception& ex) {
    throw DataError("malformed sidecar " + sidecar.string() + ": " + ex.what());
  }
  ScoreMap m = ScoreMap::zeros(side.at("images").get<int>(), side.at("height").get<int>(),
                               side.at("width").get<int>(),
                               score_kind_from_string(side.at("kind").get<std::string>()));
  const auto values = io::read_f32_le(bin_path, m.size());
  m.values.assign(values.begin(), values.end());
  return m;
}

}  // namespace halo
