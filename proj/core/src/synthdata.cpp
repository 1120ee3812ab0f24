#include "halo/synthdata.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "halo/io.hpp"

namespace halo {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFormat = "halo-dataset";
constexpr int kVersion = 1;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(seed ^ splitmix64(stream)) + index);
}

struct ClassModel {
  std::vector<double> mean;
  std::vector<double> scale;  // diagonal std
};

// Label map of one image: nearest-seed Voronoi cells whose classes are drawn
// by systematic sampling of the Zipf CDF, then shuffled over the cells.
std::vector<std::uint16_t> voronoi_labels(const SynthConfig& cfg, const std::vector<double>& cdf,
                                          std::mt19937_64& rng) {
  const int n = cfg.cells_per_image;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<double> sx(n), sy(n);
  for (int k = 0; k < n; ++k) {
    sy[k] = u01(rng) * cfg.height;
    sx[k] = u01(rng) * cfg.width;
  }
  std::vector<std::uint16_t> cell_class(n);
  const double offset = u01(rng);
  for (int k = 0; k < n; ++k) {
    const double t = (offset + k) / n;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), t);
    const auto cls = std::min<std::ptrdiff_t>(it - cdf.begin(), cfg.num_classes - 1);
    cell_class[k] = static_cast<std::uint16_t>(cls);
  }
  std::shuffle(cell_class.begin(), cell_class.end(), rng);

  std::vector<std::uint16_t> labels(static_cast<std::size_t>(cfg.height) * cfg.width);
  for (int i = 0; i < cfg.height; ++i) {
    for (int j = 0; j < cfg.width; ++j) {
      const double py = i + 0.5, px = j + 0.5;
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int k = 0; k < n; ++k) {
        const double d = (py - sy[k]) * (py - sy[k]) + (px - sx[k]) * (px - sx[k]);
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      labels[static_cast<std::size_t>(i) * cfg.width + j] = cell_class[best];
    }
  }
  return labels;
}

PixelDataset render_split(const SynthConfig& cfg, Split split, int images,
                          const std::vector<ClassModel>& classes, const std::vector<double>& cdf) {
  PixelDataset ds;
  ds.split = split;
  ds.images = images;
  ds.height = cfg.height;
  ds.width = cfg.width;
  ds.feature_dim = cfg.feature_dim;
  ds.num_classes = cfg.num_classes;
  ds.seed = cfg.seed;
  for (int k = 0; k < cfg.num_classes; ++k) ds.class_names.push_back("class_" + std::to_string(k));
  const std::size_t per_image = ds.pixels_per_image();
  ds.labels.resize(per_image * images);
  ds.features.resize(per_image * images * cfg.feature_dim);

  const std::uint64_t stream = split == Split::source ? 1 : 2;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int img = 0; img < images; ++img) {
    std::mt19937_64 rng(derive_seed(cfg.seed, stream, static_cast<std::uint64_t>(img)));
    const auto labels = voronoi_labels(cfg, cdf, rng);
    std::copy(labels.begin(), labels.end(), ds.labels.begin() + static_cast<std::ptrdiff_t>(img * per_image));
    for (std::size_t p = 0; p < per_image; ++p) {
      const auto& cm = classes[labels[p]];
      float* f = ds.features.data() + (img * per_image + p) * cfg.feature_dim;
      for (int d = 0; d < cfg.feature_dim; ++d) {
        f[d] = static_cast<float>(cm.mean[d] + cm.scale[d] * normal(rng));
      }
    }
  }
  return ds;
}

}  // namespace

void SynthConfig::validate() const {
  if (num_classes < 2) throw std::invalid_argument("synth config: need at least 2 classes");
  if (num_classes > 65535) throw std::invalid_argument("synth config: too many classes");
  if (feature_dim < 1) throw std::invalid_argument("synth config: feature dim must be >= 1");
  if (height < 1 || width < 1) throw std::invalid_argument("synth config: empty image size");
  if (static_cast<long>(height) * width < num_classes) {
    throw std::invalid_argument("synth config: H*W smaller than the class count");
  }
  if (source_images < 0 || target_images < 0) {
    throw std::invalid_argument("synth config: negative image count");
  }
  if (!(zipf_s >= 0.0)) throw std::invalid_argument("synth config: zipf exponent must be >= 0");
  if (!(shift >= 0.0)) throw std::invalid_argument("synth config: shift must be >= 0");
  if (!(noise_scale >= 0.0) || !(mean_spread >= 0.0)) {
    throw std::invalid_argument("synth config: scales must be >= 0");
  }
  if (cells_per_image < 1) throw std::invalid_argument("synth config: need at least one cell");
}

std::string_view to_string(Split s) { return s == Split::source ? "source" : "target"; }

std::vector<double> PixelDataset::class_shares() const {
  const auto counts = class_counts();
  std::vector<double> shares(counts.size(), 0.0);
  if (labels.empty()) return shares;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    shares[k] = static_cast<double>(counts[k]) / static_cast<double>(labels.size());
  }
  return shares;
}

std::vector<std::size_t> PixelDataset::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (auto y : labels) {
    if (y < counts.size()) ++counts[y];
  }
  return counts;
}

RowMatrix PixelDataset::gather(std::span<const std::size_t> flat) const {
  RowMatrix out(static_cast<Eigen::Index>(flat.size()), feature_dim);
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const float* f = features.data() + flat[i] * feature_dim;
    for (int d = 0; d < feature_dim; ++d) out(static_cast<Eigen::Index>(i), d) = f[d];
  }
  return out;
}

RowMatrix PixelDataset::slice(std::size_t begin, std::size_t end) const {
  RowMatrix out(static_cast<Eigen::Index>(end - begin), feature_dim);
  for (std::size_t i = begin; i < end; ++i) {
    const float* f = features.data() + i * feature_dim;
    for (int d = 0; d < feature_dim; ++d) out(static_cast<Eigen::Index>(i - begin), d) = f[d];
  }
  return out;
}

std::vector<double> zipf_probabilities(int num_classes, double s) {
  std::vector<double> p(static_cast<std::size_t>(num_classes));
  for (int k = 0; k < num_classes; ++k) p[k] = std::pow(static_cast<double>(k + 1), -s);
  const double z = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& v : p) v /= z;
  return p;
}

std::pair<PixelDataset, PixelDataset> generate(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(derive_seed(cfg.seed, 0, 0));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> scale_jitter(0.75, 1.25);

  std::vector<ClassModel> source(cfg.num_classes), target(cfg.num_classes);
  for (int k = 0; k < cfg.num_classes; ++k) {
    auto& cm = source[k];
    cm.mean.resize(cfg.feature_dim);
    cm.scale.resize(cfg.feature_dim);
    for (int d = 0; d < cfg.feature_dim; ++d) {
      cm.mean[d] = cfg.mean_spread * normal(rng);
      cm.scale[d] = cfg.noise_scale * scale_jitter(rng);
    }
  }
  for (int k = 0; k < cfg.num_classes; ++k) {
    std::vector<double> dir(cfg.feature_dim);
    double norm = 0.0;
    do {
      for (auto& v : dir) v = normal(rng);
      norm = std::sqrt(std::inner_product(dir.begin(), dir.end(), dir.begin(), 0.0));
    } while (norm == 0.0);
    target[k] = source[k];
    for (int d = 0; d < cfg.feature_dim; ++d) target[k].mean[d] += cfg.shift * dir[d] / norm;
  }

  const auto probs = zipf_probabilities(cfg.num_classes, cfg.zipf_s);
  std::vector<double> cdf(probs.size());
  std::partial_sum(probs.begin(), probs.end(), cdf.begin());
  cdf.back() = 1.0;

  return {render_split(cfg, Split::source, cfg.source_images, source, cdf),
          render_split(cfg, Split::target, cfg.target_images, target, cdf)};
}

void save_dataset(const PixelDataset& ds, const fs::path& dir) {
  json manifest;
  manifest["format"] = kFormat;
  manifest["version"] = kVersion;
  manifest["split"] = std::string(to_string(ds.split));
  manifest["images"] = ds.images;
  manifest["height"] = ds.height;
  manifest["width"] = ds.width;
  manifest["feature_dim"] = ds.feature_dim;
  manifest["num_classes"] = ds.num_classes;
  manifest["class_names"] = ds.class_names;
  manifest["seed"] = ds.seed;
  manifest["class_shares"] = ds.class_shares();
  manifest["features"] = {{"file", "features.bin"}, {"dtype", "float32-le"},
                          {"shape", {ds.images, ds.height, ds.width, ds.feature_dim}}};
  manifest["labels"] = {{"file", "labels.bin"}, {"dtype", "uint16-le"},
                        {"shape", {ds.images, ds.height, ds.width}}};
  io::write_directory_atomically(dir, [&](const fs::path& tmp) {
    io::write_text(tmp / "manifest.json", manifest.dump(2) + "\n");
    io::write_f32_le(tmp / "features.bin", ds.features);
    io::write_u16_le(tmp / "labels.bin", ds.labels);
  });
}

PixelDataset load_dataset(const fs::path& dir, std::vector<std::string>* warnings) {
  const fs::path manifest_path = dir / "manifest.json";
  json manifest;
  try {
    manifest = json::parse(io::read_text(manifest_path));
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  PixelDataset ds;
  try {
    if (manifest.at("format").get<std::string>() != kFormat) {
      throw DataError("not a dataset manifest: " + manifest_path.string());
    }
    ds.split = manifest.at("split").get<std::string>() == "target" ? Split::target : Split::source;
    ds.images = manifest.at("images").get<int>();
    ds.height = manifest.at("height").get<int>();
    ds.width = manifest.at("width").get<int>();
    ds.feature_dim = manifest.at("feature_dim").get<int>();
    ds.num_classes = manifest.at("num_classes").get<int>();
    ds.seed = manifest.value("seed", std::uint64_t{0});
    ds.class_names = manifest.value("class_names", std::vector<std::string>{});
    const auto fshape = manifest.at("features").at("shape").get<std::vector<int>>();
    const auto lshape = manifest.at("labels").at("shape").get<std::vector<int>>();
    if (fshape != std::vector<int>{ds.images, ds.height, ds.width, ds.feature_dim} ||
        lshape != std::vector<int>{ds.images, ds.height, ds.width}) {
      throw DataError("shape mismatch in " + manifest_path.string());
    }
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  if (ds.images < 0 || ds.height < 0 || ds.width < 0 || ds.feature_dim < 1 || ds.num_classes < 1) {
    throw DataError("invalid dimensions in " + manifest_path.string());
  }
  const std::size_t pixels = static_cast<std::size_t>(ds.images) * ds.height * ds.width;
  ds.features = io::read_f32_le(dir / "features.bin", pixels * ds.feature_dim);
  ds.labels = io::read_u16_le(dir / "labels.bin", pixels);

  int max_label = -1;
  for (auto y : ds.labels) max_label = std::max<int>(max_label, y);
  if (max_label >= ds.num_classes) {
    throw DataError("label " + std::to_string(max_label) + " exceeds class count " +
                    std::to_string(ds.num_classes) + " in " + (dir / "labels.bin").string());
  }
  if (max_label + 1 < ds.num_classes && warnings != nullptr) {
    warnings->push_back(manifest_path.string() + ": manifest declares " +
                        std::to_string(ds.num_classes) + " classes but labels only reach " +
                        std::to_string(max_label));
  }
  for (float f : ds.features) {
    if (!std::isfinite(f)) throw DataError("non-finite feature in " + (dir / "features.bin").string());
  }
  return ds;
}

}  // namespace halo
