#pragma once

// Procedural domain-shift benchmark: Voronoi label maps with long-tailed
// (Zipf) class frequencies and Gaussian per-class pixel features. The target
// split reuses the label process but translates every class mean.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "halo/network.hpp"

namespace halo {

struct SynthConfig {
  int num_classes = 8;
  int feature_dim = 8;
  int height = 64;
  int width = 64;
  int source_images = 50;
  int target_images = 50;
  double zipf_s = 1.2;
  double shift = 1.5;         // target mean translation per class
  double mean_spread = 1.0;   // std of class-mean coordinates
  double noise_scale = 1.0;   // within-class feature std
  int cells_per_image = 40;
  std::uint64_t seed = 7;

  /// Throws std::invalid_argument on a degenerate configuration.
  void validate() const;
};

enum class Split { source, target };

std::string_view to_string(Split s);

struct PixelDataset {
  Split split = Split::source;
  int images = 0;
  int height = 0;
  int width = 0;
  int feature_dim = 0;
  int num_classes = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> class_names;
  std::vector<float> features;         // [images x H x W x D], row-major
  std::vector<std::uint16_t> labels;   // [images x H x W]

  std::size_t pixel_count() const { return labels.size(); }
  std::size_t pixels_per_image() const { return static_cast<std::size_t>(height) * width; }
  bool empty() const { return labels.empty(); }

  /// Empirical class shares over all pixels.
  std::vector<double> class_shares() const;
  std::vector<std::size_t> class_counts() const;

  /// Features of the given flat pixel indices as a double batch.
  RowMatrix gather(std::span<const std::size_t> flat) const;
  /// Features of pixels [begin, end) in flat order.
  RowMatrix slice(std::size_t begin, std::size_t end) const;
};

/// Zipf(s) class probabilities, p_k proportional to k^-s for k = 1..C.
std::vector<double> zipf_probabilities(int num_classes, double s);

/// Deterministic in cfg (seed included).
std::pair<PixelDataset, PixelDataset> generate(const SynthConfig& cfg);

/// Directory: manifest.json, features.bin (float32 LE), labels.bin (uint16 LE).
void save_dataset(const PixelDataset& ds, const std::filesystem::path& dir);

/// Loads and validates a dataset directory. A class count larger than
/// max(label) + 1 is accepted and reported through `warnings`.
PixelDataset load_dataset(const std::filesystem::path& dir,
                          std::vector<std::string>* warnings = nullptr);

}  // namespace halo
