#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "halo/geometry.hpp"
#include "halo/network.hpp"

namespace halo {

enum class ScoreKind { radius, entropy, acquisition, total, aleatoric, epistemic, other };

std::string_view to_string(ScoreKind kind);
ScoreKind score_kind_from_string(std::string_view name);

/// A stack of per-pixel score maps, image-major then row-major. A single
/// [H x W] map is the images == 1 case.
struct ScoreMap {
  int images = 1;
  int height = 0;
  int width = 0;
  ScoreKind kind = ScoreKind::other;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  std::size_t index(int image, int row, int col) const {
    return (static_cast<std::size_t>(image) * height + row) * width + col;
  }
  double at(int image, int row, int col) const { return values[index(image, row, col)]; }
  bool same_shape(const ScoreMap& o) const {
    return images == o.images && height == o.height && width == o.width;
  }
  static ScoreMap zeros(int images, int height, int width, ScoreKind kind);
};

/// Class probabilities of M ensemble members over the same pixels. Each
/// member matrix is [pixels x C].
struct EnsembleProbs {
  int images = 1;
  int height = 0;
  int width = 0;
  std::vector<RowMatrix> members;

  int num_members() const { return static_cast<int>(members.size()); }
};

/// Natural-log prediction entropy per pixel; 0 log 0 := 0.
ScoreMap entropy_map(const RowMatrix& probs, int images, int height, int width);

/// Hyperbolic radius of each embedding row.
ScoreMap radius_map(const RowMatrix& embeddings, int images, int height, int width,
                    const ManifoldParams& m);

/// Base-2 entropy of the ensemble-mean distribution. Throws
/// std::invalid_argument("ensemble too small") when M < 2.
ScoreMap total_uncertainty(const EnsembleProbs& e);
/// Mean over members of each member's base-2 entropy.
ScoreMap aleatoric_uncertainty(const EnsembleProbs& e);
/// total - aleatoric, clamped at zero; a deficit beyond 1e-9 throws
/// std::logic_error since it would contradict concavity of entropy.
ScoreMap epistemic_uncertainty(const EnsembleProbs& e);

/// Flat little-endian float32 values plus a JSON sidecar
/// (<stem>.json: images, height, width, kind).
void export_score_map(const ScoreMap& map, const std::filesystem::path& bin_path);
ScoreMap import_score_map(const std::filesystem::path& bin_path);

}  // namespace halo
