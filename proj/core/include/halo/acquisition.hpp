#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "halo/network.hpp"
#include "halo/uncertainty.hpp"

namespace halo {

enum class Strategy { halo, entropy, radius, random, gt_boundary };
enum class AcquisitionMode { pixel, region };

std::string_view to_string(Strategy s);
/// Accepts "halo", "entropy", "radius", "random", "gt-boundary" (or "gt_boundary").
Strategy strategy_from_string(std::string_view name);
std::string_view to_string(AcquisitionMode m);
AcquisitionMode mode_from_string(std::string_view name);

struct AcquisitionConfig {
  Strategy strategy = Strategy::halo;
  AcquisitionMode mode = AcquisitionMode::pixel;
  int region_size = 3;
  double total_budget = 0.05;  // fraction of target pixels
  int rounds = 5;

  /// budget in [0, 1] (0 disables acquisition), rounds >= 1, odd region size.
  void validate() const;
};

/// Raised when a round asks for more pixels than remain unlabeled.
class BudgetExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per target pixel: 0 = unlabeled, r >= 1 = labeled in round r.
struct LabelMask {
  int images = 0;
  int height = 0;
  int width = 0;
  std::vector<std::int16_t> round;

  static LabelMask empty(int images, int height, int width);
  std::size_t size() const { return round.size(); }
  std::size_t index(const PixelCoord& p) const {
    return (static_cast<std::size_t>(p.image) * height + p.row) * width + p.col;
  }
  PixelCoord coord(std::size_t flat) const;
  bool labeled(std::size_t flat) const { return round[flat] != 0; }
  std::size_t labeled_count() const;
  /// Marks pixels as labeled in `round_index`; throws if any is already labeled.
  void mark(const std::vector<PixelCoord>& pixels, int round_index);
};

/// A = R (.) H. Throws std::invalid_argument on shape mismatch.
ScoreMap acquisition_map(const ScoreMap& radius, const ScoreMap& entropy);

/// k x k mean pooling per image; out-of-range cells are left out of the mean.
ScoreMap region_scores(const ScoreMap& scores, int k);

/// Inputs a strategy may draw on. Strategies check for what they need.
struct StrategyInputs {
  const ScoreMap* radius = nullptr;
  const ScoreMap* entropy = nullptr;
  const std::vector<std::uint16_t>* ground_truth = nullptr;  // same layout as the maps
  int images = 0;
  int height = 0;
  int width = 0;
};

/// halo -> R (.) H; entropy -> H; radius -> R; random -> U(0,1);
/// gt_boundary -> 1 + U(0,1) on pixels with a 4-neighbour of another class,
/// 0 elsewhere (the uniform term only orders boundary pixels among themselves).
ScoreMap strategy_scores(Strategy strategy, const StrategyInputs& inputs, std::mt19937_64& rng);

/// The quota highest-scoring unlabeled pixels, ties by ascending
/// (image, row, col). Throws BudgetExhausted if quota exceeds the
/// unlabeled count.
std::vector<PixelCoord> select_pixels(const ScoreMap& scores, const LabelMask& mask,
                                      std::size_t quota);

/// floor(budget * N) split over rounds as evenly as possible, earlier
/// rounds taking the remainder. round_index is 1-based.
std::size_t total_quota(const AcquisitionConfig& cfg, std::size_t total_target_pixels);
std::size_t round_quota(const AcquisitionConfig& cfg, std::size_t total_target_pixels,
                        int round_index);

/// One selected pixel.
struct AcquisitionRecord {
  int round = 0;
  PixelCoord pixel;
  int true_class = 0;
  double score = 0.0;
};

using AcquisitionLog = std::vector<AcquisitionRecord>;

/// CSV with header round,image_id,row,col,true_class,score.
void write_acquisition_log(const AcquisitionLog& log, const std::filesystem::path& path);
AcquisitionLog read_acquisition_log(const std::filesystem::path& path);

}  // namespace halo
