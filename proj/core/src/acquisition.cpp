#include "halo/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "halo/io.hpp"

namespace halo {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::halo: return "halo";
    case Strategy::entropy: return "entropy";
    case Strategy::radius: return "radius";
    case Strategy::random: return "random";
    case Strategy::gt_boundary: return "gt-boundary";
  }
  return "unknown";
}

Strategy strategy_from_string(std::string_view name) {
  if (name == "halo") return Strategy::halo;
  if (name == "entropy") return Strategy::entropy;
  if (name == "radius") return Strategy::radius;
  if (name == "random") return Strategy::random;
  if (name == "gt-boundary" || name == "gt_boundary") return Strategy::gt_boundary;
  throw std::invalid_argument("unknown strategy: " + std::string(name));
}

std::string_view to_string(AcquisitionMode m) {
  return m == AcquisitionMode::pixel ? "pixel" : "region";
}

AcquisitionMode mode_from_string(std::string_view name) {
  if (name == "pixel") return AcquisitionMode::pixel;
  if (name == "region") return AcquisitionMode::region;
  throw std::invalid_argument("unknown acquisition mode: " + std::string(name));
}

void AcquisitionConfig::validate() const {
  if (!(total_budget >= 0.0 && total_budget <= 1.0)) {
    throw std::invalid_argument("budget must lie in [0, 1]");
  }
  if (rounds < 1) throw std::invalid_argument("rounds must be >= 1");
  if (region_size < 1 || region_size % 2 == 0) {
    throw std::invalid_argument("region size must be a positive odd integer");
  }
}

LabelMask LabelMask::empty(int images, int height, int width) {
  LabelMask m;
  m.images = images;
  m.height = height;
  m.width = width;
  m.round.assign(static_cast<std::size_t>(images) * height * width, 0);
  return m;
}

PixelCoord LabelMask::coord(std::size_t flat) const {
  const auto per_image = static_cast<std::size_t>(height) * width;
  const auto image = static_cast<int>(flat / per_image);
  const auto rem = flat % per_image;
  return {image, static_cast<int>(rem / static_cast<std::size_t>(width)),
          static_cast<int>(rem % static_cast<std::size_t>(width))};
}

std::size_t LabelMask::labeled_count() const {
  return static_cast<std::size_t>(
      std::count_if(round.begin(), round.end(), [](std::int16_t r) { return r != 0; }));
}

void LabelMask::mark(const std::vector<PixelCoord>& pixels, int round_index) {
  for (const auto& p : pixels) {
    const auto i = index(p);
    if (round[i] != 0) throw std::logic_error("pixel selected twice");
    round[i] = static_cast<std::int16_t>(round_index);
  }
}

ScoreMap acquisition_map(const ScoreMap& radius, const ScoreMap& entropy) {
  if (!radius.same_shape(entropy) || radius.size() != entropy.size()) {
    throw std::invalid_argument("acquisition_map: radius and entropy maps differ in shape");
  }
  ScoreMap out = ScoreMap::zeros(radius.images, radius.height, radius.width, ScoreKind::acquisition);
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = radius.values[i] * entropy.values[i];
  return out;
}

ScoreMap region_scores(const ScoreMap& scores, int k) {
  if (k < 1 || k % 2 == 0) throw std::invalid_argument("region size must be a positive odd integer");
  if (k > std::min(scores.height, scores.width)) {
    throw std::invalid_argument("region size exceeds map extent");
  }
  ScoreMap out = scores;
  if (k == 1) return out;
  const int r = k / 2;
  const int h = scores.height;
  const int w = scores.width;
  for (int img = 0; img < scores.images; ++img) {
    for (int i = 0; i < h; ++i) {
      const int i0 = std::max(0, i - r), i1 = std::min(h, i + r + 1);
      for (int j = 0; j < w; ++j) {
        const int j0 = std::max(0, j - r), j1 = std::min(w, j + r + 1);
        double sum = 0.0;
        for (int a = i0; a < i1; ++a) {
          for (int b = j0; b < j1; ++b) sum += scores.at(img, a, b);
        }
        out.values[out.index(img, i, j)] = sum / static_cast<double>((i1 - i0) * (j1 - j0));
      }
    }
  }
  return out;
}

ScoreMap strategy_scores(Strategy strategy, const StrategyInputs& in, std::mt19937_64& rng) {
  auto need = [](const ScoreMap* m, const char* what) -> const ScoreMap& {
    if (m == nullptr) throw std::invalid_argument(std::string("strategy requires the ") + what + " map");
    return *m;
  };
  switch (strategy) {
    case Strategy::halo:
      return acquisition_map(need(in.radius, "radius"), need(in.entropy, "entropy"));
    case Strategy::entropy:
      return need(in.entropy, "entropy");
    case Strategy::radius:
      return need(in.radius, "radius");
    case Strategy::random: {
      ScoreMap out = ScoreMap::zeros(in.images, in.height, in.width, ScoreKind::other);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (auto& v : out.values) v = u(rng);
      return out;
    }
    case Strategy::gt_boundary: {
      if (in.ground_truth == nullptr) {
        throw std::invalid_argument("gt-boundary strategy requires ground-truth labels");
      }
      ScoreMap out = ScoreMap::zeros(in.images, in.height, in.width, ScoreKind::other);
      const auto& gt = *in.ground_truth;
      if (gt.size() != out.size()) throw std::invalid_argument("ground truth does not match map shape");
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (int img = 0; img < in.images; ++img) {
        for (int i = 0; i < in.height; ++i) {
          for (int j = 0; j < in.width; ++j) {
            const auto idx = out.index(img, i, j);
            const auto y = gt[idx];
            const bool boundary = (i > 0 && gt[out.index(img, i - 1, j)] != y) ||
                                  (i + 1 < in.height && gt[out.index(img, i + 1, j)] != y) ||
                                  (j > 0 && gt[out.index(img, i, j - 1)] != y) ||
                                  (j + 1 < in.width && gt[out.index(img, i, j + 1)] != y);
            if (boundary) out.values[idx] = 1.0 + u(rng);
          }
        }
      }
      return out;
    }
  }
  throw std::invalid_argument("unknown strategy");
}

std::vector<PixelCoord> select_pixels(const ScoreMap& scores, const LabelMask& mask,
                                      std::size_t quota) {
  if (scores.size() != mask.size()) {
    throw std::invalid_argument("select_pixels: score map and label mask differ in size");
  }
  std::vector<std::size_t> candidates;
  candidates.reserve(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask.labeled(i)) continue;
    if (!std::isfinite(scores.values[i])) {
      throw std::invalid_argument("select_pixels: non-finite score at pixel " + std::to_string(i));
    }
    candidates.push_back(i);
  }
  if (quota > candidates.size()) {
    throw BudgetExhausted("budget exhausted: quota " + std::to_string(quota) + " exceeds " +
                          std::to_string(candidates.size()) + " unlabeled pixels");
  }
  auto better = [&](std::size_t a, std::size_t b) {
    const double sa = scores.values[a], sb = scores.values[b];
    if (sa != sb) return sa > sb;
    return a < b;
  };
  if (quota < candidates.size()) {
    std::nth_element(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(quota),
                     candidates.end(), better);
    candidates.resize(quota);
  }
  std::sort(candidates.begin(), candidates.end(), better);
  std::vector<PixelCoord> out;
  out.reserve(quota);
  for (auto i : candidates) out.push_back(mask.coord(i));
  return out;
}

std::size_t total_quota(const AcquisitionConfig& cfg, std::size_t total_target_pixels) {
  // Relative slack so that e.g. 0.05 * 81920 lands on 4096 rather than 4095.
  const long double exact = static_cast<long double>(cfg.total_budget) *
                            static_cast<long double>(total_target_pixels);
  return static_cast<std::size_t>(std::floor(exact * (1.0L + 1e-12L)));
}

std::size_t round_quota(const AcquisitionConfig& cfg, std::size_t total_target_pixels,
                        int round_index) {
  if (round_index < 1 || round_index > cfg.rounds) {
    throw std::invalid_argument("round index out of range");
  }
  const std::size_t total = total_quota(cfg, total_target_pixels);
  const auto rounds = static_cast<std::size_t>(cfg.rounds);
  const std::size_t base = total / rounds;
  const std::size_t rem = total % rounds;
  return base + (static_cast<std::size_t>(round_index) <= rem ? 1 : 0);
}

void write_acquisition_log(const AcquisitionLog& log, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "round,image_id,row,col,true_class,score\n";
  for (const auto& r : log) {
    out << r.round << ',' << r.pixel.image << ',' << r.pixel.row << ',' << r.pixel.col << ','
        << r.true_class << ',' << io::format_double(r.score) << '\n';
  }
  io::write_text(path, out.str());
}

AcquisitionLog read_acquisition_log(const std::filesystem::path& path) {
  std::istringstream in(io::read_text(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("round,image_id,row,col,true_class,score", 0) != 0) {
    throw DataError("bad acquisition log header in " + path.string());
  }
  AcquisitionLog log;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> f;
    while (std::getline(ls, field, ',')) f.push_back(field);
    if (f.size() != 6) {
      throw DataError("malformed acquisition log line " + std::to_string(lineno) + " in " +
                      path.string());
    }
    try {
      log.push_back({std::stoi(f[0]), {std::stoi(f[1]), std::stoi(f[2]), std::stoi(f[3])},
                     std::stoi(f[4]), std::stod(f[5])});
    } catch (const std::exception&) {
      throw DataError("malformed acquisition log line " + std::to_string(lineno) + " in " +
                      path.string());
    }
  }
  return log;
}

}  // namespace halo
