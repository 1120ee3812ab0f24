#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "halo/synthdata.hpp"

namespace halo::testing {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("halo-test-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline SynthConfig small_synth(std::uint64_t seed = 7) {
  SynthConfig cfg;
  cfg.num_classes = 4;
  cfg.feature_dim = 4;
  cfg.height = 16;
  cfg.width = 16;
  cfg.source_images = 6;
  cfg.target_images = 6;
  cfg.cells_per_image = 8;
  cfg.seed = seed;
  return cfg;
}

}  // namespace halo::testing
