#pragma once

// Shared fixtures for the unit and acceptance suites: scratch directories,
// synthetic datasets, reduced configs, and a couple of reference
// implementations used as oracles.

#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "dfeia/image.hpp"
#include "dfeia/network.hpp"
#include "dfeia/random.hpp"

namespace testsupport {

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("dfeia_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Class-colored noise: per class a base RGB color far from every other
// class's, plus small uniform pixel noise. Trivially separable by design.
inline std::vector<std::string> write_synthetic_dataset(const std::filesystem::path& root,
                                                        int classes, int per_class, int size,
                                                        uint64_t seed) {
  static const uint8_t corners[8][3] = {{230, 30, 30},  {30, 230, 30},  {30, 30, 230},
                                        {230, 230, 30}, {230, 30, 230}, {30, 230, 230},
                                        {240, 240, 240}, {20, 20, 20}};
  dfeia::Rng rng(seed);
  std::vector<std::string> names;
  for (int c = 0; c < classes; ++c) {
    const std::string name = "class" + std::to_string(c);
    names.push_back(name);
    std::filesystem::create_directories(root / name);
    for (int i = 0; i < per_class; ++i) {
      dfeia::ImageU8 img;
      img.width = img.height = size;
      img.rgb.resize(static_cast<size_t>(size) * size * 3);
      for (size_t p = 0; p < img.rgb.size(); ++p) {
        const int base = corners[c % 8][p % 3];
        const int noise = static_cast<int>(rng.below(21)) - 10;
        img.rgb[p] = static_cast<uint8_t>(std::clamp(base + noise, 0, 255));
      }
      dfeia::write_ppm(root / name / ("img" + std::to_string(i) + ".ppm"), img);
    }
  }
  return names;
}

inline dfeia::NetworkConfig tiny_config(int64_t num_classes = 8) {
  dfeia::NetworkConfig cfg;
  cfg.stage_depths = {1, 1, 1, 1};
  cfg.stage_channels = {8, 16, 32, 32};
  cfg.input_size = 64;
  cfg.num_classes = num_classes;
  return cfg;
}

// The reduced end-to-end gradient-check configuration.
inline dfeia::NetworkConfig gradcheck_config() {
  dfeia::NetworkConfig cfg;
  cfg.stage_depths = {1, 1, 1, 1};
  cfg.stage_channels = {8, 16, 32, 64};
  cfg.input_size = 32;
  cfg.num_classes = 4;
  return cfg;
}

}  // namespace testsupport
