#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dfeia/errors.hpp"

namespace dfeia {

struct DatasetItem {
  std::filesystem::path path;
  int label = 0;
};

enum class Split { train, test };

// Image-folder dataset: root/<class_name>/*.{jpg,png,ppm}, class index =
// sorted directory-name order. The 4:1 split is deterministic given
// (root contents, seed): per class, filename-sorted items are shuffled by a
// seeded generator and the first floor(0.8*n) go to train.
struct Dataset {
  std::filesystem::path root;
  std::vector<std::string> class_names;
  std::vector<DatasetItem> train;
  std::vector<DatasetItem> test;

  const std::vector<DatasetItem>& split(Split s) const {
    return s == Split::train ? train : test;
  }
  int num_classes() const { return static_cast<int>(class_names.size()); }
};

Dataset load_image_folder(const std::filesystem::path& root, uint64_t seed);

}  // namespace dfeia
