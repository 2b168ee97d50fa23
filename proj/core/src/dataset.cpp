#include "dfeia/dataset.hpp"

#include <algorithm>
#include <cctype>

#include "dfeia/random.hpp"

namespace dfeia {

namespace fs = std::filesystem;

static bool has_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext == ".jpg" || ext == ".png" || ext == ".ppm";
}

Dataset load_image_folder(const fs::path& root, uint64_t seed) {
  if (!fs::is_directory(root)) {
    throw IngestError("dataset root " + root.string() + " is not a directory");
  }

  Dataset ds;
  ds.root = root;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) ds.class_names.push_back(entry.path().filename().string());
  }
  std::sort(ds.class_names.begin(), ds.class_names.end());
  if (ds.class_names.size() < 2) {
    throw IngestError("dataset root " + root.string() + " needs at least 2 class directories, found " +
                      std::to_string(ds.class_names.size()));
  }

  for (size_t ci = 0; ci < ds.class_names.size(); ++ci) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(root / ds.class_names[ci])) {
      if (entry.is_regular_file() && has_image_extension(entry.path())) {
        files.push_back(entry.path());
      }
    }
    if (files.empty()) {
      throw IngestError("dataset class directory " + (root / ds.class_names[ci]).string() +
                        " contains no images");
    }
    std::sort(files.begin(), files.end());

    Rng rng(mix_seed(seed, ci));
    rng.shuffle(files);

    const size_t n_train = files.size() * 8 / 10;
    for (size_t i = 0; i < files.size(); ++i) {
      DatasetItem item{files[i], static_cast<int>(ci)};
      if (i < n_train) {
        ds.train.push_back(std::move(item));
      } else {
        ds.test.push_back(std::move(item));
      }
    }
  }
  return ds;
}

}  // namespace dfeia
