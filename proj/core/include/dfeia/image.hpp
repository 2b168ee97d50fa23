#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dfeia/random.hpp"
#include "dfeia/tensor.hpp"

namespace dfeia {

// 8-bit interleaved RGB.
struct ImageU8 {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> rgb;  // width*height*3

  uint8_t at(int y, int x, int ch) const {
    return rgb[(static_cast<size_t>(y) * width + x) * 3 + ch];
  }
};

// Decodes PPM (P6/P3), PNG and JPEG by content sniffing; anything else is an
// ingestion error naming the file.
ImageU8 decode_image(const std::filesystem::path& path);

void write_ppm(const std::filesystem::path& path, const ImageU8& img);

ImageU8 resize_bilinear(const ImageU8& img, int out_w, int out_h);

// Channel statistics used for standardization.
inline constexpr double kNormMean[3] = {0.485, 0.456, 0.406};
inline constexpr double kNormStd[3] = {0.229, 0.224, 0.225};

// Resize to target*8/7 square, center-crop to target, optional horizontal
// flip, scale to [0,1] and standardize per channel. target=224 gives the
// 256 -> 224 pipeline.
Tensor<float> preprocess_core(const ImageU8& img, int64_t target, bool flip);

// Train mode draws the flip (p = 0.5) from the stream; eval never flips.
Tensor<float> preprocess(const ImageU8& img, int64_t target, bool train_mode, Rng& rng);

}  // namespace dfeia
