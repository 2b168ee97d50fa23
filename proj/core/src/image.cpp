#include "dfeia/image.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <jpeglib.h>
#include <png.h>

#include "dfeia/errors.hpp"

namespace dfeia {

namespace {

ImageU8 decode_ppm(const std::filesystem::path& path, std::ifstream& is) {
  std::string magic;
  is >> magic;
  if (magic != "P6" && magic != "P3") {
    throw IngestError(path.string() + ": unsupported PPM variant " + magic);
  }
  auto next_token = [&]() -> std::string {
    std::string tok;
    while (is >> tok) {
      if (tok[0] == '#') {
        std::string rest;
        std::getline(is, rest);
        continue;
      }
      return tok;
    }
    throw IngestError(path.string() + ": truncated PPM header");
  };
  const int w = std::stoi(next_token());
  const int h = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    throw IngestError(path.string() + ": unsupported PPM geometry");
  }
  ImageU8 img;
  img.width = w;
  img.height = h;
  img.rgb.resize(static_cast<size_t>(w) * h * 3);
  if (magic == "P6") {
    is.get();  // single whitespace after maxval
    is.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    if (static_cast<size_t>(is.gcount()) != img.rgb.size()) {
      throw IngestError(path.string() + ": truncated PPM pixel data");
    }
  } else {
    for (auto& b : img.rgb) {
      int v;
      if (!(is >> v)) throw IngestError(path.string() + ": truncated PPM pixel data");
      b = static_cast<uint8_t>(std::clamp(v, 0, 255));
    }
  }
  return img;
}

ImageU8 decode_png(const std::filesystem::path& path) {
  FILE* fp = std::fopen(path.string().c_str(), "rb");
  if (!fp) throw IngestError(path.string() + ": cannot open");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (fp) std::fclose(fp);
    png_destroy_read_struct(&png, &info, nullptr);
    throw IngestError(path.string() + ": libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IngestError(path.string() + ": PNG decode failed");
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  ImageU8 img;
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.rgb.resize(static_cast<size_t>(img.width) * img.height * 3);
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y) {
    rows[y] = img.rgb.data() + static_cast<size_t>(y) * img.width * 3;
  }
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return img;
}

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  std::longjmp(mgr->jump, 1);
}

ImageU8 decode_jpeg(const std::filesystem::path& path) {
  FILE* fp = std::fopen(path.string().c_str(), "rb");
  if (!fp) throw IngestError(path.string() + ": cannot open");

  jpeg_decompress_struct cinfo;
  JpegErrorMgr err;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    std::fclose(fp);
    throw IngestError(path.string() + ": JPEG decode failed");
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, fp);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);

  ImageU8 img;
  img.width = static_cast<int>(cinfo.output_width);
  img.height = static_cast<int>(cinfo.output_height);
  img.rgb.resize(static_cast<size_t>(img.width) * img.height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = img.rgb.data() + static_cast<size_t>(cinfo.output_scanline) * img.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  std::fclose(fp);
  return img;
}

}  // namespace

ImageU8 decode_image(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IngestError(path.string() + ": cannot open");
  unsigned char sig[8] = {0};
  is.read(reinterpret_cast<char*>(sig), 8);
  if (is.gcount() < 2) throw IngestError(path.string() + ": file too short to decode");
  is.seekg(0);

  if (sig[0] == 'P' && (sig[1] == '6' || sig[1] == '3')) return decode_ppm(path, is);
  if (sig[0] == 0x89 && sig[1] == 'P') {
    is.close();
    return decode_png(path);
  }
  if (sig[0] == 0xFF && sig[1] == 0xD8) {
    is.close();
    return decode_jpeg(path);
  }
  throw IngestError(path.string() + ": unrecognized image format");
}

void write_ppm(const std::filesystem::path& path, const ImageU8& img) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IngestError(path.string() + ": cannot open for writing");
  os << "P6\n" << img.width << " " << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.rgb.data()),
           static_cast<std::streamsize>(img.rgb.size()));
  if (!os) throw IngestError(path.string() + ": write failed");
}

// Half-pixel-center sampling with edge clamping.
ImageU8 resize_bilinear(const ImageU8& img, int out_w, int out_h) {
  if (img.width < 1 || img.height < 1) throw IngestError("resize: empty image");
  ImageU8 out;
  out.width = out_w;
  out.height = out_h;
  out.rgb.resize(static_cast<size_t>(out_w) * out_h * 3);

  const double sx = static_cast<double>(img.width) / out_w;
  const double sy = static_cast<double>(img.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      for (int ch = 0; ch < 3; ++ch) {
        const double top = (1 - wx) * img.at(y0, x0, ch) + wx * img.at(y0, x1, ch);
        const double bot = (1 - wx) * img.at(y1, x0, ch) + wx * img.at(y1, x1, ch);
        const double v = (1 - wy) * top + wy * bot;
        out.rgb[(static_cast<size_t>(y) * out_w + x) * 3 + ch] =
            static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
    }
  }
  return out;
}

Tensor<float> preprocess_core(const ImageU8& img, int64_t target, bool flip) {
  if (img.width < 1 || img.height < 1) throw IngestError("preprocess: empty image");
  const int resized = static_cast<int>(std::lround(static_cast<double>(target) * 8.0 / 7.0));
  ImageU8 r = resize_bilinear(img, resized, resized);
  const int off = (resized - static_cast<int>(target)) / 2;

  Tensor<float> out({3, target, target});
  float* po = out.mut();
  const int64_t plane = target * target;
  for (int64_t y = 0; y < target; ++y) {
    for (int64_t x = 0; x < target; ++x) {
      const int sx = off + static_cast<int>(flip ? target - 1 - x : x);
      const int sy = off + static_cast<int>(y);
      for (int ch = 0; ch < 3; ++ch) {
        const double v = r.at(sy, sx, ch) / 255.0;
        po[ch * plane + y * target + x] =
            static_cast<float>((v - kNormMean[ch]) / kNormStd[ch]);
      }
    }
  }
  return out;
}

Tensor<float> preprocess(const ImageU8& img, int64_t target, bool train_mode, Rng& rng) {
  const bool flip = train_mode && rng.uniform01() < 0.5;
  return preprocess_core(img, target, flip);
}

}  // namespace dfeia
