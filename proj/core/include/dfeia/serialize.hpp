#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "dfeia/network.hpp"

// Weight-file format "DFEW", little-endian:
//   magic "DFEW" | version u32 = 1 | tensor count u32
//   per tensor: name length u16 | UTF-8 name | rank u8 | extents u32 x rank |
//               raw 32-bit floats
// Tensors appear in the model's registry order; the loader matches by name so
// order is not load-bearing.
namespace dfeia {

namespace serialize_detail {

inline void put_u16(std::ostream& os, uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

inline void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f32(std::ostream& os, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(os, bits);
}

inline bool get_bytes(std::istream& is, void* dst, size_t n) {
  is.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  return static_cast<size_t>(is.gcount()) == n;
}

inline bool get_u16(std::istream& is, uint16_t& v) {
  unsigned char b[2];
  if (!get_bytes(is, b, 2)) return false;
  v = static_cast<uint16_t>(b[0] | (b[1] << 8));
  return true;
}

inline bool get_u32(std::istream& is, uint32_t& v) {
  unsigned char b[4];
  if (!get_bytes(is, b, 4)) return false;
  v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return true;
}

}  // namespace serialize_detail

constexpr uint32_t kWeightFormatVersion = 1;

inline void save_weights(Model<float>& model, const std::filesystem::path& path) {
  using namespace serialize_detail;
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw LoadError(LoadError::Kind::io, "cannot open " + path.string() + " for writing");

  auto params = model.parameters();
  os.write("DFEW", 4);
  put_u32(os, kWeightFormatVersion);
  put_u32(os, static_cast<uint32_t>(params.size()));
  for (auto* p : params) {
    put_u16(os, static_cast<uint16_t>(p->name.size()));
    os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    os.put(static_cast<char>(p->value.rank()));
    for (int64_t e : p->value.shape()) put_u32(os, static_cast<uint32_t>(e));
    for (int64_t i = 0; i < p->value.numel(); ++i) put_f32(os, p->value.data()[i]);
  }
  if (!os) throw LoadError(LoadError::Kind::io, "write failed for " + path.string());
}

inline void load_weights_into(Model<float>& model, const std::filesystem::path& path) {
  using namespace serialize_detail;
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError(LoadError::Kind::io, "cannot open " + path.string());

  char magic[4];
  if (!get_bytes(is, magic, 4)) {
    throw LoadError(LoadError::Kind::unexpected_eof, path.string() + ": unexpected end of file in header");
  }
  if (std::memcmp(magic, "DFEW", 4) != 0) {
    throw LoadError(LoadError::Kind::bad_magic, path.string() + ": not a DFEW weight file");
  }
  uint32_t version = 0, count = 0;
  if (!get_u32(is, version) || !get_u32(is, count)) {
    throw LoadError(LoadError::Kind::unexpected_eof, path.string() + ": unexpected end of file in header");
  }
  if (version != kWeightFormatVersion) {
    throw LoadError(LoadError::Kind::bad_version,
                    path.string() + ": unsupported format version " + std::to_string(version));
  }

  std::map<std::string, Parameter<float>*> by_name;
  for (auto* p : model.parameters()) by_name[p->name] = p;

  std::vector<std::string> seen;
  for (uint32_t ti = 0; ti < count; ++ti) {
    uint16_t name_len = 0;
    if (!get_u16(is, name_len)) {
      throw LoadError(LoadError::Kind::unexpected_eof, path.string() + ": unexpected end of file");
    }
    std::string name(name_len, '\0');
    if (!get_bytes(is, name.data(), name_len)) {
      throw LoadError(LoadError::Kind::unexpected_eof, path.string() + ": unexpected end of file");
    }
    unsigned char rank = 0;
    if (!get_bytes(is, &rank, 1)) {
      throw LoadError(LoadError::Kind::unexpected_eof, path.string() + ": unexpected end of file");
    }
    Shape shape(rank);
    for (int i = 0; i < rank; ++i) {
      uint32_t e = 0;
      if (!get_u32(is, e)) {
        throw LoadError(LoadError::Kind::unexpected_eof, path.string() + ": unexpected end of file");
      }
      shape[i] = e;
    }

    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw LoadError(LoadError::Kind::unknown_name,
                      path.string() + ": unknown parameter name \"" + name + "\"");
    }
    Parameter<float>* p = it->second;
    if (p->value.shape() != shape) {
      throw LoadError(LoadError::Kind::shape_mismatch,
                      path.string() + ": tensor \"" + name + "\" has shape " + shape_str(shape) +
                          ", expected " + shape_str(p->value.shape()));
    }
    float* dst = p->value.mut();
    for (int64_t i = 0; i < p->value.numel(); ++i) {
      uint32_t bits = 0;
      if (!get_u32(is, bits)) {
        throw LoadError(LoadError::Kind::unexpected_eof,
                        path.string() + ": unexpected end of file in tensor \"" + name + "\"");
      }
      std::memcpy(&dst[i], &bits, 4);
    }
    seen.push_back(name);
  }
  if (seen.size() != by_name.size()) {
    for (const auto& [name, p] : by_name) {
      if (std::find(seen.begin(), seen.end(), name) == seen.end()) {
        throw LoadError(LoadError::Kind::missing_tensor,
                        path.string() + ": missing parameter \"" + name + "\"");
      }
    }
  }
}

inline Model<float> load_weights(const std::filesystem::path& path, const NetworkConfig& cfg) {
  Model<float> m(cfg);
  load_weights_into(m, path);
  return m;
}

}  // namespace dfeia
