#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "dfeia/tensor.hpp"

namespace dfeia {

// Deterministic random stream. mt19937_64 is bit-exact across platforms, and
// all derived draws below are hand-rolled instead of going through
// std::*_distribution, whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0,1) with 53 bits of precision.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Box-Muller; one draw per pair of uniforms, no cached spare.
  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Normal(0, stddev) rejected outside +/- limit*stddev.
  double trunc_normal(double stddev, double limit = 2.0) {
    double z = normal();
    while (std::abs(z) > limit) z = normal();
    return z * stddev;
  }

  // Unbiased integer in [0, n) by rejection.
  uint64_t below(uint64_t n) {
    const uint64_t rem = std::numeric_limits<uint64_t>::max() % n;
    const uint64_t threshold = std::numeric_limits<uint64_t>::max() - rem;
    uint64_t v = gen_();
    while (v >= threshold) v = gen_();
    return v % n;
  }

  // Fisher-Yates with explicit draw order.
  template <typename V>
  void shuffle(std::vector<V>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  template <typename T>
  Tensor<T> uniform_tensor(Shape shape, double lo, double hi) {
    Tensor<T> t(std::move(shape));
    T* p = t.mut();
    for (int64_t i = 0; i < t.numel(); ++i) p[i] = static_cast<T>(uniform(lo, hi));
    return t;
  }

  template <typename T>
  Tensor<T> normal_tensor(Shape shape, double stddev = 1.0) {
    Tensor<T> t(std::move(shape));
    T* p = t.mut();
    for (int64_t i = 0; i < t.numel(); ++i) p[i] = static_cast<T>(normal() * stddev);
    return t;
  }

 private:
  std::mt19937_64 gen_;
};

// Stable mix for deriving independent streams (per class, per epoch, ...).
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t x = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

}  // namespace dfeia
