#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "dfeia/errors.hpp"

namespace dfeia {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

// Dense row-major tensor. Copies share the underlying buffer; mut() detaches
// a shared buffer before writing, so a value already recorded on a tape stays
// stable no matter who holds it afterwards.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape)
      : shape_(std::move(shape)),
        data_(std::make_shared<std::vector<T>>(checked_numel(shape_), T(0))) {}

  Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)) {
    if (static_cast<int64_t>(values.size()) != checked_numel(shape_)) {
      throw ConfigError("tensor data length " + std::to_string(values.size()) +
                        " does not match shape " + shape_str(shape_));
    }
    data_ = std::make_shared<std::vector<T>>(std::move(values));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor full(Shape shape, T v) {
    Tensor t(std::move(shape));
    std::fill(t.data_->begin(), t.data_->end(), v);
    return t;
  }

  static Tensor scalar(T v) { return Tensor({1}, {v}); }

  bool defined() const { return static_cast<bool>(data_); }
  const Shape& shape() const { return shape_; }
  int64_t dim(size_t i) const { return shape_.at(i); }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t numel() const { return data_ ? static_cast<int64_t>(data_->size()) : 0; }

  const T* data() const { return data_->data(); }

  // Writable pointer; detaches from other holders of the same buffer first.
  T* mut() {
    if (data_.use_count() > 1) {
      data_ = std::make_shared<std::vector<T>>(*data_);
    }
    return data_->data();
  }

  T at(std::initializer_list<int64_t> idx) const {
    return (*data_)[flat_index(idx)];
  }

  void set(std::initializer_list<int64_t> idx, T v) { mut()[flat_index(idx)] = v; }

  // Same buffer, new extents (must preserve element count).
  Tensor reshaped(Shape new_shape) const {
    if (shape_numel(new_shape) != numel()) {
      throw ConfigError("reshape " + shape_str(shape_) + " -> " + shape_str(new_shape) +
                        " changes element count");
    }
    Tensor t;
    t.shape_ = std::move(new_shape);
    t.data_ = data_;
    return t;
  }

  Tensor clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = std::make_shared<std::vector<T>>(*data_);
    return t;
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_->begin(), data_->end());
    return Tensor<U>(shape_, std::move(out));
  }

  void fill(T v) { std::fill_n(mut(), numel(), v); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    const T* p = data();
    for (int64_t i = 0; i < numel(); ++i) {
      if (!std::isfinite(static_cast<double>(p[i]))) return false;
    }
    return true;
  }

 private:
  static int64_t checked_numel(const Shape& s) {
    for (int64_t e : s) {
      if (e <= 0) throw ConfigError("tensor extents must be positive, got " + shape_str(s));
    }
    return shape_numel(s);
  }

  int64_t flat_index(std::initializer_list<int64_t> idx) const {
    int64_t flat = 0;
    size_t d = 0;
    for (int64_t i : idx) {
      flat = flat * shape_[d] + i;
      ++d;
    }
    return flat;
  }

  Shape shape_;
  std::shared_ptr<std::vector<T>> data_;
};

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) throw ConfigError("max_abs_diff: shape mismatch");
  double m = 0;
  const T* pa = a.data();
  const T* pb = b.data();
  for (int64_t i = 0; i < a.numel(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(pa[i]) - static_cast<double>(pb[i])));
  }
  return m;
}

template <typename T>
bool bit_equal(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) return false;
  const T* pa = a.data();
  const T* pb = b.data();
  for (int64_t i = 0; i < a.numel(); ++i) {
    if (pa[i] != pb[i]) return false;
  }
  return true;
}

template <typename T>
double sum_squares(const Tensor<T>& a) {
  double s = 0;
  const T* p = a.data();
  for (int64_t i = 0; i < a.numel(); ++i) s += static_cast<double>(p[i]) * static_cast<double>(p[i]);
  return s;
}

}  // namespace dfeia
