#pragma once

#include <array>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace jcas::nn {

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimension order is (batch, height, width, channels). For the DFS input the
// height axis carries Doppler bins and the width axis carries time.
struct Shape {
  std::size_t n = 1;
  std::size_t h = 1;
  std::size_t w = 1;
  std::size_t c = 1;

  std::size_t size() const { return n * h * w * c; }
  std::size_t spatial() const { return h * w; }
  std::size_t per_sample() const { return h * w * c; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

inline std::string Shape::str() const {
  return "(" + std::to_string(n) + "x" + std::to_string(h) + "x" + std::to_string(w) + "x" +
         std::to_string(c) + ")";
}

// Dense row-major 4-D tensor. Element (n, y, x, ch) lives at
// ((n*H + y)*W + x)*C + ch.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() : shape_{1, 1, 1, 1}, data_(1, T(0)) {}
  explicit Tensor(Shape s, T fill = T(0)) : shape_(s), data_(checked_size(s), fill) {}
  Tensor(Shape s, std::vector<T> values) : shape_(s), data_(std::move(values)) {
    if (data_.size() != checked_size(s)) {
      throw ShapeError("tensor buffer length " + std::to_string(data_.size()) +
                       " does not match shape " + s.str());
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t n() const { return shape_.n; }
  std::size_t h() const { return shape_.h; }
  std::size_t w() const { return shape_.w; }
  std::size_t c() const { return shape_.c; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  std::size_t index(std::size_t b, std::size_t y, std::size_t x, std::size_t ch) const {
    return ((b * shape_.h + y) * shape_.w + x) * shape_.c + ch;
  }
  T& at(std::size_t b, std::size_t y, std::size_t x, std::size_t ch) {
    return data_[index(b, y, x, ch)];
  }
  const T& at(std::size_t b, std::size_t y, std::size_t x, std::size_t ch) const {
    return data_[index(b, y, x, ch)];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // Same buffer, different dims (e.g. flatten to batch x features).
  Tensor reshaped(Shape s) const {
    Tensor out;
    out.shape_ = s;
    if (s.size() != data_.size()) throw ShapeError("reshape " + shape_.str() + " -> " + s.str());
    out.data_ = data_;
    return out;
  }
  void reshape_inplace(Shape s) {
    if (s.size() != data_.size()) throw ShapeError("reshape " + shape_.str() + " -> " + s.str());
    shape_ = s;
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor& operator+=(const Tensor& o) {
    if (o.shape_ != shape_) throw ShapeError("add " + shape_.str() + " vs " + o.shape_.str());
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  // Rows [first, first+count) along the batch axis.
  Tensor slice_batch(std::size_t first, std::size_t count) const {
    if (first + count > shape_.n) throw ShapeError("batch slice out of range");
    Shape s = shape_;
    s.n = count;
    const std::size_t per = shape_.per_sample();
    return Tensor(s, std::vector<T>(data_.begin() + static_cast<std::ptrdiff_t>(first * per),
                                    data_.begin() + static_cast<std::ptrdiff_t>((first + count) * per)));
  }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

 private:
  static std::size_t checked_size(const Shape& s) {
    if (s.n == 0 || s.h == 0 || s.w == 0 || s.c == 0) {
      throw ShapeError("tensor dims must be >= 1, got " + s.str());
    }
    return s.size();
  }

  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
Tensor<T> concat_batch(const Tensor<T>& a, const Tensor<T>& b) {
  Shape sa = a.shape();
  Shape sb = b.shape();
  if (sa.h != sb.h || sa.w != sb.w || sa.c != sb.c) {
    throw ShapeError("concat " + sa.str() + " with " + sb.str());
  }
  std::vector<T> v(a.vec());
  v.insert(v.end(), b.vec().begin(), b.vec().end());
  sa.n += sb.n;
  return Tensor<T>(sa, std::move(v));
}

}  // namespace jcas::nn
