#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "retfuse/errors.hpp"

namespace retfuse {

// Dense row-major array of doubles. All nncore math runs in 64-bit so the
// finite-difference checks are meaningful.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    std::size_t n = 1;
    for (std::size_t d : shape_) n *= d;
    data_.assign(n, 0.0);
  }

  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<std::size_t> shape, double v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
  }
  static Tensor scalar(double v) {
    Tensor t({1});
    t.data_[0] = v;
    return t;
  }

  std::size_t ndim() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t size() const { return data_.size(); }
  const std::vector<std::size_t>& shape() const { return shape_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at2(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at2(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void fill(double v) { data_.assign(data_.size(), v); }

  void add_scaled(const Tensor& o, double scale) {
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scale * o.data_[i];
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

inline void require_shape(const Tensor& t, const std::vector<std::size_t>& shape,
                          const char* where) {
  if (t.shape() != shape) throw ShapeError(std::string("shape mismatch in ") + where);
}

}  // namespace retfuse
