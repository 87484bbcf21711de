#pragma once

#include <cstddef>
#include <vector>

#include "relgen/errors.hpp"

namespace relgen {

/// Dense math keeps f32 storage and f64 accumulation throughout.
using Vector = std::vector<float>;

/// Row-major dense f32 matrix with explicit shape.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, float fill = 0.0f)
      : rows_(rows), cols_(cols), d_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return d_.empty(); }

  float& operator()(std::size_t r, std::size_t c) { return d_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const { return d_[r * cols_ + c]; }

  float* data() { return d_.data(); }
  const float* data() const { return d_.data(); }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> d_;
};

}  // namespace relgen
