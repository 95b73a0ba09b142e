#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace ccf {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }
  std::span<double> row(std::size_t i) {
    return {data.data() + i * cols, cols};
  }

  /// Matrix with the given rows (by index, in order).
  Matrix take_rows(std::span<const int> idx) const {
    Matrix out(idx.size(), cols);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const double* src = data.data() + static_cast<std::size_t>(idx[r]) * cols;
      std::copy(src, src + cols, out.data.data() + r * cols);
    }
    return out;
  }
};

}  // namespace ccf
