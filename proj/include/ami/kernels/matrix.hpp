#pragma once

#include <cstddef>
#include <vector>

namespace ami::kernels {

/// Row-major dense matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}
  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// m(i, j) = f(i, j) for every cell.
template <typename F>
Matrix fill_matrix_serial(std::size_t rows, std::size_t cols, F&& f) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = f(i, j);
  return m;
}

template <typename F>
Matrix fill_matrix_omp(std::size_t rows, std::size_t cols, F&& f) {
  Matrix m(rows, cols);
  const auto total = static_cast<long long>(rows * cols);
#pragma omp parallel for schedule(static)
  for (long long k = 0; k < total; ++k) {
    const auto i = static_cast<std::size_t>(k) / cols;
    const auto j = static_cast<std::size_t>(k) % cols;
    m(i, j) = f(i, j);
  }
  return m;
}

}  // namespace ami::kernels
