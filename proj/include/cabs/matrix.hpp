#pragma once

#include <cstddef>
#include <vector>

#include "cabs/errors.hpp"

namespace cabs {

// Dense row-major matrix of doubles. Everything in this library is desk
// scale, so plain triple loops are enough; no BLAS.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) {
    return data[i * cols + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data[i * cols + j];
  }

  bool empty() const { return rows == 0 || cols == 0; }
  std::size_t size() const { return data.size(); }
};

// C = A * B
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols == b.rows, "matmul: inner dimensions differ");
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) {
        c(i, j) += aik * b(k, j);
      }
    }
  }
  return c;
}

// C = A^T * B   (A is m x r, B is m x c: sums over the example axis)
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require(a.rows == b.rows, "matmul_tn: row counts differ");
  Matrix c(a.cols, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) {
        c(k, j) += aik * b(i, j);
      }
    }
  }
  return c;
}

// C = A * B^T
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require(a.cols == b.cols, "matmul_nt: column counts differ");
  Matrix c(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.rows; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) {
        s += a(i, k) * b(j, k);
      }
      c(i, j) = s;
    }
  }
  return c;
}

}  // namespace cabs
