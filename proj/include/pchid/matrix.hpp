#pragma once

#include <cassert>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace pchid {

// Dense row-major matrix of doubles. Sized for the small MLPs used here;
// gemm below is a plain ikj loop which is plenty at <=256 columns.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  double* row(std::size_t r) { return values.data() + r * cols; }
  const double* row(std::size_t r) const { return values.data() + r * cols; }

  bool same_shape(const Matrix& o) const {
    return rows == o.rows && cols == o.cols;
  }

  void fill(double v) { values.assign(values.size(), v); }
};

// out = a * b
inline void gemm(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.cols != b.rows) throw std::invalid_argument("gemm: inner dim mismatch");
  out.rows = a.rows;
  out.cols = b.cols;
  out.values.assign(a.rows * b.cols, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    double* orow = out.row(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
}

// out = a^T * b
inline void gemm_at_b(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.rows != b.rows) throw std::invalid_argument("gemm_at_b: dim mismatch");
  out.rows = a.cols;
  out.cols = b.cols;
  out.values.assign(a.cols * b.cols, 0.0);
  for (std::size_t k = 0; k < a.rows; ++k) {
    const double* arow = a.row(k);
    const double* brow = b.row(k);
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      double* orow = out.row(i);
      for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aki * brow[j];
    }
  }
}

// out = a * b^T
inline void gemm_a_bt(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.cols != b.cols) throw std::invalid_argument("gemm_a_bt: dim mismatch");
  out.rows = a.rows;
  out.cols = b.rows;
  out.values.assign(a.rows * b.rows, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    double* orow = out.row(i);
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* brow = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
      orow[j] = acc;
    }
  }
}

}  // namespace pchid
