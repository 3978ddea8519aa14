#include "molpla/tensor.hpp"

#include <algorithm>
#include <string>

#include "molpla/kernels.hpp"

namespace molpla {

void Matrix::zero() { std::fill(data.begin(), data.end(), 0.0); }

namespace {

void prepare(Matrix& c, int rows, int cols, bool accumulate) {
  if (accumulate) {
    if (c.rows != rows || c.cols != cols) throw ShapeError("gemm accumulate target has wrong shape");
  } else {
    c = Matrix(rows, cols);
  }
}

std::string shape(const Matrix& m) { return std::to_string(m.rows) + "x" + std::to_string(m.cols); }

}  // namespace

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  if (a.cols != b.rows) throw ShapeError("gemm_nn shape mismatch " + shape(a) + " * " + shape(b));
  prepare(c, a.rows, b.cols, accumulate);
  for (int i = 0; i < a.rows; ++i) {
    const double* ar = a.row(i);
    double* cr = c.row(i);
    for (int k = 0; k < a.cols; ++k) {
      if (ar[k] != 0.0) kernels::axpy_f64(ar[k], b.row(k), cr, b.cols);
    }
  }
}

void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  if (a.cols != b.cols) throw ShapeError("gemm_nt shape mismatch " + shape(a) + " * " + shape(b) + "^T");
  prepare(c, a.rows, b.rows, accumulate);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < b.rows; ++j) c(i, j) += kernels::dot_f64(a.row(i), b.row(j), a.cols);
  }
}

void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  if (a.rows != b.rows) throw ShapeError("gemm_tn shape mismatch " + shape(a) + "^T * " + shape(b));
  prepare(c, a.cols, b.cols, accumulate);
  for (int i = 0; i < a.rows; ++i) {
    const double* ar = a.row(i);
    for (int k = 0; k < a.cols; ++k) {
      if (ar[k] != 0.0) kernels::axpy_f64(ar[k], b.row(i), c.row(k), b.cols);
    }
  }
}

}  // namespace molpla
