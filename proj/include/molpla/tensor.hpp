#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace molpla {

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Row-major dense matrix of doubles.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

  double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
  size_t size() const { return data.size(); }
  void zero();

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

// C = A * B (or C += when accumulate).
void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
// C = A * B^T (or C +=).
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
// C = A^T * B (or C +=).
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);

}  // namespace molpla
