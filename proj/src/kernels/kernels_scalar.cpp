#include "molpla/kernels.hpp"

namespace molpla::kernels::scalar {

double dot_f64(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_f64(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

float dot_f32(const float* a, const float* b, std::size_t n) {
  // accumulate in double so long rows do not drift
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return static_cast<float>(s);
}

}  // namespace molpla::kernels::scalar
