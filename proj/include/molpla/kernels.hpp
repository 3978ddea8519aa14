#pragma once

#include <cstddef>

namespace molpla::kernels {

enum class Isa { Scalar, Avx2 };

// Dense inner loops. The active implementation is chosen once at startup
// (AVX2+FMA when the CPU supports it); MOLPLA_SIMD=scalar forces scalar.
double dot_f64(const double* a, const double* b, std::size_t n);
void axpy_f64(double alpha, const double* x, double* y, std::size_t n);  // y += alpha * x
float dot_f32(const float* a, const float* b, std::size_t n);

Isa active_isa();
const char* isa_name(Isa isa);
bool avx2_supported();
// For tests: switch implementation; returns the previous one. Requesting
// Avx2 on an unsupported CPU keeps Scalar.
Isa set_isa(Isa isa);

namespace scalar {
double dot_f64(const double* a, const double* b, std::size_t n);
void axpy_f64(double alpha, const double* x, double* y, std::size_t n);
float dot_f32(const float* a, const float* b, std::size_t n);
}  // namespace scalar

namespace avx2 {
double dot_f64(const double* a, const double* b, std::size_t n);
void axpy_f64(double alpha, const double* x, double* y, std::size_t n);
float dot_f32(const float* a, const float* b, std::size_t n);
}  // namespace avx2

}  // namespace molpla::kernels
