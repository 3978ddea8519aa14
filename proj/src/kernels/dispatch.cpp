#include <cstdlib>
#include <cstring>

#include "molpla/kernels.hpp"

namespace molpla::kernels {

namespace {

struct Table {
  double (*dot_f64)(const double*, const double*, std::size_t);
  void (*axpy_f64)(double, const double*, double*, std::size_t);
  float (*dot_f32)(const float*, const float*, std::size_t);
  Isa isa;
};

constexpr Table kScalar{scalar::dot_f64, scalar::axpy_f64, scalar::dot_f32, Isa::Scalar};
constexpr Table kAvx2{avx2::dot_f64, avx2::axpy_f64, avx2::dot_f32, Isa::Avx2};

bool cpu_has_avx2() {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

Table initial_table() {
  const char* env = std::getenv("MOLPLA_SIMD");
  if (env && std::strcmp(env, "scalar") == 0) return kScalar;
  return cpu_has_avx2() ? kAvx2 : kScalar;
}

Table& table() {
  static Table t = initial_table();
  return t;
}

}  // namespace

double dot_f64(const double* a, const double* b, std::size_t n) { return table().dot_f64(a, b, n); }
void axpy_f64(double alpha, const double* x, double* y, std::size_t n) { table().axpy_f64(alpha, x, y, n); }
float dot_f32(const float* a, const float* b, std::size_t n) { return table().dot_f32(a, b, n); }

Isa active_isa() { return table().isa; }

const char* isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

bool avx2_supported() {
  static const bool ok = cpu_has_avx2();
  return ok;
}

Isa set_isa(Isa isa) {
  const Isa prev = table().isa;
  table() = (isa == Isa::Avx2 && avx2_supported()) ? kAvx2 : kScalar;
  return prev;
}

}  // namespace molpla::kernels
