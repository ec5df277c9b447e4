#include "fedlab/kernels.hpp"

#include <cstdlib>
#include <stdexcept>

namespace fedlab::kern {

namespace {

// Reductions accumulate into 4 lanes (element i goes to lane i%4) with the
// tail summed separately, mirroring the AVX2 register layout exactly.
double dot_scalar(const double* a, const double* b, std::size_t n) {
  const std::size_t n4 = n - (n % 4);
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n4; i += 4) {
    acc[0] += a[i] * b[i];
    acc[1] += a[i + 1] * b[i + 1];
    acc[2] += a[i + 2] * b[i + 2];
    acc[3] += a[i + 3] * b[i + 3];
  }
  double tail = 0.0;
  for (std::size_t i = n4; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[2]) + (acc[1] + acc[3])) + tail;
}

double sumsq_scalar(const double* a, std::size_t n) {
  return dot_scalar(a, a, n);
}

void axpy_scalar(double* y, double c, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += c * x[i];
}

void step_scalar(double* x, double eta, const double* g, const double* corr,
                 std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] -= eta * (g[i] + corr[i]);
}

void gemv_sub_scalar(double* y, const double* m, const double* x,
                     const double* s, std::size_t rows, std::size_t n) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_scalar(m + r * n, x, n) - s[r];
}

const Ops* resolve() {
  const char* force = std::getenv("FEDLAB_KERNELS");
#if FEDLAB_BUILD_AVX2
  if (force) {
    const std::string f(force);
    if (f == "scalar") return &scalar_ops;
    if (f == "avx2") {
      if (!__builtin_cpu_supports("avx2"))
        throw std::runtime_error("FEDLAB_KERNELS=avx2 but CPU lacks AVX2");
      return &avx2_ops;
    }
    throw std::runtime_error("unknown FEDLAB_KERNELS value: " + f);
  }
  if (__builtin_cpu_supports("avx2")) return &avx2_ops;
#else
  if (force && std::string(force) == "avx2")
    throw std::runtime_error("binary built without AVX2 support");
#endif
  return &scalar_ops;
}

}  // namespace

const Ops scalar_ops = {dot_scalar, sumsq_scalar, axpy_scalar, step_scalar,
                        gemv_sub_scalar};

const Ops& ops() {
  static const Ops* active = resolve();
  return *active;
}

const std::string& active_variant() {
  static const std::string name = (&ops() == &scalar_ops) ? "scalar" : "avx2";
  return name;
}

}  // namespace fedlab::kern
