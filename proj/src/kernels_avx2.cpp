// AVX2 kernel variants. Compiled with -mavx2 only; selected at runtime.
// No FMA: multiplies and adds stay separate so results match the scalar
// reference bit for bit.
#include <immintrin.h>

#include "fedlab/kernels.hpp"

namespace fedlab::kern {

namespace {

double dot_avx2(const double* a, const double* b, std::size_t n) {
  const std::size_t n4 = n - (n % 4);
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d va = _mm256_loadu_pd(a + i);
    const __m256d vb = _mm256_loadu_pd(b + i);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(va, vb));
  }
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  double tail = 0.0;
  for (std::size_t i = n4; i < n; ++i) tail += a[i] * b[i];
  return ((lane[0] + lane[2]) + (lane[1] + lane[3])) + tail;
}

double sumsq_avx2(const double* a, std::size_t n) { return dot_avx2(a, a, n); }

void axpy_avx2(double* y, double c, const double* x, std::size_t n) {
  const std::size_t n4 = n - (n % 4);
  const __m256d vc = _mm256_set1_pd(c);
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d vy = _mm256_loadu_pd(y + i);
    const __m256d vx = _mm256_loadu_pd(x + i);
    _mm256_storeu_pd(y + i, _mm256_add_pd(vy, _mm256_mul_pd(vc, vx)));
  }
  for (std::size_t i = n4; i < n; ++i) y[i] += c * x[i];
}

void step_avx2(double* x, double eta, const double* g, const double* corr,
               std::size_t n) {
  const std::size_t n4 = n - (n % 4);
  const __m256d ve = _mm256_set1_pd(eta);
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d vx = _mm256_loadu_pd(x + i);
    const __m256d vs = _mm256_add_pd(_mm256_loadu_pd(g + i), _mm256_loadu_pd(corr + i));
    _mm256_storeu_pd(x + i, _mm256_sub_pd(vx, _mm256_mul_pd(ve, vs)));
  }
  for (std::size_t i = n4; i < n; ++i) x[i] -= eta * (g[i] + corr[i]);
}

void gemv_sub_avx2(double* y, const double* m, const double* x, const double* s,
                   std::size_t rows, std::size_t n) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_avx2(m + r * n, x, n) - s[r];
}

}  // namespace

const Ops avx2_ops = {dot_avx2, sumsq_avx2, axpy_avx2, step_avx2, gemv_sub_avx2};

}  // namespace fedlab::kern
