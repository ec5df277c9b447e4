// Dispatched dense kernels for the inner optimization loops.
//
// Two implementations exist: a scalar reference and an AVX2 variant. Both use
// the same 4-lane blocked accumulation order for reductions, so with
// contraction disabled (-ffp-contract=off, no FMA) their results are bitwise
// identical. The active variant is chosen once at startup: AVX2 when the CPU
// supports it, overridable with FEDLAB_KERNELS=scalar|avx2.
#pragma once

#include <cstddef>
#include <string>

namespace fedlab::kern {

struct Ops {
  // sum_j a[j]*b[j]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // sum_j a[j]*a[j]
  double (*sumsq)(const double* a, std::size_t n);
  // y[j] += c*x[j]
  void (*axpy)(double* y, double c, const double* x, std::size_t n);
  // x[j] -= eta*(g[j] + corr[j]); the tracked local step with the
  // round-constant correction folded into corr.
  void (*step)(double* x, double eta, const double* g, const double* corr,
               std::size_t n);
  // y[r] = sum_c m[r*n+c]*x[c] - s[r]; row-major m, used for cached-Gram
  // gradients (y = G x - A'b).
  void (*gemv_sub)(double* y, const double* m, const double* x, const double* s,
                   std::size_t rows, std::size_t n);
};

extern const Ops scalar_ops;
#if FEDLAB_BUILD_AVX2
extern const Ops avx2_ops;
#endif

// Active table; resolved on first use.
const Ops& ops();

// Name of the active variant ("scalar" or "avx2").
const std::string& active_variant();

}  // namespace fedlab::kern
