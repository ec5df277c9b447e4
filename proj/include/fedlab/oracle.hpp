// Closed-form ground truth: baseline surrogate minimizers, scalar convergence
// errors, the two-client lower-bound instance, rate-bound evaluators, and the
// gradient-dissimilarity estimator.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedlab/objectives.hpp"

namespace fedlab {

struct SurrogateSolution {
  std::vector<Mat> Q;       // per-client distortion matrices
  Vec surrogate_minimizer;  // x~*
  double distortion = 0.0;  // ||x~* - x*||
};

// Constant-step local-averaging baselines converge to the minimizer of a
// distorted objective. Q_i = sum_{l<H} [I - eta (A_i + beta I)]^l; the
// minimizer solves (sum Q_i A_i) x = sum Q_i A_i c_i.
SurrogateSolution surrogate_fedprox(const FederationProblem& quadratics,
                                    double eta, double beta, std::size_t H);

// Normalized-aggregation variant: Q_i = alpha_i sum_{l<tau_i} [I - eta A_i]^l
// with alpha_i = tau_eff / tau_i.
SurrogateSolution surrogate_fednova(const FederationProblem& quadratics,
                                    double eta,
                                    const std::vector<std::size_t>& taus);

// Closed-form distortion of the two-client scalar instance, H = tau = 2:
// 94 eta / (3 [6 - eta (5 + 3 beta)]), valid for 0 < eta < 1/(2+beta).
double fedprox_scalar_error(double eta, double beta);
// Closed-form distortion of the same instance under normalized aggregation
// with weights 5/6 and 5/4, valid for 0 < eta < 1/2. Note: the printed weights
// correspond to the f1 client taking three local steps and the f2 client two;
// see surrogate_fednova for the general form.
double fednova_scalar_error(double eta);

struct LowerBoundInstance {
  FederationProblem problem;  // two clients: A1 = I, A2 = diag(L, 1)
  Mat M;                      // per-round transition matrix of x_bar
  double lambda1 = 0.0;
  double lambda2 = 0.0;  // (1 - eta)^H
  double L = 0.0;
  std::size_t H = 0;
  double eta = 0.0;
};

// Two-client construction whose round map is diagonal and explicit; with
// b = 0 both clients share the minimizer x* = 0.
LowerBoundInstance lower_bound_instance(double L, std::size_t H, double eta,
                                        const Vec& b = {0.0, 0.0});

struct RateBound {
  enum class Id { T1, P3, T3, T4a, T4b, T5, T6, T7, T8 };
  Id id;
  double kappa = 0.0;    // T1/P3/T3/T6/T7
  double L = 0.0;        // T4/T5/T8
  double mu = 0.0;       // T8
  double delta_s = 1.0;  // T6/T7
  double delta_c = 1.0;  // T8
  double C = 2.0;        // T8 dissimilarity
  double D = 0.0;        // T8 dissimilarity
  double eta_bar = 0.0;  // T8
  std::size_t H = 1;     // P3
};

// Multiplicative factor of the bound after T rounds (linear-rate theorems);
// T8 additionally has an additive floor and leading coefficient, exposed
// separately.
double rate_bound(const RateBound& b, std::size_t T);
double rate_bound_floor(const RateBound& b);        // T8 additive term
double rate_bound_coefficient(const RateBound& b);  // leading factor (1 or 2)

// Empirical (C, D) for the bounded-dissimilarity assumption: C fixed by the
// caller (default 2), D = max over seeded sample points of
// (1/m) sum ||grad f_i||^2 - C ||grad f||^2, clamped at 0. An estimate, not a
// certified bound.
std::pair<double, double> estimate_dissimilarity(const FederationProblem& p,
                                                 std::size_t sample_count,
                                                 double radius,
                                                 std::uint64_t seed,
                                                 double C = 2.0);

}  // namespace fedlab
