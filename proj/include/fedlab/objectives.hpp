// Client loss families, synthetic generators, closed-form minimizers, and
// smoothness/strong-convexity constants.
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace fedlab {

using Vec = std::vector<double>;

// Dense row-major matrix.
struct Mat {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// f(x) = 1/2 x'Ax - b'x + c0. A symmetric; indefinite A is allowed (the
// smoothness constant is then the spectral radius and mu clamps at 0), which
// the nonconvex constructions rely on. Strong-convexity presets require PSD.
struct Quadratic {
  Mat A;
  Vec b;
  double c0 = 0.0;

  // Center form 1/2 ||A^{1/2}(x-c)||^2.
  static Quadratic from_center(const Mat& A, const Vec& c);
};

// f(x) = 1/2 ||design x - response||^2. Gram and design'response are cached;
// gradients on the hot path never touch the tall matrix.
struct LeastSquares {
  Mat design;
  Vec response;
  Mat gram;        // design' design
  Vec atb;         // design' response
  double rss0 = 0; // response' response

  static LeastSquares make(Mat design, Vec response);
};

// f(x) = sum_j log(1 + exp(-label_j * a_j'x)), labels in {+1,-1}.
struct Logistic {
  Mat features;
  std::vector<int> labels;
};

struct Objective {
  std::variant<Quadratic, LeastSquares, Logistic> fn;
  double L = 0.0;   // smoothness
  double mu = 0.0;  // strong convexity (0 when absent)

  static Objective make(Quadratic q);
  static Objective make(LeastSquares ls);
  static Objective make(Logistic lg);

  std::size_t dim() const;
  double value(const Vec& x) const;
  void gradient(const Vec& x, Vec& out) const;
  Vec gradient(const Vec& x) const;
};

struct FederationProblem {
  std::vector<Objective> clients;
  double L = 0.0;   // max over clients
  double mu = 0.0;  // min over clients (0 if any client is not strongly convex)
  std::optional<Vec> x_star;

  std::size_t dim() const { return clients.at(0).dim(); }
  std::size_t m() const { return clients.size(); }
  double kappa() const;

  static FederationProblem from_clients(std::vector<Objective> clients);
};

struct SynthConfig {
  std::size_t m = 20;
  std::size_t n_i = 500;
  std::size_t d = 100;
  double alpha = 10.0;
  double noise_std = 0.7071067811865476;  // sqrt(0.5)
  std::uint64_t seed = 1;
};

// (1/m) sum_i f_i and its gradient, summed in ascending client order.
double global_value(const FederationProblem& p, const Vec& x);
void global_gradient(const FederationProblem& p, const Vec& x, Vec& out);
std::pair<double, Vec> global_value_and_gradient(const FederationProblem& p,
                                                 const Vec& x);

// x* = (sum A_i)^{-1} (sum b_i); throws on a singular system.
Vec quadratic_global_minimizer(const FederationProblem& p);
// x* = (sum A_i'A_i)^{-1} (sum A_i'b_i); throws on rank deficiency.
Vec least_squares_global_minimizer(const FederationProblem& p);

// Heterogeneous linear-regression federation: per client, A entries are
// iid standard normal, b = A x_i + noise, x_i ~ N(u_i, 1), u_i ~ N(0, alpha).
FederationProblem synth_least_squares(const SynthConfig& cfg);
// Logistic federation with a single true parameter vector and labels sampled
// from the sigmoid model.
FederationProblem synth_logistic(const SynthConfig& cfg);

// (L_i, mu_i) by dense symmetric eigensolve (logistic: L = lambda_max(X'X)/4).
std::pair<double, double> smoothness_constants(const Objective& obj);

// The two-client scalar instance f1 = 1/2 (x-3)^2, f2 = (x-50)^2 used by the
// baseline-distortion oracles; x* = 103/3.
FederationProblem two_client_scalar_instance();

struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SingularSystemError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fedlab
