#include "fedlab/oracle.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "fedlab/rng.hpp"

namespace fedlab {

namespace {

Eigen::MatrixXd to_eigen(const Mat& m) {
  Eigen::MatrixXd out(m.rows, m.cols);
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c)
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m.at(r, c);
  return out;
}

Mat from_eigen(const Eigen::MatrixXd& m) {
  Mat out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      out.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = m(r, c);
  return out;
}

// sum_{l<steps} P^l by iterative accumulation (no inversion; P - I may be
// singular).
Eigen::MatrixXd geometric_sum(const Eigen::MatrixXd& P, std::size_t steps) {
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(P.rows(), P.cols());
  Eigen::MatrixXd cur = Eigen::MatrixXd::Identity(P.rows(), P.cols());
  for (std::size_t l = 0; l < steps; ++l) {
    Q += cur;
    cur = cur * P;
  }
  return Q;
}

SurrogateSolution solve_surrogate(const FederationProblem& p,
                                  const std::vector<Eigen::MatrixXd>& Qs) {
  const auto d = static_cast<Eigen::Index>(p.dim());
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
  SurrogateSolution sol;
  for (std::size_t i = 0; i < p.m(); ++i) {
    const auto& q = std::get<Quadratic>(p.clients[i].fn);
    const Eigen::MatrixXd A = to_eigen(q.A);
    const Eigen::Map<const Eigen::VectorXd> b(q.b.data(), d);
    lhs += Qs[i] * A;
    rhs += Qs[i] * b;  // Q_i A_i c_i = Q_i b_i
    sol.Q.push_back(from_eigen(Qs[i]));
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(lhs);
  if (!lu.isInvertible())
    throw SingularSystemError("surrogate system is singular");
  const Eigen::VectorXd x = lu.solve(rhs);
  sol.surrogate_minimizer.assign(x.data(), x.data() + x.size());
  if (p.x_star) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double dj = x(j) - (*p.x_star)[static_cast<std::size_t>(j)];
      s += dj * dj;
    }
    sol.distortion = std::sqrt(s);
  }
  return sol;
}

}  // namespace

SurrogateSolution surrogate_fedprox(const FederationProblem& p, double eta,
                                    double beta, std::size_t H) {
  if (eta <= 0.0) throw std::invalid_argument("eta must be positive");
  const auto d = static_cast<Eigen::Index>(p.dim());
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
  std::vector<Eigen::MatrixXd> Qs;
  for (const auto& c : p.clients) {
    const auto& q = std::get<Quadratic>(c.fn);
    Qs.push_back(geometric_sum(I - eta * (to_eigen(q.A) + beta * I), H));
  }
  return solve_surrogate(p, Qs);
}

SurrogateSolution surrogate_fednova(const FederationProblem& p, double eta,
                                    const std::vector<std::size_t>& taus) {
  if (eta <= 0.0) throw std::invalid_argument("eta must be positive");
  if (taus.size() != p.m()) throw DimensionError("taus size mismatch");
  const auto d = static_cast<Eigen::Index>(p.dim());
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
  double tau_sum = 0.0;
  for (auto t : taus) tau_sum += static_cast<double>(t);
  const double tau_eff = tau_sum / static_cast<double>(p.m());
  std::vector<Eigen::MatrixXd> Qs;
  for (std::size_t i = 0; i < p.m(); ++i) {
    const auto& q = std::get<Quadratic>(p.clients[i].fn);
    const double alpha_i = tau_eff / static_cast<double>(taus[i]);
    Qs.push_back(alpha_i * geometric_sum(I - eta * to_eigen(q.A), taus[i]));
  }
  return solve_surrogate(p, Qs);
}

double fedprox_scalar_error(double eta, double beta) {
  if (eta <= 0.0 || eta >= 1.0 / (2.0 + beta))
    throw std::invalid_argument("eta outside validity range (0, 1/(2+beta))");
  return 94.0 * eta / (3.0 * (6.0 - eta * (5.0 + 3.0 * beta)));
}

double fednova_scalar_error(double eta) {
  if (eta <= 0.0 || eta >= 0.5)
    throw std::invalid_argument("eta outside validity range (0, 1/2)");
  const double a1 = 5.0 / 6.0, a2 = 5.0 / 4.0;
  return 94.0 * a1 * eta * eta /
         (3.0 * (eta * eta * a1 - eta * (3.0 * a1 + 4.0 * a2) + 3.0 * a1 + 4.0 * a2));
}

LowerBoundInstance lower_bound_instance(double L, std::size_t H, double eta,
                                        const Vec& b) {
  if (L < 14.0 || H < 2 || eta <= 0.0)
    throw std::invalid_argument("lower bound instance requires L >= 14, H >= 2, eta > 0");
  if (b.size() != 2) throw DimensionError("b must have dimension 2");
  Mat A1(2, 2), A2(2, 2);
  A1.at(0, 0) = 1.0;
  A1.at(1, 1) = 1.0;
  A2.at(0, 0) = L;
  A2.at(1, 1) = 1.0;
  // f1 = 1/2 x'x + b'x and f2 = 1/2 x'A2 x - b'x in the canonical
  // 1/2 x'Ax - b'x form.
  Quadratic q1{A1, {-b[0], -b[1]}, 0.0};
  Quadratic q2{A2, {b[0], b[1]}, 0.0};
  auto p = FederationProblem::from_clients(
      {Objective::make(std::move(q1)), Objective::make(std::move(q2))});
  p.x_star = quadratic_global_minimizer(p);

  LowerBoundInstance inst{std::move(p), Mat(2, 2), 0.0, 0.0, L, H, eta};
  const double hf = static_cast<double>(H);
  (void)hf;
  const double pow1 = std::pow(1.0 - eta, static_cast<double>(H));
  const double powL = std::pow(1.0 - eta * L, static_cast<double>(H));
  inst.M.at(0, 0) =
      (pow1 + powL / L) * (L + 1.0) / 4.0 - (L - 1.0) * (L - 1.0) / (4.0 * L);
  inst.M.at(1, 1) = pow1;
  inst.lambda1 = inst.M.at(0, 0);
  inst.lambda2 = inst.M.at(1, 1);
  return inst;
}

double rate_bound(const RateBound& b, std::size_t T) {
  const double Tf = static_cast<double>(T);
  switch (b.id) {
    case RateBound::Id::T1:
    case RateBound::Id::T3:
      return std::pow(1.0 - 1.0 / (6.0 * b.kappa), Tf);
    case RateBound::Id::P3:
      return std::pow(1.0 - 1.0 / b.kappa, Tf * static_cast<double>(b.H));
    case RateBound::Id::T6:
      return std::pow(
          1.0 - 1.0 / (2.0 * b.delta_s * (2.0 + std::sqrt(b.delta_s)) * b.kappa),
          Tf);
    case RateBound::Id::T7:
      return std::pow(1.0 - 1.0 / (96.0 * b.delta_s * b.kappa), Tf);
    case RateBound::Id::T8:
      return std::pow(1.0 - 0.75 * b.eta_bar * b.mu, Tf);
    case RateBound::Id::T4a:
      return 10.0 * b.L / Tf;
    case RateBound::Id::T5:
      return 52.0 * b.L / Tf;
    case RateBound::Id::T4b:
      throw std::invalid_argument(
          "T4b depends on the initial gap; evaluated by the bound verifier");
  }
  return 0.0;
}

double rate_bound_floor(const RateBound& b) {
  if (b.id != RateBound::Id::T8) return 0.0;
  return (16.0 / 3.0) * b.eta_bar * (6.0 / (b.delta_c * b.C) + b.delta_c) * b.D /
         b.mu;
}

double rate_bound_coefficient(const RateBound& b) {
  return (b.id == RateBound::Id::T7 || b.id == RateBound::Id::T8) ? 2.0 : 1.0;
}

std::pair<double, double> estimate_dissimilarity(const FederationProblem& p,
                                                 std::size_t sample_count,
                                                 double radius,
                                                 std::uint64_t seed, double C) {
  if (sample_count < 1) throw std::invalid_argument("sample_count must be >= 1");
  Rng r(seed);
  const std::size_t d = p.dim();
  Vec x(d), g;
  double D = 0.0;
  for (std::size_t s = 0; s < sample_count; ++s) {
    for (auto& v : x) v = radius * (2.0 * r.uniform() - 1.0);
    double mean_sq = 0.0;
    Vec sum(d, 0.0);
    for (const auto& c : p.clients) {
      c.gradient(x, g);
      double sq = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        sq += g[j] * g[j];
        sum[j] += g[j];
      }
      mean_sq += sq;
    }
    mean_sq /= static_cast<double>(p.m());
    double global_sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double gj = sum[j] / static_cast<double>(p.m());
      global_sq += gj * gj;
    }
    D = std::max(D, mean_sq - C * global_sq);
  }
  return {C, std::max(D, 0.0)};
}

}  // namespace fedlab
