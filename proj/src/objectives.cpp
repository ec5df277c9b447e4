#include "fedlab/objectives.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "fedlab/kernels.hpp"
#include "fedlab/rng.hpp"

namespace fedlab {

namespace {

Eigen::Map<const Eigen::MatrixXd> as_eigen(const Mat& m) {
  // Row-major storage; symmetric matrices are unaffected by the transpose.
  return {m.data.data(), static_cast<Eigen::Index>(m.cols),
          static_cast<Eigen::Index>(m.rows)};
}

// Symmetric solve with an explicit pivot-based singularity check.
Vec spd_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& rhs) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  const auto D = ldlt.vectorD();
  const double dmax = D.cwiseAbs().maxCoeff();
  if (dmax <= 0.0 || D.cwiseAbs().minCoeff() < 1e-12 * dmax)
    throw SingularSystemError("singular normal system (pivot below threshold)");
  Eigen::VectorXd x = ldlt.solve(rhs);
  return Vec(x.data(), x.data() + x.size());
}

double sigmoid(double z) {
  // Split form avoids overflow for large |z|.
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double log1pexp(double z) {
  // log(1 + e^z), stable for both signs.
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

}  // namespace

Quadratic Quadratic::from_center(const Mat& A, const Vec& c) {
  if (A.rows != c.size()) throw DimensionError("center form: A/c size mismatch");
  Quadratic q;
  q.A = A;
  q.b.assign(A.rows, 0.0);
  kern::ops().gemv_sub(q.b.data(), A.data.data(), c.data(),
                       std::vector<double>(A.rows, 0.0).data(), A.rows, A.cols);
  q.c0 = 0.5 * kern::ops().dot(q.b.data(), c.data(), c.size());
  return q;
}

LeastSquares LeastSquares::make(Mat design, Vec response) {
  if (design.rows != response.size())
    throw DimensionError("design/response size mismatch");
  LeastSquares ls;
  const auto X = as_eigen(design).transpose();  // n x d
  Eigen::Map<const Eigen::VectorXd> y(response.data(),
                                      static_cast<Eigen::Index>(response.size()));
  Eigen::MatrixXd G = X.transpose() * X;
  Eigen::VectorXd atb = X.transpose() * y;
  ls.gram = Mat(design.cols, design.cols);
  for (std::size_t r = 0; r < ls.gram.rows; ++r)
    for (std::size_t c = 0; c < ls.gram.cols; ++c)
      ls.gram.at(r, c) = G(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  ls.atb.assign(atb.data(), atb.data() + atb.size());
  ls.rss0 = y.squaredNorm();
  ls.design = std::move(design);
  ls.response = std::move(response);
  return ls;
}

Objective Objective::make(Quadratic q) {
  Objective o;
  o.fn = std::move(q);
  std::tie(o.L, o.mu) = smoothness_constants(o);
  return o;
}

Objective Objective::make(LeastSquares ls) {
  Objective o;
  o.fn = std::move(ls);
  std::tie(o.L, o.mu) = smoothness_constants(o);
  return o;
}

Objective Objective::make(Logistic lg) {
  Objective o;
  o.fn = std::move(lg);
  std::tie(o.L, o.mu) = smoothness_constants(o);
  return o;
}

std::size_t Objective::dim() const {
  if (const auto* q = std::get_if<Quadratic>(&fn)) return q->A.rows;
  if (const auto* ls = std::get_if<LeastSquares>(&fn)) return ls->design.cols;
  return std::get<Logistic>(fn).features.cols;
}

double Objective::value(const Vec& x) const {
  if (x.size() != dim()) throw DimensionError("value: dimension mismatch");
  const auto& K = kern::ops();
  if (const auto* q = std::get_if<Quadratic>(&fn)) {
    Vec Ax(x.size());
    static thread_local Vec zero;
    zero.assign(x.size(), 0.0);
    K.gemv_sub(Ax.data(), q->A.data.data(), x.data(), zero.data(), q->A.rows,
               q->A.cols);
    return 0.5 * K.dot(x.data(), Ax.data(), x.size()) -
           K.dot(q->b.data(), x.data(), x.size()) + q->c0;
  }
  if (const auto* ls = std::get_if<LeastSquares>(&fn)) {
    // 1/2 (x'Gx - 2 atb'x + y'y) via the cached Gram.
    Vec Gx(x.size());
    static thread_local Vec zero;
    zero.assign(x.size(), 0.0);
    K.gemv_sub(Gx.data(), ls->gram.data.data(), x.data(), zero.data(),
               ls->gram.rows, ls->gram.cols);
    return 0.5 * (K.dot(x.data(), Gx.data(), x.size()) -
                  2.0 * K.dot(ls->atb.data(), x.data(), x.size()) + ls->rss0);
  }
  const auto& lg = std::get<Logistic>(fn);
  double v = 0.0;
  for (std::size_t j = 0; j < lg.features.rows; ++j) {
    const double margin =
        lg.labels[j] *
        kern::ops().dot(lg.features.data.data() + j * lg.features.cols, x.data(),
                        x.size());
    v += log1pexp(-margin);
  }
  return v;
}

void Objective::gradient(const Vec& x, Vec& out) const {
  if (x.size() != dim()) throw DimensionError("gradient: dimension mismatch");
  out.resize(x.size());
  const auto& K = kern::ops();
  if (const auto* q = std::get_if<Quadratic>(&fn)) {
    K.gemv_sub(out.data(), q->A.data.data(), x.data(), q->b.data(), q->A.rows,
               q->A.cols);
    return;
  }
  if (const auto* ls = std::get_if<LeastSquares>(&fn)) {
    K.gemv_sub(out.data(), ls->gram.data.data(), x.data(), ls->atb.data(),
               ls->gram.rows, ls->gram.cols);
    return;
  }
  const auto& lg = std::get<Logistic>(fn);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t j = 0; j < lg.features.rows; ++j) {
    const double* row = lg.features.data.data() + j * lg.features.cols;
    const double margin = lg.labels[j] * K.dot(row, x.data(), x.size());
    const double w = -lg.labels[j] * sigmoid(-margin);
    K.axpy(out.data(), w, row, x.size());
  }
}

Vec Objective::gradient(const Vec& x) const {
  Vec g;
  gradient(x, g);
  return g;
}

double FederationProblem::kappa() const {
  if (mu <= 0.0) throw std::runtime_error("kappa undefined: mu = 0");
  return L / mu;
}

FederationProblem FederationProblem::from_clients(std::vector<Objective> cl) {
  if (cl.empty()) throw std::runtime_error("empty federation");
  FederationProblem p;
  p.L = cl[0].L;
  p.mu = cl[0].mu;
  for (const auto& o : cl) {
    if (o.dim() != cl[0].dim()) throw DimensionError("client dimension mismatch");
    p.L = std::max(p.L, o.L);
    p.mu = std::min(p.mu, o.mu);
  }
  p.clients = std::move(cl);
  return p;
}

double global_value(const FederationProblem& p, const Vec& x) {
  double v = 0.0;
  for (const auto& c : p.clients) v += c.value(x);
  return v / static_cast<double>(p.m());
}

void global_gradient(const FederationProblem& p, const Vec& x, Vec& out) {
  out.assign(x.size(), 0.0);
  Vec g;
  for (const auto& c : p.clients) {
    c.gradient(x, g);
    kern::ops().axpy(out.data(), 1.0, g.data(), g.size());
  }
  const double inv = 1.0 / static_cast<double>(p.m());
  for (auto& v : out) v *= inv;
}

std::pair<double, Vec> global_value_and_gradient(const FederationProblem& p,
                                                 const Vec& x) {
  Vec g;
  global_gradient(p, x, g);
  return {global_value(p, x), std::move(g)};
}

Vec quadratic_global_minimizer(const FederationProblem& p) {
  const auto d = static_cast<Eigen::Index>(p.dim());
  Eigen::MatrixXd Asum = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd bsum = Eigen::VectorXd::Zero(d);
  for (const auto& c : p.clients) {
    const auto& q = std::get<Quadratic>(c.fn);
    Asum += as_eigen(q.A);
    bsum += Eigen::Map<const Eigen::VectorXd>(q.b.data(), d);
  }
  return spd_solve(Asum, bsum);
}

Vec least_squares_global_minimizer(const FederationProblem& p) {
  const auto d = static_cast<Eigen::Index>(p.dim());
  Eigen::MatrixXd Gsum = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd rsum = Eigen::VectorXd::Zero(d);
  for (const auto& c : p.clients) {
    const auto& ls = std::get<LeastSquares>(c.fn);
    Gsum += as_eigen(ls.gram);
    rsum += Eigen::Map<const Eigen::VectorXd>(ls.atb.data(), d);
  }
  return spd_solve(Gsum, rsum);
}

FederationProblem synth_least_squares(const SynthConfig& cfg) {
  if (cfg.m < 1 || cfg.n_i < 1 || cfg.d < 1 || cfg.alpha < 0.0)
    throw std::runtime_error("invalid synthesis config");
  Rng root(cfg.seed);
  std::vector<Objective> clients;
  clients.reserve(cfg.m);
  for (std::size_t i = 0; i < cfg.m; ++i) {
    Rng r = root.child(i);
    const double u_i = r.normal(0.0, std::sqrt(cfg.alpha));
    Vec x_i(cfg.d);
    for (auto& v : x_i) v = r.normal(u_i, 1.0);
    Mat A(cfg.n_i, cfg.d);
    for (auto& v : A.data) v = r.normal();
    Vec b(cfg.n_i);
    for (std::size_t j = 0; j < cfg.n_i; ++j) {
      b[j] = kern::ops().dot(A.data.data() + j * cfg.d, x_i.data(), cfg.d) +
             r.normal(0.0, cfg.noise_std);
    }
    clients.push_back(Objective::make(LeastSquares::make(std::move(A), std::move(b))));
  }
  auto p = FederationProblem::from_clients(std::move(clients));
  p.x_star = least_squares_global_minimizer(p);
  return p;
}

FederationProblem synth_logistic(const SynthConfig& cfg) {
  if (cfg.m < 1 || cfg.n_i < 1 || cfg.d < 1)
    throw std::runtime_error("invalid synthesis config");
  Rng root(cfg.seed);
  Vec x_true(cfg.d);
  for (auto& v : x_true) v = root.normal();
  std::vector<Objective> clients;
  clients.reserve(cfg.m);
  for (std::size_t i = 0; i < cfg.m; ++i) {
    Rng r = root.child(i);
    Logistic lg;
    lg.features = Mat(cfg.n_i, cfg.d);
    for (auto& v : lg.features.data) v = r.normal();
    lg.labels.resize(cfg.n_i);
    for (std::size_t j = 0; j < cfg.n_i; ++j) {
      const double z = kern::ops().dot(lg.features.data.data() + j * cfg.d,
                                       x_true.data(), cfg.d);
      lg.labels[j] = (r.uniform() < sigmoid(z)) ? 1 : -1;
    }
    clients.push_back(Objective::make(std::move(lg)));
  }
  return FederationProblem::from_clients(std::move(clients));
}

std::pair<double, double> smoothness_constants(const Objective& obj) {
  const auto eig_extremes = [](const Eigen::MatrixXd& S) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    return std::pair<double, double>(ev(ev.size() - 1), ev(0));
  };
  if (const auto* q = std::get_if<Quadratic>(&obj.fn)) {
    const auto [lmax, lmin] = eig_extremes(as_eigen(q->A));
    return {std::max(std::abs(lmax), std::abs(lmin)), std::max(lmin, 0.0)};
  }
  if (const auto* ls = std::get_if<LeastSquares>(&obj.fn)) {
    const auto [lmax, lmin] = eig_extremes(as_eigen(ls->gram));
    // Gram eigenvalues are nonnegative up to roundoff.
    return {lmax, std::max(lmin, 0.0)};
  }
  const auto& lg = std::get<Logistic>(obj.fn);
  const auto X = as_eigen(lg.features).transpose();
  if (lg.features.rows == 0 || lg.features.cols == 0) return {0.0, 0.0};
  Eigen::MatrixXd G = X.transpose() * X;
  const auto [lmax, lmin] = eig_extremes(G);
  (void)lmin;
  return {0.25 * lmax, 0.0};
}

FederationProblem two_client_scalar_instance() {
  Mat A1(1, 1), A2(1, 1);
  A1.at(0, 0) = 1.0;
  A2.at(0, 0) = 2.0;
  auto f1 = Objective::make(Quadratic::from_center(A1, {3.0}));
  auto f2 = Objective::make(Quadratic::from_center(A2, {50.0}));
  auto p = FederationProblem::from_clients({std::move(f1), std::move(f2)});
  p.x_star = quadratic_global_minimizer(p);
  return p;
}

}  // namespace fedlab
