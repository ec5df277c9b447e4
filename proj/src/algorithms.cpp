#include "fedlab/algorithms.hpp"

#include <cmath>
#include <limits>

#include "fedlab/kernels.hpp"
#include "fedlab/rng.hpp"

namespace fedlab {

namespace {

double inv_m(const FederationProblem& p) {
  return 1.0 / static_cast<double>(p.m());
}

double norm_sq(const Vec& v) {
  return kern::ops().sumsq(v.data(), v.size());
}

}  // namespace

ClientSchedule ClientSchedule::Uniform(std::size_t H) {
  if (H < 1) throw std::invalid_argument("schedule: H must be >= 1");
  ClientSchedule s;
  s.uniform_h_ = H;
  return s;
}

ClientSchedule ClientSchedule::PerClient(std::vector<std::size_t> taus) {
  for (auto t : taus)
    if (t < 1) throw std::invalid_argument("schedule: tau must be >= 1");
  ClientSchedule s;
  s.taus_ = std::move(taus);
  return s;
}

ClientSchedule ClientSchedule::SeededUniformRange(std::size_t lo, std::size_t hi,
                                                  std::uint64_t seed,
                                                  std::size_t m) {
  if (lo < 1 || hi < lo) throw std::invalid_argument("schedule: bad range");
  Rng r(seed);
  std::vector<std::size_t> taus(m);
  for (auto& t : taus) t = static_cast<std::size_t>(r.uniform_int(lo, hi));
  return PerClient(std::move(taus));
}

std::size_t ClientSchedule::tau(std::size_t client, std::size_t) const {
  if (uniform_h_) return *uniform_h_;
  return taus_.at(client);
}

std::size_t ClientSchedule::uniform_h() const {
  if (!uniform_h_) throw std::runtime_error("schedule is not uniform");
  return *uniform_h_;
}

double StepPolicy::step_for(std::size_t client, std::size_t tau) const {
  switch (kind) {
    case Kind::Uniform:
      return eta;
    case Kind::InverseTau:
      return eta / static_cast<double>(tau);
    case Kind::PerClient:
      return etas.at(client);
  }
  return eta;
}

StepPolicy StepPolicy::uniform(double eta) {
  if (eta <= 0.0) throw std::invalid_argument("step size must be positive");
  return {Kind::Uniform, eta, {}};
}
StepPolicy StepPolicy::inverse_tau(double eta_bar) {
  if (eta_bar <= 0.0) throw std::invalid_argument("step size must be positive");
  return {Kind::InverseTau, eta_bar, {}};
}
StepPolicy StepPolicy::preset_thm1(double L, std::size_t H) {
  return uniform(1.0 / (6.0 * L * static_cast<double>(H)));
}
StepPolicy StepPolicy::preset_prop3(double L) { return uniform(1.0 / L); }
StepPolicy StepPolicy::preset_thm3(double L) { return inverse_tau(1.0 / (6.0 * L)); }
StepPolicy StepPolicy::preset_thm4a(double L) { return inverse_tau(1.0 / (10.0 * L)); }
StepPolicy StepPolicy::preset_thm4b(double L) { return inverse_tau(1.0 / (6.0 * L)); }
StepPolicy StepPolicy::preset_thm5(double L) { return inverse_tau(1.0 / (26.0 * L)); }
StepPolicy StepPolicy::preset_thm6(double L, double delta_s) {
  return inverse_tau(1.0 / (2.0 * (2.0 + std::sqrt(delta_s)) * L));
}
StepPolicy StepPolicy::preset_thm7(double L, double delta_s) {
  return inverse_tau(1.0 / (72.0 * L * delta_s));
}
StepPolicy StepPolicy::preset_thm8(double eta_bar) { return inverse_tau(eta_bar); }

CompressionPlan CompressionPlan::none(std::size_t d) {
  return {SparsityLevel{d}, SparsityLevel{d}, true};
}

void CompressionPlan::validate(std::size_t d) const {
  if (server.k < 1 || server.k > d || client.k < 1 || client.k > d)
    throw std::invalid_argument("compression plan: k out of range");
  if (!server_error_feedback && !client.identity(d))
    throw std::invalid_argument(
        "no-feedback server variant requires an uncompressed client side");
}

AlgorithmSpec AlgorithmSpec::fedlin(CompressionPlan plan) {
  AlgorithmSpec s;
  s.kind = Kind::FedLin;
  s.plan = plan;
  return s;
}
AlgorithmSpec AlgorithmSpec::fedlin_uncompressed(std::size_t d) {
  return fedlin(CompressionPlan::none(d));
}
AlgorithmSpec AlgorithmSpec::fedavg() {
  AlgorithmSpec s;
  s.kind = Kind::FedAvg;
  return s;
}
AlgorithmSpec AlgorithmSpec::fedprox(double beta) {
  if (beta < 0.0) throw std::invalid_argument("beta must be >= 0");
  AlgorithmSpec s;
  s.kind = beta == 0.0 ? Kind::FedAvg : Kind::FedProx;
  s.beta = beta;
  return s;
}
AlgorithmSpec AlgorithmSpec::fednova() {
  AlgorithmSpec s;
  s.kind = Kind::FedNova;
  return s;
}
AlgorithmSpec AlgorithmSpec::fedsplit(double prox_s, double alpha,
                                      std::size_t e_steps) {
  if (prox_s <= 0.0 || alpha <= 0.0 || e_steps < 1)
    throw std::invalid_argument("fedsplit: invalid prox parameters");
  AlgorithmSpec s;
  s.kind = Kind::FedSplit;
  s.s = prox_s;
  s.alpha = alpha;
  s.e_steps = e_steps;
  return s;
}
AlgorithmSpec AlgorithmSpec::centralized_gd() {
  AlgorithmSpec s;
  s.kind = Kind::CentralizedGD;
  return s;
}

std::string AlgorithmSpec::name() const {
  switch (kind) {
    case Kind::FedLin: return "fedlin";
    case Kind::FedAvg: return "fedavg";
    case Kind::FedProx: return "fedprox";
    case Kind::FedNova: return "fednova";
    case Kind::FedSplit: return "fedsplit";
    case Kind::CentralizedGD: return "centralized_gd";
  }
  return "?";
}

FedLinState FedLinState::init(const FederationProblem& p, Vec x_bar1) {
  const std::size_t d = p.dim();
  if (x_bar1.size() != d) throw DimensionError("x_bar1 dimension mismatch");
  FedLinState st{std::move(x_bar1),
                 Vec(d, 0.0),
                 {},
                 {},
                 ErrorAccumulator(d)};
  st.grads_at_xbar.resize(p.m());
  for (std::size_t i = 0; i < p.m(); ++i) {
    p.clients[i].gradient(st.x_bar, st.grads_at_xbar[i]);
    kern::ops().axpy(st.g.data(), 1.0, st.grads_at_xbar[i].data(), d);
    st.client_residuals.emplace_back(d);
  }
  for (auto& v : st.g) v *= inv_m(p);
  st.grad_evals = p.m();
  return st;
}

Vec fedlin_local_update(const Vec& x, const Vec& grad_at_xbar_i, const Vec& g,
                        double eta_i, const Objective& obj) {
  Vec corr(x.size());
  for (std::size_t j = 0; j < x.size(); ++j)
    corr[j] = g[j] - grad_at_xbar_i[j];
  Vec out = x;
  Vec gx;
  obj.gradient(out, gx);
  kern::ops().step(out.data(), eta_i, gx.data(), corr.data(), out.size());
  return out;
}

void fedlin_round(FedLinState& state, const FederationProblem& problem,
                  const ClientSchedule& schedule, const StepPolicy& steps,
                  const CompressionPlan& plan) {
  const std::size_t d = problem.dim();
  const std::size_t m = problem.m();
  plan.validate(d);
  const auto& K = kern::ops();

  Vec xbar_next(d, 0.0);
  Vec corr(d), gx(d), x(d);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t tau = schedule.tau(i, state.round);
    const double eta = steps.step_for(i, tau);
    for (std::size_t j = 0; j < d; ++j)
      corr[j] = state.g[j] - state.grads_at_xbar[i][j];
    x = state.x_bar;
    for (std::size_t l = 0; l < tau; ++l) {
      problem.clients[i].gradient(x, gx);
      K.step(x.data(), eta, gx.data(), corr.data(), d);
    }
    state.grad_evals += tau;
    K.axpy(xbar_next.data(), 1.0, x.data(), d);  // ascending-index aggregation
  }
  for (auto& v : xbar_next) v *= inv_m(problem);
  state.x_bar = std::move(xbar_next);

  for (std::size_t i = 0; i < m; ++i)
    problem.clients[i].gradient(state.x_bar, state.grads_at_xbar[i]);
  state.grad_evals += m;

  if (plan.server_error_feedback) {
    Vec avg_h(d, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const Vec h = compress_with_feedback(state.client_residuals[i],
                                           state.grads_at_xbar[i], plan.client);
      K.axpy(avg_h.data(), 1.0, h.data(), d);
    }
    for (auto& v : avg_h) v *= inv_m(problem);
    state.g = compress_with_feedback(state.server_residual, avg_h, plan.server);
  } else {
    Vec avg(d, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      K.axpy(avg.data(), 1.0, state.grads_at_xbar[i].data(), d);
    for (auto& v : avg) v *= inv_m(problem);
    state.g = top_k(avg, plan.server);
  }

  state.bytes_up += m * (8 * d + payload_bytes(plan.client, d));
  state.bytes_down += m * (8 * d + payload_bytes(plan.server, d));
  state.round += 1;
}

namespace {

struct MetricsContext {
  const FederationProblem& p;
  double f_reference;
  bool have_x_star;

  RoundMetrics row(std::size_t t, const Vec& x_bar, const Vec& global_grad,
                   std::uint64_t evals, std::uint64_t up,
                   std::uint64_t down) const {
    RoundMetrics rm;
    rm.round = t;
    rm.f_gap = global_value(p, x_bar) - f_reference;
    if (have_x_star) {
      double s = 0.0;
      for (std::size_t j = 0; j < x_bar.size(); ++j) {
        const double dj = x_bar[j] - (*p.x_star)[j];
        s += dj * dj;
      }
      rm.dist_sq = s;
    } else {
      rm.dist_sq = std::numeric_limits<double>::quiet_NaN();
    }
    rm.grad_norm_sq = norm_sq(global_grad);
    rm.grad_evals = evals;
    rm.bytes_up = up;
    rm.bytes_down = down;
    return rm;
  }
};

// Reference minimum by plain gradient descent when no closed form exists.
double reference_minimum(const FederationProblem& p, const Vec& x1,
                         std::size_t iters) {
  Vec x = x1, g;
  const double eta = 1.0 / p.L;
  double best = global_value(p, x);
  for (std::size_t t = 0; t < iters; ++t) {
    global_gradient(p, x, g);
    kern::ops().axpy(x.data(), -eta, g.data(), x.size());
    best = std::min(best, global_value(p, x));
  }
  return best;
}

}  // namespace

Trace run(const AlgorithmSpec& spec, const FederationProblem& problem,
          const ClientSchedule& schedule, const StepPolicy& steps,
          std::size_t T, const RunOptions& opts) {
  const std::size_t d = problem.dim();
  const std::size_t m = problem.m();
  const auto& K = kern::ops();
  const Vec x1 = opts.x_bar1.value_or(Vec(d, 0.0));
  const double div_sq = opts.divergence_threshold * opts.divergence_threshold;

  Trace tr;
  tr.algorithm = spec.name();
  if (problem.x_star) {
    tr.f_reference = global_value(problem, *problem.x_star);
  } else {
    tr.f_reference = reference_minimum(problem, x1, 10 * T);
    tr.reference_minimum = true;
  }
  const MetricsContext mc{problem, tr.f_reference, problem.x_star.has_value()};

  Vec iter_sum(d, 0.0);
  std::size_t iter_count = 0;
  const auto note_iterate = [&](const Vec& x) {
    K.axpy(iter_sum.data(), 1.0, x.data(), d);
    ++iter_count;
  };
  const auto finish = [&](const Vec& x) {
    tr.final_x = x;
    if (iter_count >= 2) {
      // Average over t = 1..T: drop the final recorded iterate.
      tr.iterate_avg.resize(d);
      const double inv = 1.0 / static_cast<double>(iter_count - 1);
      for (std::size_t j = 0; j < d; ++j)
        tr.iterate_avg[j] = (iter_sum[j] - x[j]) * inv;
    }
    return tr;
  };
  const auto stop_early = [&](const RoundMetrics& rm) {
    return opts.stop_dist_sq > 0.0 && !std::isnan(rm.dist_sq) &&
           rm.dist_sq <= opts.stop_dist_sq;
  };

  if (spec.kind == AlgorithmSpec::Kind::FedLin) {
    FedLinState st = FedLinState::init(problem, x1);
    const auto avg_grad = [&] {
      Vec g(d, 0.0);
      for (std::size_t i = 0; i < m; ++i)
        K.axpy(g.data(), 1.0, st.grads_at_xbar[i].data(), d);
      for (auto& v : g) v *= inv_m(problem);
      return g;
    };
    tr.rounds.push_back(
        mc.row(1, st.x_bar, avg_grad(), st.grad_evals, st.bytes_up, st.bytes_down));
    note_iterate(st.x_bar);
    for (std::size_t t = 1; t <= T; ++t) {
      fedlin_round(st, problem, schedule, steps, spec.plan);
      if (norm_sq(st.x_bar) > div_sq) {
        tr.diverged = true;
        return finish(st.x_bar);
      }
      tr.rounds.push_back(mc.row(t + 1, st.x_bar, avg_grad(), st.grad_evals,
                                 st.bytes_up, st.bytes_down));
      note_iterate(st.x_bar);
      if (stop_early(tr.rounds.back())) break;
    }
    return finish(st.x_bar);
  }

  // Baselines share the trace plumbing: x_bar plus cumulative counters.
  Vec x_bar = x1;
  Vec global_g(d);
  std::uint64_t evals = 0, up = 0, down = 0;
  const auto record = [&](std::size_t t) {
    global_gradient(problem, x_bar, global_g);
    evals += m;
    tr.rounds.push_back(mc.row(t, x_bar, global_g, evals, up, down));
    note_iterate(x_bar);
  };
  record(1);

  if (spec.kind == AlgorithmSpec::Kind::FedAvg ||
      spec.kind == AlgorithmSpec::Kind::FedProx) {
    const std::size_t H = schedule.uniform_h();
    Vec x(d), gx(d), xbar_next(d);
    for (std::size_t t = 1; t <= T; ++t) {
      const double eta = steps.step_for(0, H);
      std::fill(xbar_next.begin(), xbar_next.end(), 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        x = x_bar;
        for (std::size_t l = 0; l < H; ++l) {
          problem.clients[i].gradient(x, gx);
          for (std::size_t j = 0; j < d; ++j)
            x[j] -= eta * (gx[j] + spec.beta * (x[j] - x_bar[j]));
        }
        evals += H;
        K.axpy(xbar_next.data(), 1.0, x.data(), d);
      }
      for (auto& v : xbar_next) v *= inv_m(problem);
      x_bar = xbar_next;
      up += m * 8 * d;
      down += m * 8 * d;
      if (norm_sq(x_bar) > div_sq) {
        tr.diverged = true;
        return finish(x_bar);
      }
      record(t + 1);
      if (stop_early(tr.rounds.back())) break;
    }
    return finish(x_bar);
  }

  if (spec.kind == AlgorithmSpec::Kind::FedNova) {
    Vec x(d), gx(d), sum_g(d), upd(d);
    for (std::size_t t = 1; t <= T; ++t) {
      double tau_sum = 0.0;
      for (std::size_t i = 0; i < m; ++i)
        tau_sum += static_cast<double>(schedule.tau(i, t));
      const double tau_eff = tau_sum * inv_m(problem);
      const double eta = steps.step_for(0, 1);  // identical client step sizes
      std::fill(upd.begin(), upd.end(), 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t tau = schedule.tau(i, t);
        const double alpha_i = tau_eff / static_cast<double>(tau);
        x = x_bar;
        std::fill(sum_g.begin(), sum_g.end(), 0.0);
        for (std::size_t l = 0; l < tau; ++l) {
          problem.clients[i].gradient(x, gx);
          K.axpy(sum_g.data(), 1.0, gx.data(), d);
          K.axpy(x.data(), -eta, gx.data(), d);
        }
        evals += tau;
        K.axpy(upd.data(), alpha_i, sum_g.data(), d);
      }
      K.axpy(x_bar.data(), -eta * inv_m(problem), upd.data(), d);
      up += m * 8 * d;
      down += m * 8 * d;
      if (norm_sq(x_bar) > div_sq) {
        tr.diverged = true;
        return finish(x_bar);
      }
      record(t + 1);
      if (stop_early(tr.rounds.back())) break;
    }
    return finish(x_bar);
  }

  if (spec.kind == AlgorithmSpec::Kind::FedSplit) {
    std::vector<Vec> z(m, x1);
    Vec u(d), y(d), gy(d), xbar_next(d);
    for (std::size_t t = 1; t <= T; ++t) {
      std::fill(xbar_next.begin(), xbar_next.end(), 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < d; ++j) u[j] = 2.0 * x_bar[j] - z[i][j];
        y = u;
        for (std::size_t l = 0; l < spec.e_steps; ++l) {
          problem.clients[i].gradient(y, gy);
          for (std::size_t j = 0; j < d; ++j)
            y[j] -= spec.alpha * (gy[j] + (y[j] - u[j]) / spec.s);
        }
        evals += spec.e_steps;
        for (std::size_t j = 0; j < d; ++j)
          z[i][j] += 2.0 * (y[j] - x_bar[j]);
        K.axpy(xbar_next.data(), 1.0, z[i].data(), d);
      }
      for (auto& v : xbar_next) v *= inv_m(problem);
      x_bar = xbar_next;
      up += m * 8 * d;
      down += m * 8 * d;
      if (norm_sq(x_bar) > div_sq) {
        tr.diverged = true;
        return finish(x_bar);
      }
      record(t + 1);
      if (stop_early(tr.rounds.back())) break;
    }
    return finish(x_bar);
  }

  // CentralizedGD: schedule-many synchronized global-gradient steps per round.
  Vec g(d);
  for (std::size_t t = 1; t <= T; ++t) {
    const std::size_t H = schedule.tau(0, t);
    const double eta = steps.step_for(0, H);
    for (std::size_t l = 0; l < H; ++l) {
      global_gradient(problem, x_bar, g);
      evals += m;
      K.axpy(x_bar.data(), -eta, g.data(), d);
    }
    up += m * 8 * d;
    down += m * 8 * d;
    if (norm_sq(x_bar) > div_sq) {
      tr.diverged = true;
      return finish(x_bar);
    }
    record(t + 1);
    if (stop_early(tr.rounds.back())) break;
  }
  return finish(x_bar);
}

}  // namespace fedlab
