#include "fedlab/harness.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fedlab/serialize.hpp"

namespace fedlab {

using nlohmann::json;

std::string required_preset(RateBound::Id id) {
  switch (id) {
    case RateBound::Id::T1: return "thm1";
    case RateBound::Id::P3: return "prop3";
    case RateBound::Id::T3: return "thm3";
    case RateBound::Id::T4a: return "thm4a";
    case RateBound::Id::T4b: return "thm4b";
    case RateBound::Id::T5: return "thm5";
    case RateBound::Id::T6: return "thm6";
    case RateBound::Id::T7: return "thm7";
    case RateBound::Id::T8: return "thm8";
  }
  return "?";
}

BoundReport verify_bound(const Trace& trace, const RateBound& bound,
                         const FederationProblem* problem,
                         const std::string& preset_label, double rel_tol) {
  BoundReport rep;
  rep.theorem = bound.id;
  if (!preset_label.empty() && preset_label != required_preset(bound.id)) {
    rep.refused = true;
    rep.detail = "trace preset '" + preset_label + "' does not match '" +
                 required_preset(bound.id) + "'";
    return rep;
  }
  if (trace.rounds.size() < 2) {
    rep.refused = true;
    rep.detail = "trace too short";
    return rep;
  }
  const auto& rows = trace.rounds;
  const std::size_t T = rows.size() - 1;
  const double gap1 = rows[0].f_gap;
  const double dist1 = rows[0].dist_sq;

  const auto check = [&](double measured, double limit) {
    rep.rounds_checked += 1;
    const double slack = rel_tol * std::max(std::abs(limit), std::max(gap1, 1.0));
    if (measured > limit + slack) {
      rep.rounds_failed += 1;
      if (limit != 0.0)
        rep.max_rel_violation =
            std::max(rep.max_rel_violation, (measured - limit) / std::abs(limit));
    }
  };

  switch (bound.id) {
    case RateBound::Id::T1:
    case RateBound::Id::P3:
    case RateBound::Id::T3:
    case RateBound::Id::T6:
    case RateBound::Id::T7:
      for (std::size_t t = 1; t <= T; ++t)
        check(rows[t].f_gap,
              rate_bound_coefficient(bound) * rate_bound(bound, t) * gap1);
      break;
    case RateBound::Id::T8:
      for (std::size_t t = 1; t <= T; ++t)
        check(rows[t].dist_sq,
              2.0 * rate_bound(bound, t) * dist1 + rate_bound_floor(bound));
      break;
    case RateBound::Id::T4a: {
      if (!problem || trace.iterate_avg.empty()) {
        rep.refused = true;
        rep.detail = "averaged-iterate check needs the problem";
        return rep;
      }
      const double avg_gap =
          global_value(*problem, trace.iterate_avg) - trace.f_reference;
      check(avg_gap, rate_bound(bound, T) *
                         (rows[0].dist_sq - rows[T].dist_sq));
      break;
    }
    case RateBound::Id::T4b: {
      const double c = 1.0 / (12.0 * dist1 * bound.L);
      for (std::size_t t = 1; t <= T; ++t) {
        // Last-iterate bound at round index t+1 (t rounds completed).
        const double limit = gap1 / (c * gap1 * static_cast<double>(t) + 1.0);
        check(rows[t].f_gap, limit);
      }
      break;
    }
    case RateBound::Id::T5: {
      double min_grad = rows[0].grad_norm_sq;
      for (std::size_t t = 0; t < T; ++t)
        min_grad = std::min(min_grad, rows[t].grad_norm_sq);
      check(min_grad, rate_bound(bound, T) * (rows[0].f_gap - rows[T].f_gap));
      break;
    }
  }
  rep.verdict = rep.rounds_failed == 0;
  return rep;
}

Vec fixed_point(const AlgorithmSpec& spec, const FederationProblem& problem,
                const ClientSchedule& schedule, const StepPolicy& steps,
                std::size_t t_max) {
  if (spec.kind == AlgorithmSpec::Kind::FedSplit)
    throw std::invalid_argument("fixed_point: operator-splitting state is not restartable");
  Vec x(problem.dim(), 0.0);
  for (std::size_t t = 0; t < t_max; ++t) {
    RunOptions opts;
    opts.x_bar1 = x;
    const Trace tr = run(spec, problem, schedule, steps, 1, opts);
    if (tr.diverged) throw std::runtime_error("fixed_point: iteration diverged");
    double diff_sq = 0.0, norm_sq = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double dj = tr.final_x[j] - x[j];
      diff_sq += dj * dj;
      norm_sq += x[j] * x[j];
    }
    x = tr.final_x;
    if (std::sqrt(diff_sq) <= 1e-12 * (1.0 + std::sqrt(norm_sq))) return x;
  }
  throw std::runtime_error("fixed_point: no convergence within t_max rounds");
}

FederationProblem fedsplit_divergence_instance(double L, double mu) {
  Mat A1(2, 2), A2(2, 2);
  A1.at(0, 0) = L;
  A1.at(1, 1) = mu;
  A2.at(0, 0) = mu;
  A2.at(1, 1) = mu;
  Quadratic q1{A1, {1.0, 1.0}, 0.0};
  Quadratic q2{A2, {-1.0, 2.0}, 0.0};
  auto p = FederationProblem::from_clients(
      {Objective::make(std::move(q1)), Objective::make(std::move(q2))});
  p.x_star = quadratic_global_minimizer(p);
  return p;
}

FederationProblem build_problem(const json& pc) {
  const std::string type = pc.at("type").get<std::string>();
  if (type == "synth_least_squares" || type == "synth_logistic") {
    SynthConfig cfg;
    cfg.m = pc.value("m", cfg.m);
    cfg.n_i = pc.value("n_i", cfg.n_i);
    cfg.d = pc.value("d", cfg.d);
    cfg.alpha = pc.value("alpha", cfg.alpha);
    cfg.noise_std = pc.value("noise_std", cfg.noise_std);
    cfg.seed = pc.value("seed", cfg.seed);
    return type == "synth_least_squares" ? synth_least_squares(cfg)
                                         : synth_logistic(cfg);
  }
  if (type == "two_client_scalar") return two_client_scalar_instance();
  if (type == "lower_bound") {
    const auto inst = lower_bound_instance(pc.value("L", 14.0),
                                           pc.value("H", std::size_t{2}),
                                           pc.value("eta", 0.1));
    return inst.problem;
  }
  if (type == "fedsplit_divergence")
    return fedsplit_divergence_instance(pc.value("L", 1000.0), pc.value("mu", 1.0));
  if (type == "file") return load_problem(pc.at("path").get<std::string>());
  throw std::runtime_error("unknown problem type: " + type);
}

namespace {

ClientSchedule build_schedule(const json& sc, std::size_t m) {
  const std::string type = sc.at("type").get<std::string>();
  if (type == "uniform") return ClientSchedule::Uniform(sc.at("H").get<std::size_t>());
  if (type == "per_client")
    return ClientSchedule::PerClient(sc.at("taus").get<std::vector<std::size_t>>());
  if (type == "seeded_uniform")
    return ClientSchedule::SeededUniformRange(sc.at("lo").get<std::size_t>(),
                                              sc.at("hi").get<std::size_t>(),
                                              sc.at("seed").get<std::uint64_t>(), m);
  throw std::runtime_error("unknown schedule type: " + type);
}

AlgorithmSpec build_algorithm(const json& e, std::size_t d) {
  const std::string algo = e.at("algorithm").get<std::string>();
  if (algo == "fedlin") {
    CompressionPlan plan = CompressionPlan::none(d);
    plan.server.k = e.value("server_k", d);
    plan.client.k = e.value("client_k", d);
    plan.server_error_feedback = e.value("server_error_feedback", true);
    return AlgorithmSpec::fedlin(plan);
  }
  if (algo == "fedavg") return AlgorithmSpec::fedavg();
  if (algo == "fedprox") return AlgorithmSpec::fedprox(e.at("beta").get<double>());
  if (algo == "fednova") return AlgorithmSpec::fednova();
  if (algo == "fedsplit")
    return AlgorithmSpec::fedsplit(e.at("s").get<double>(),
                                   e.at("alpha").get<double>(),
                                   e.at("e_steps").get<std::size_t>());
  if (algo == "centralized_gd") return AlgorithmSpec::centralized_gd();
  throw std::runtime_error("unknown algorithm: " + algo);
}

StepPolicy build_steps(const json& st, const FederationProblem& p,
                       const AlgorithmSpec& spec, const ClientSchedule& sched) {
  if (st.contains("preset")) {
    const std::string preset = st.at("preset").get<std::string>();
    const double L = p.L;
    const std::size_t d = p.dim();
    if (preset == "thm1") return StepPolicy::preset_thm1(L, sched.uniform_h());
    if (preset == "prop3") return StepPolicy::preset_prop3(L);
    if (preset == "thm3") return StepPolicy::preset_thm3(L);
    if (preset == "thm4a") return StepPolicy::preset_thm4a(L);
    if (preset == "thm4b") return StepPolicy::preset_thm4b(L);
    if (preset == "thm5") return StepPolicy::preset_thm5(L);
    if (preset == "thm6")
      return StepPolicy::preset_thm6(L, spec.plan.server.delta(d));
    if (preset == "thm7")
      return StepPolicy::preset_thm7(L, spec.plan.server.delta(d));
    if (preset == "thm8")
      return StepPolicy::preset_thm8(st.at("eta_bar").get<double>());
    throw std::runtime_error("unknown step preset: " + preset);
  }
  const std::string type = st.at("type").get<std::string>();
  if (type == "uniform") return StepPolicy::uniform(st.at("eta").get<double>());
  if (type == "inverse_tau")
    return StepPolicy::inverse_tau(st.at("eta_bar").get<double>());
  throw std::runtime_error("unknown step type: " + type);
}

}  // namespace

std::vector<Trace> run_experiment(const json& cfg, const std::string& out_dir) {
  const FederationProblem problem = build_problem(cfg.at("problem"));
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  std::vector<Trace> traces;
  json summary = json::array();
  for (const auto& e : cfg.at("entries")) {
    const auto schedule = build_schedule(e.at("schedule"), problem.m());
    const auto spec = build_algorithm(e, problem.dim());
    const auto steps = build_steps(e.at("steps"), problem, spec, schedule);
    RunOptions opts;
    opts.stop_dist_sq = e.value("stop_dist_sq", 0.0);
    if (e.contains("x_bar1")) opts.x_bar1 = e.at("x_bar1").get<Vec>();
    const std::size_t T = e.at("T").get<std::size_t>();
    Trace tr = run(spec, problem, schedule, steps, T, opts);
    const std::string label = e.value("label", spec.name());
    if (!out_dir.empty()) {
      const std::string base = out_dir + "/" + label;
      write_trace_csv(tr, base + ".csv");
      write_trace_sidecar(tr, e, base + ".json");
    }
    summary.push_back({{"label", label},
                       {"diverged", tr.diverged},
                       {"rounds", tr.rounds.size()},
                       {"final_f_gap", tr.rounds.empty() ? 0.0 : tr.rounds.back().f_gap}});
    traces.push_back(std::move(tr));
  }
  if (!out_dir.empty()) {
    std::ofstream out(out_dir + "/summary.json");
    out << summary.dump(2) << "\n";
  }
  return traces;
}

nlohmann::json load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  json j;
  in >> j;
  return j;
}

}  // namespace fedlab
