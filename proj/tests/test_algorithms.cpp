#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fedlab/algorithms.hpp"
#include "fedlab/rng.hpp"

using namespace fedlab;

namespace {

FederationProblem small_synth(std::uint64_t seed, std::size_t m = 4,
                              std::size_t d = 6) {
  SynthConfig cfg;
  cfg.m = m;
  cfg.n_i = 30;
  cfg.d = d;
  cfg.alpha = 5.0;
  cfg.seed = seed;
  return synth_least_squares(cfg);
}

FederationProblem identical_clients(std::size_t m) {
  SynthConfig cfg;
  cfg.m = 1;
  cfg.n_i = 40;
  cfg.d = 5;
  cfg.seed = 3;
  const auto base = synth_least_squares(cfg);
  std::vector<Objective> clients(m, base.clients[0]);
  auto p = FederationProblem::from_clients(std::move(clients));
  p.x_star = base.x_star;
  return p;
}

double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace

TEST_CASE("schedules: uniform, per-client, seeded heterogeneous") {
  const auto u = ClientSchedule::Uniform(7);
  CHECK(u.uniform());
  CHECK(u.uniform_h() == 7);
  CHECK(u.tau(3, 12) == 7);

  const auto pc = ClientSchedule::PerClient({2, 9, 4});
  CHECK_FALSE(pc.uniform());
  CHECK(pc.tau(1, 1) == 9);
  CHECK(pc.tau(1, 50) == 9);  // fixed across rounds

  const auto s1 = ClientSchedule::SeededUniformRange(2, 100, 77, 20);
  const auto s2 = ClientSchedule::SeededUniformRange(2, 100, 77, 20);
  bool all_same_value = true;
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(s1.tau(i, 1) == s2.tau(i, 1));
    CHECK(s1.tau(i, 1) >= 2);
    CHECK(s1.tau(i, 1) <= 100);
    all_same_value = all_same_value && s1.tau(i, 1) == s1.tau(0, 1);
  }
  CHECK_FALSE(all_same_value);
}

TEST_CASE("step presets implement their formulas") {
  const double L = 4.0;
  CHECK(StepPolicy::preset_thm1(L, 10).step_for(0, 10) ==
        doctest::Approx(1.0 / (6.0 * L * 10.0)));
  CHECK(StepPolicy::preset_prop3(L).step_for(0, 20) == doctest::Approx(1.0 / L));
  CHECK(StepPolicy::preset_thm3(L).step_for(2, 17) ==
        doctest::Approx(1.0 / (6.0 * L * 17.0)));
  CHECK(StepPolicy::preset_thm4a(L).step_for(0, 9) ==
        doctest::Approx(1.0 / (10.0 * L * 9.0)));
  CHECK(StepPolicy::preset_thm5(L).step_for(0, 3) ==
        doctest::Approx(1.0 / (26.0 * L * 3.0)));
  const double ds = 4.0;
  CHECK(StepPolicy::preset_thm6(L, ds).step_for(0, 5) ==
        doctest::Approx(1.0 / (2.0 * (2.0 + std::sqrt(ds)) * L * 5.0)));
  CHECK(StepPolicy::preset_thm7(L, ds).step_for(0, 5) ==
        doctest::Approx(1.0 / (72.0 * L * ds * 5.0)));
  CHECK(StepPolicy::preset_thm8(0.01).step_for(0, 4) ==
        doctest::Approx(0.01 / 4.0));
}

TEST_CASE("one local step per round reduces to centralized gradient descent") {
  const auto p = small_synth(41);
  const auto sched = ClientSchedule::Uniform(1);
  const auto steps = StepPolicy::uniform(0.5 / p.L);
  const auto t1 = run(AlgorithmSpec::fedlin_uncompressed(p.dim()), p, sched,
                      steps, 30);
  const auto t2 = run(AlgorithmSpec::fedavg(), p, sched, steps, 30);
  const auto t3 = run(AlgorithmSpec::centralized_gd(), p, sched, steps, 30);
  REQUIRE(t1.rounds.size() == 31);
  for (std::size_t t = 0; t < 31; ++t) {
    CHECK(rel_diff(t1.rounds[t].f_gap, t3.rounds[t].f_gap) < 1e-10);
    CHECK(rel_diff(t2.rounds[t].f_gap, t3.rounds[t].f_gap) < 1e-10);
  }
}

TEST_CASE("homogeneous clients: tracked method equals centralized GD with TH steps") {
  const auto p = identical_clients(6);
  const std::size_t H = 20;
  const auto steps = StepPolicy::preset_prop3(p.L);
  const auto tracked = run(AlgorithmSpec::fedlin_uncompressed(p.dim()), p,
                           ClientSchedule::Uniform(H), steps, 15);
  const auto central = run(AlgorithmSpec::centralized_gd(), p,
                           ClientSchedule::Uniform(H), steps, 15);
  REQUIRE(tracked.rounds.size() == central.rounds.size());
  // The f-gap is computed as f(x) - f(x*), so its measurement noise floor is
  // the rounding error of evaluating f itself.
  const double floor = 1e-14 * (1.0 + std::abs(tracked.f_reference));
  for (std::size_t t = 0; t < tracked.rounds.size(); ++t) {
    const double a = tracked.rounds[t].f_gap, b = central.rounds[t].f_gap;
    CHECK(std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b)) + floor);
  }
}

TEST_CASE("zero proximal weight is exactly plain local averaging") {
  const auto spec = AlgorithmSpec::fedprox(0.0);
  CHECK(spec.kind == AlgorithmSpec::Kind::FedAvg);
  const auto p = small_synth(42);
  const auto sched = ClientSchedule::Uniform(5);
  const auto steps = StepPolicy::uniform(0.05 / p.L);
  const auto t1 = run(spec, p, sched, steps, 20);
  const auto t2 = run(AlgorithmSpec::fedavg(), p, sched, steps, 20);
  for (std::size_t t = 0; t < t1.rounds.size(); ++t) {
    CHECK(t1.rounds[t].f_gap == t2.rounds[t].f_gap);
    CHECK(t1.rounds[t].dist_sq == t2.rounds[t].dist_sq);
  }
}

TEST_CASE("normalized aggregation with uniform local steps matches plain averaging") {
  const auto p = small_synth(43);
  const auto sched = ClientSchedule::Uniform(6);
  const auto steps = StepPolicy::uniform(0.05 / p.L);
  const auto nova = run(AlgorithmSpec::fednova(), p, sched, steps, 25);
  const auto avg = run(AlgorithmSpec::fedavg(), p, sched, steps, 25);
  for (std::size_t t = 0; t < nova.rounds.size(); ++t)
    CHECK(rel_diff(nova.rounds[t].f_gap, avg.rounds[t].f_gap) < 1e-9);
}

TEST_CASE("gradient evaluations are sum of local steps plus broadcast refresh") {
  const auto p = small_synth(44);
  const auto sched = ClientSchedule::PerClient({3, 8, 2, 5});
  const auto steps = StepPolicy::preset_thm3(p.L);
  const auto tr = run(AlgorithmSpec::fedlin_uncompressed(p.dim()), p, sched,
                      steps, 4);
  const std::uint64_t per_round = (3 + 8 + 2 + 5) + 4;
  REQUIRE(tr.rounds.size() == 5);
  CHECK(tr.rounds[0].grad_evals == 4);  // initial tracking vector
  for (std::size_t t = 1; t < tr.rounds.size(); ++t)
    CHECK(tr.rounds[t].grad_evals == 4 + t * per_round);
}

TEST_CASE("communication accounting distinguishes sparsified payloads") {
  const auto p = small_synth(45);
  const std::size_t d = p.dim(), m = p.m();
  CompressionPlan plan = CompressionPlan::none(d);
  plan.server.k = 2;
  const auto tr = run(AlgorithmSpec::fedlin(plan), p, ClientSchedule::Uniform(3),
                      StepPolicy::preset_thm6(p.L, plan.server.delta(d)), 3);
  // Up: dense iterate + dense client gradient; down: dense iterate + sparse g.
  const std::uint64_t up_per_round = m * (8 * d + 8 * d);
  const std::uint64_t down_per_round = m * (8 * d + 12 * 2);
  CHECK(tr.rounds[3].bytes_up == 3 * up_per_round);
  CHECK(tr.rounds[3].bytes_down == 3 * down_per_round);
}

TEST_CASE("tracked method contracts on a strongly convex heterogeneous problem") {
  const auto p = small_synth(46);
  const auto tr = run(AlgorithmSpec::fedlin_uncompressed(p.dim()), p,
                      ClientSchedule::SeededUniformRange(2, 40, 5, p.m()),
                      StepPolicy::preset_thm3(p.L), 300);
  REQUIRE_FALSE(tr.diverged);
  CHECK(tr.rounds.back().f_gap < 1e-8 * tr.rounds.front().f_gap);
}

TEST_CASE("identical compression plans: dense EF, dense no-EF, and none agree") {
  const auto p = small_synth(47);
  const std::size_t d = p.dim();
  CompressionPlan ef = CompressionPlan::none(d);
  CompressionPlan noef = CompressionPlan::none(d);
  noef.server_error_feedback = false;
  const auto sched = ClientSchedule::Uniform(4);
  const auto steps = StepPolicy::preset_thm3(p.L);
  const auto t0 = run(AlgorithmSpec::fedlin_uncompressed(d), p, sched, steps, 20);
  const auto t1 = run(AlgorithmSpec::fedlin(ef), p, sched, steps, 20);
  const auto t2 = run(AlgorithmSpec::fedlin(noef), p, sched, steps, 20);
  for (std::size_t t = 0; t < t0.rounds.size(); ++t) {
    CHECK(t0.rounds[t].f_gap == t1.rounds[t].f_gap);
    CHECK(t0.rounds[t].f_gap == t2.rounds[t].f_gap);
  }
}

TEST_CASE("no-EF plan requires an uncompressed client side") {
  CompressionPlan plan = CompressionPlan::none(10);
  plan.server_error_feedback = false;
  plan.client.k = 5;
  CHECK_THROWS(plan.validate(10));
  plan.client.k = 10;
  CHECK_NOTHROW(plan.validate(10));
}

TEST_CASE("runs are deterministic and honor early stopping") {
  const auto p = small_synth(48);
  const auto sched = ClientSchedule::Uniform(8);
  const auto steps = StepPolicy::preset_thm3(p.L);
  const auto spec = AlgorithmSpec::fedlin_uncompressed(p.dim());
  const auto t1 = run(spec, p, sched, steps, 40);
  const auto t2 = run(spec, p, sched, steps, 40);
  REQUIRE(t1.rounds.size() == t2.rounds.size());
  for (std::size_t t = 0; t < t1.rounds.size(); ++t) {
    CHECK(t1.rounds[t].f_gap == t2.rounds[t].f_gap);
    CHECK(t1.rounds[t].dist_sq == t2.rounds[t].dist_sq);
  }

  RunOptions opts;
  opts.stop_dist_sq = t1.rounds[10].dist_sq;
  const auto t3 = run(spec, p, sched, steps, 40, opts);
  CHECK(t3.rounds.size() <= 11);
  CHECK(t3.rounds.back().dist_sq <= opts.stop_dist_sq);
}

TEST_CASE("averaged iterate excludes the final round") {
  const auto p = small_synth(49);
  const auto tr = run(AlgorithmSpec::fedlin_uncompressed(p.dim()), p,
                      ClientSchedule::Uniform(2), StepPolicy::preset_thm3(p.L),
                      5);
  REQUIRE(tr.iterate_avg.size() == p.dim());
  // Recompute from a fresh identical run's recorded distances is not possible
  // from metrics alone; instead verify against a manual re-run.
  FedLinState st = FedLinState::init(p, Vec(p.dim(), 0.0));
  Vec sum(p.dim(), 0.0);
  const auto sched = ClientSchedule::Uniform(2);
  const auto steps = StepPolicy::preset_thm3(p.L);
  for (int t = 0; t < 5; ++t) {
    for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += st.x_bar[j];
    fedlin_round(st, p, sched, steps, CompressionPlan::none(p.dim()));
  }
  for (std::size_t j = 0; j < sum.size(); ++j)
    CHECK(tr.iterate_avg[j] == doctest::Approx(sum[j] / 5.0).epsilon(1e-12));
}

TEST_CASE("divergence is flagged, not fatal") {
  const auto p = small_synth(50);
  // A grossly excessive step size makes plain local averaging blow up.
  const auto tr = run(AlgorithmSpec::fedavg(), p, ClientSchedule::Uniform(10),
                      StepPolicy::uniform(10.0 / p.L), 200);
  CHECK(tr.diverged);
  CHECK(tr.rounds.size() < 201);
}
