#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fedlab/algorithms.hpp"
#include "fedlab/harness.hpp"
#include "fedlab/oracle.hpp"

using namespace fedlab;

TEST_CASE("scalar closed form matches the matrix surrogate: proximal variant") {
  const auto p = two_client_scalar_instance();
  for (const double beta : {0.0, 0.5, 2.0}) {
    for (double eta = 0.01; eta < 1.0 / (2.0 + beta) - 0.01; eta += 0.025) {
      const auto sol = surrogate_fedprox(p, eta, beta, 2);
      CHECK(std::abs(sol.distortion - fedprox_scalar_error(eta, beta)) < 1e-10);
    }
  }
  // The reference point: eta = 0.1, beta = 0 gives 94*0.1/(3*(6-0.5)).
  CHECK(fedprox_scalar_error(0.1, 0.0) ==
        doctest::Approx(0.5696969696969697).epsilon(1e-14));
  CHECK_THROWS(fedprox_scalar_error(0.6, 0.0));  // outside validity
}

TEST_CASE("scalar closed form matches the matrix surrogate: normalized variant") {
  const auto p = two_client_scalar_instance();
  for (double eta = 0.01; eta < 0.49; eta += 0.02) {
    const auto sol = surrogate_fednova(p, eta, {3, 2});
    CHECK(std::abs(sol.distortion - fednova_scalar_error(eta)) < 1e-10);
  }
  CHECK(fednova_scalar_error(0.1) ==
        doctest::Approx(0.03863542951089187).epsilon(1e-12));
  CHECK_THROWS(fednova_scalar_error(0.5));
}

TEST_CASE("one local step leaves no distortion") {
  const auto p = two_client_scalar_instance();
  const auto sol = surrogate_fedprox(p, 0.1, 0.0, 1);
  CHECK(sol.distortion < 1e-12);
  CHECK(sol.surrogate_minimizer[0] ==
        doctest::Approx(103.0 / 3.0).epsilon(1e-12));
  const auto nova = surrogate_fednova(p, 0.1, {1, 1});
  CHECK(nova.distortion < 1e-12);
}

TEST_CASE("identical clients leave no distortion at any H") {
  Mat A(2, 2);
  A.at(0, 0) = 3.0;
  A.at(1, 1) = 1.0;
  Quadratic q1{A, {1.0, 2.0}, 0.0};
  Quadratic q2 = q1;
  auto p = FederationProblem::from_clients(
      {Objective::make(std::move(q1)), Objective::make(std::move(q2))});
  p.x_star = quadratic_global_minimizer(p);
  for (const std::size_t H : {2, 5, 20})
    CHECK(surrogate_fedprox(p, 0.05, 0.0, H).distortion < 1e-10);
}

TEST_CASE("distortion grows with the step size on the scalar instance") {
  double prev = 0.0;
  for (double eta = 0.02; eta < 0.45; eta += 0.02) {
    const double e = fedprox_scalar_error(eta, 0.0);
    CHECK(e > prev);
    prev = e;
  }
}

TEST_CASE("baseline fixed points land on the surrogate minimizer") {
  const auto p = two_client_scalar_instance();
  const auto sched = ClientSchedule::Uniform(2);
  const auto steps = StepPolicy::uniform(0.1);

  const Vec fp = fixed_point(AlgorithmSpec::fedprox(0.0), p, sched, steps);
  const auto sol = surrogate_fedprox(p, 0.1, 0.0, 2);
  CHECK(std::abs(fp[0] - sol.surrogate_minimizer[0]) < 1e-8);

  const Vec fn = fixed_point(AlgorithmSpec::fednova(), p,
                             ClientSchedule::PerClient({3, 2}), steps);
  const auto nova = surrogate_fednova(p, 0.1, {3, 2});
  CHECK(std::abs(fn[0] - nova.surrogate_minimizer[0]) < 1e-8);

  // The tracked method and centralized GD have no distortion at all.
  const Vec fl = fixed_point(AlgorithmSpec::fedlin_uncompressed(1), p, sched,
                             StepPolicy::preset_thm3(p.L));
  CHECK(std::abs(fl[0] - 103.0 / 3.0) < 1e-8);
  const Vec gd = fixed_point(AlgorithmSpec::centralized_gd(), p,
                             ClientSchedule::Uniform(1),
                             StepPolicy::uniform(1.0 / p.L));
  CHECK(std::abs(gd[0] - 103.0 / 3.0) < 1e-8);
}

TEST_CASE("slow two-client instance: explicit round map") {
  const double L = 14.0, eta = 0.1;
  const std::size_t H = 2;
  const auto inst = lower_bound_instance(L, H, eta);
  // Diagonal map with zero off-diagonal entries.
  CHECK(inst.M.at(0, 1) == 0.0);
  CHECK(inst.M.at(1, 0) == 0.0);
  const double m11 = (std::pow(1.0 - eta, H) + std::pow(1.0 - eta * L, H) / L) *
                         (L + 1.0) / 4.0 -
                     (L - 1.0) * (L - 1.0) / (4.0 * L);
  CHECK(inst.M.at(0, 0) == doctest::Approx(m11).epsilon(1e-14));
  CHECK(inst.M.at(1, 1) == doctest::Approx(std::pow(1.0 - eta, H)).epsilon(1e-14));
  CHECK(inst.lambda2 == doctest::Approx(std::pow(1.0 - eta, H)).epsilon(1e-14));
  // Both clients share the minimizer at the origin.
  REQUIRE(inst.problem.x_star.has_value());
  CHECK((*inst.problem.x_star)[0] == 0.0);
  CHECK((*inst.problem.x_star)[1] == 0.0);
  CHECK(inst.problem.L == doctest::Approx(L));

  // Simulation follows the predicted map from x1 = (0, 1).
  RunOptions opts;
  opts.x_bar1 = Vec{0.0, 1.0};
  const auto tr = run(AlgorithmSpec::fedlin_uncompressed(2), inst.problem,
                      ClientSchedule::Uniform(H), StepPolicy::uniform(eta), 10,
                      opts);
  for (std::size_t t = 0; t < tr.rounds.size(); ++t)
    CHECK(tr.rounds[t].dist_sq ==
          doctest::Approx(std::pow(inst.lambda2, 2.0 * t)).epsilon(1e-10));
}

TEST_CASE("rate bound factors at reference points") {
  RateBound b;
  b.id = RateBound::Id::T1;
  b.kappa = 1.0;
  CHECK(rate_bound(b, 1) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  b.kappa = 10.0;
  CHECK(rate_bound(b, 60) ==
        doctest::Approx(std::pow(1.0 - 1.0 / 60.0, 60)).epsilon(1e-14));

  RateBound p3;
  p3.id = RateBound::Id::P3;
  p3.kappa = 2.0;
  p3.H = 3;
  CHECK(rate_bound(p3, 4) == doctest::Approx(std::pow(0.5, 12)).epsilon(1e-14));

  // With no compression the no-EF factor reduces to the dense one.
  RateBound t6;
  t6.id = RateBound::Id::T6;
  t6.kappa = 7.0;
  t6.delta_s = 1.0;
  RateBound t3;
  t3.id = RateBound::Id::T3;
  t3.kappa = 7.0;
  CHECK(rate_bound(t6, 5) == doctest::Approx(rate_bound(t3, 5)).epsilon(1e-14));

  RateBound t7;
  t7.id = RateBound::Id::T7;
  t7.kappa = 7.0;
  t7.delta_s = 4.0;
  CHECK(rate_bound(t7, 2) ==
        doctest::Approx(std::pow(1.0 - 1.0 / (96.0 * 4.0 * 7.0), 2)));
  CHECK(rate_bound_coefficient(t7) == 2.0);

  RateBound t8;
  t8.id = RateBound::Id::T8;
  t8.L = 10.0;
  t8.mu = 2.0;
  t8.delta_c = 2.0;
  t8.C = 2.0;
  t8.D = 3.0;
  t8.eta_bar = 1e-3;
  CHECK(rate_bound(t8, 1) == doctest::Approx(1.0 - 0.75 * 1e-3 * 2.0));
  CHECK(rate_bound_floor(t8) ==
        doctest::Approx((16.0 / 3.0) * 1e-3 * (6.0 / (2.0 * 2.0) + 2.0) * 3.0 /
                        2.0));
  CHECK(rate_bound_coefficient(t8) == 2.0);

  RateBound t4b;
  t4b.id = RateBound::Id::T4b;
  CHECK_THROWS(rate_bound(t4b, 1));  // bound depends on the trace, not T alone
}

TEST_CASE("dissimilarity estimate: zero for identical clients, positive otherwise") {
  Mat A(1, 1);
  A.at(0, 0) = 2.0;
  Quadratic q1{A, {1.0}, 0.0};
  Quadratic q2 = q1;
  auto same = FederationProblem::from_clients(
      {Objective::make(std::move(q1)), Objective::make(std::move(q2))});
  const auto [c1, d1] = estimate_dissimilarity(same, 50, 5.0, 1);
  CHECK(c1 == 2.0);
  CHECK(d1 == doctest::Approx(0.0));

  const auto p = two_client_scalar_instance();
  const auto [c2, d2] = estimate_dissimilarity(p, 50, 60.0, 1);
  CHECK(d2 > 0.0);
}
