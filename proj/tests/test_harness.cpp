#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedlab/harness.hpp"
#include "fedlab/serialize.hpp"

using namespace fedlab;
namespace fs = std::filesystem;

namespace {

FederationProblem quad_problem(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.m = 5;
  cfg.n_i = 40;
  cfg.d = 8;
  cfg.alpha = 4.0;
  cfg.seed = seed;
  return synth_least_squares(cfg);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json basic_config(std::uint64_t seed) {
  return nlohmann::json{
      {"problem",
       {{"type", "synth_least_squares"},
        {"m", 5},
        {"n_i", 40},
        {"d", 8},
        {"alpha", 4.0},
        {"seed", seed}}},
      {"entries",
       nlohmann::json::array(
           {{{"algorithm", "fedlin"},
             {"label", "tracked"},
             {"T", 30},
             {"schedule", {{"type", "uniform"}, {"H", 10}}},
             {"steps", {{"preset", "thm1"}}}},
            {{"algorithm", "fedavg"},
             {"label", "local_avg"},
             {"T", 30},
             {"schedule", {{"type", "uniform"}, {"H", 10}}},
             {"steps", {{"type", "uniform"}, {"eta", 1e-3}}}}})}};
}

}  // namespace

TEST_CASE("tracked-method trace passes its contraction bound; refusal on mismatch") {
  const auto p = quad_problem(11);
  const auto sched = ClientSchedule::Uniform(10);
  const auto tr = run(AlgorithmSpec::fedlin_uncompressed(p.dim()), p, sched,
                      StepPolicy::preset_thm1(p.L, 10), 100);
  RateBound b;
  b.id = RateBound::Id::T1;
  b.kappa = p.kappa();
  const auto rep = verify_bound(tr, b, &p, "thm1");
  CHECK_FALSE(rep.refused);
  CHECK(rep.verdict);
  CHECK(rep.rounds_checked == 100);
  CHECK(rep.rounds_failed == 0);

  const auto mismatched = verify_bound(tr, b, &p, "thm3");
  CHECK(mismatched.refused);
  CHECK_FALSE(mismatched.verdict);
}

TEST_CASE("plain local averaging fails the contraction bound (negative control)") {
  const auto p = two_client_scalar_instance();
  const auto tr = run(AlgorithmSpec::fedavg(), p, ClientSchedule::Uniform(2),
                      StepPolicy::uniform(1e-2), 150);
  RateBound b;
  b.id = RateBound::Id::T1;
  b.kappa = p.kappa();
  const auto rep = verify_bound(tr, b, &p, "");
  CHECK_FALSE(rep.refused);
  CHECK_FALSE(rep.verdict);
  CHECK(rep.rounds_failed > 0);
  CHECK(rep.max_rel_violation > 1.0);
}

TEST_CASE("fixed point refuses the non-restartable baseline") {
  const auto p = two_client_scalar_instance();
  CHECK_THROWS(fixed_point(AlgorithmSpec::fedsplit(0.03, 1e-3, 2), p,
                           ClientSchedule::Uniform(1), StepPolicy::uniform(0.1),
                           10));
}

TEST_CASE("problem builder covers every type tag") {
  CHECK(build_problem({{"type", "two_client_scalar"}}).m() == 2);
  CHECK(build_problem({{"type", "synth_least_squares"},
                       {"m", 3},
                       {"n_i", 20},
                       {"d", 4},
                       {"seed", 5}})
            .m() == 3);
  CHECK(build_problem({{"type", "synth_logistic"},
                       {"m", 2},
                       {"n_i", 20},
                       {"d", 4},
                       {"seed", 5}})
            .m() == 2);
  CHECK(build_problem({{"type", "lower_bound"}, {"L", 14.0}}).dim() == 2);
  const auto fsd = build_problem({{"type", "fedsplit_divergence"}});
  CHECK(fsd.L == doctest::Approx(1000.0));
  CHECK(fsd.mu == doctest::Approx(1.0));
  CHECK_THROWS(build_problem({{"type", "nope"}}));
}

TEST_CASE("experiment runner writes traces, sidecars, and a summary") {
  const auto dir = fs::temp_directory_path() / "fedlab_exp";
  fs::remove_all(dir);
  const auto traces = run_experiment(basic_config(21), dir.string());
  REQUIRE(traces.size() == 2);
  CHECK(fs::exists(dir / "tracked.csv"));
  CHECK(fs::exists(dir / "tracked.json"));
  CHECK(fs::exists(dir / "local_avg.csv"));
  CHECK(fs::exists(dir / "summary.json"));

  // The CSV round-trips through the reader.
  const auto rt = read_trace_csv((dir / "tracked.csv").string());
  REQUIRE(rt.rounds.size() == traces[0].rounds.size());
  for (std::size_t t = 0; t < rt.rounds.size(); ++t) {
    CHECK(rt.rounds[t].f_gap == traces[0].rounds[t].f_gap);
    CHECK(rt.rounds[t].grad_evals == traces[0].rounds[t].grad_evals);
  }

  // Sidecar echoes the entry config.
  nlohmann::json side;
  std::ifstream(dir / "tracked.json") >> side;
  CHECK(side.at("algorithm") == "fedlin");
  CHECK(side.at("config").at("steps").at("preset") == "thm1");
  fs::remove_all(dir);
}

TEST_CASE("identical configs produce byte-identical outputs") {
  const auto d1 = fs::temp_directory_path() / "fedlab_det1";
  const auto d2 = fs::temp_directory_path() / "fedlab_det2";
  fs::remove_all(d1);
  fs::remove_all(d2);
  run_experiment(basic_config(33), d1.string());
  run_experiment(basic_config(33), d2.string());
  for (const char* f : {"tracked.csv", "local_avg.csv", "summary.json"})
    CHECK(slurp(d1 / f) == slurp(d2 / f));
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("divergence-prone instance has the stated conditioning") {
  const auto p = fedsplit_divergence_instance();
  CHECK(p.m() == 2);
  CHECK(p.kappa() == doctest::Approx(1000.0));
  REQUIRE(p.x_star.has_value());
  Vec g;
  global_gradient(p, *p.x_star, g);
  for (double v : g) CHECK(std::abs(v) < 1e-10);
}
