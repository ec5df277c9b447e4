// fedlab: command-line front end for the federated optimization lab.
//
// Subcommands:
//   gen        synthesize a seeded problem instance to a JSON file
//   run        run a single algorithm and write its trace
//   compare    run every entry of a JSON experiment config
//   surrogate  closed-form baseline fixed-point distortion oracle
//   lowerbound construct the two-client slow instance and report its rates
//   verify     check a trace CSV against a convergence guarantee
//   repro      re-run a pinned recipe by figure id
//
// Exit codes: 0 success, 1 verification/assertion failure, 2 usage error.
#include <cmath>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedlab/harness.hpp"
#include "fedlab/kernels.hpp"
#include "fedlab/serialize.hpp"

namespace {

using namespace fedlab;

constexpr const char* kPresetHelp =
    "Step-size presets (eta_i per client, L = global smoothness):\n"
    "  thm1   eta = 1/(6 L H)            uniform tau = H\n"
    "  prop3  eta = 1/L                  homogeneous clients\n"
    "  thm3   eta_i = 1/(6 L tau_i)\n"
    "  thm4a  eta_i = 1/(10 L tau_i)     convex, averaged iterate\n"
    "  thm4b  eta_i = 1/(6 L tau_i)      convex, last iterate\n"
    "  thm5   eta_i = 1/(26 L tau_i)     smooth nonconvex\n"
    "  thm6   eta_i = 1/(2(2+sqrt(ds)) L tau_i)   server top-k, no EF\n"
    "  thm7   eta_i = 1/(72 L ds tau_i)           server top-k, EF\n"
    "  thm8   eta_i = eta_bar/tau_i               client top-k, EF\n"
    "Sparsity is given as retained counts --server-k/--client-k; the\n"
    "corresponding distortion is delta = d/k.";

RateBound::Id parse_theorem(const std::string& s) {
  if (s == "T1") return RateBound::Id::T1;
  if (s == "P3") return RateBound::Id::P3;
  if (s == "T3") return RateBound::Id::T3;
  if (s == "T4a") return RateBound::Id::T4a;
  if (s == "T4b") return RateBound::Id::T4b;
  if (s == "T5") return RateBound::Id::T5;
  if (s == "T6") return RateBound::Id::T6;
  if (s == "T7") return RateBound::Id::T7;
  if (s == "T8") return RateBound::Id::T8;
  throw CLI::ValidationError("--theorem", "unknown theorem id: " + s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fedlab: deterministic federated optimization laboratory"};
  app.require_subcommand(1);
  app.footer(kPresetHelp);

  // Several subcommands take a local-step count as --h, so help is --help only.
  app.set_help_flag("--help", "print help");

  std::uint64_t seed = 1;
  app.add_option("--seed", seed, "master RNG seed")->capture_default_str();
  // Let --seed appear after the subcommand name too.
  app.fallthrough();

  // ---- gen ----------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "synthesize a problem instance");
  std::string gen_type = "least_squares";
  SynthConfig synth;
  std::string gen_out = "problem.json";
  gen->add_option("--type", gen_type, "least_squares | logistic")
      ->check(CLI::IsMember({"least_squares", "logistic"}));
  gen->add_option("--m", synth.m, "number of clients")->capture_default_str();
  gen->add_option("--n-i", synth.n_i, "samples per client")->capture_default_str();
  gen->add_option("--d", synth.d, "dimension")->capture_default_str();
  gen->add_option("--alpha", synth.alpha, "client heterogeneity variance")
      ->capture_default_str();
  gen->add_option("--noise-std", synth.noise_std, "response noise std")
      ->capture_default_str();
  gen->add_option("--out", gen_out, "output path")->capture_default_str();

  // ---- run ----------------------------------------------------------------
  auto* runc = app.add_subcommand("run", "run one algorithm, write a trace");
  runc->set_help_flag("--help", "print help");
  std::string run_problem = "two-client-scalar";
  std::string run_algo = "fedlin";
  std::string run_preset;
  double run_eta = 0.0, run_eta_bar = 0.0, run_beta = 0.0;
  double run_s = 0.0, run_alpha = 0.0;
  std::size_t run_esteps = 1, run_H = 1, run_T = 100;
  std::size_t server_k = 0, client_k = 0;
  std::size_t tau_lo = 0, tau_hi = 0;
  bool no_server_ef = false;
  std::string run_out = "trace.csv";
  runc->add_option("--problem", run_problem,
                   "two-client-scalar | path to a problem JSON file")
      ->capture_default_str();
  runc->add_option("--algo", run_algo,
                   "fedlin|fedavg|fedprox|fednova|fedsplit|centralized_gd")
      ->capture_default_str();
  runc->add_option("--preset", run_preset, "step preset (see footer)");
  runc->add_option("--eta", run_eta, "uniform step size");
  runc->add_option("--eta-bar", run_eta_bar, "eta_i = eta_bar/tau_i");
  runc->add_option("--beta", run_beta, "proximal weight (fedprox)");
  runc->add_option("--s", run_s, "prox step (fedsplit)");
  runc->add_option("--alpha", run_alpha, "inner GD step (fedsplit)");
  runc->add_option("--e-steps", run_esteps, "inner GD iterations (fedsplit)");
  runc->add_option("--h", run_H, "uniform local steps per round")
      ->capture_default_str();
  runc->add_option("--tau-lo", tau_lo, "heterogeneous tau lower bound");
  runc->add_option("--tau-hi", tau_hi, "heterogeneous tau upper bound");
  runc->add_option("--rounds", run_T, "communication rounds")->capture_default_str();
  runc->add_option("--server-k", server_k, "server retained coordinates (0 = dense)");
  runc->add_option("--client-k", client_k, "client retained coordinates (0 = dense)");
  runc->add_flag("--no-server-ef", no_server_ef,
                 "sparsify the exact averaged gradient without a residual");
  runc->add_option("--out", run_out, "trace CSV path")->capture_default_str();

  // ---- compare ------------------------------------------------------------
  auto* cmp = app.add_subcommand("compare", "run a JSON experiment matrix");
  std::string cmp_config, cmp_out = "out";
  cmp->add_option("--config", cmp_config, "experiment config JSON")->required();
  cmp->add_option("--out", cmp_out, "output directory")->capture_default_str();

  // ---- surrogate ----------------------------------------------------------
  auto* sur = app.add_subcommand(
      "surrogate", "closed-form baseline fixed-point distortion");
  sur->set_help_flag("--help", "print help");
  std::string sur_problem = "two-client-scalar";
  std::string sur_algo = "fedprox";
  double sur_eta = 0.1, sur_beta = 0.0;
  std::size_t sur_H = 2;
  std::vector<std::size_t> sur_taus = {3, 2};
  sur->add_option("--problem", sur_problem, "two-client-scalar")
      ->check(CLI::IsMember({"two-client-scalar"}));
  sur->add_option("--algo", sur_algo, "fedprox | fednova")
      ->check(CLI::IsMember({"fedprox", "fednova"}));
  sur->add_option("--eta", sur_eta, "local step size")->capture_default_str();
  sur->add_option("--beta", sur_beta, "proximal weight")->capture_default_str();
  sur->add_option("--h", sur_H, "local steps per round")->capture_default_str();
  sur->add_option("--taus", sur_taus, "per-client local steps (fednova)")
      ->capture_default_str();

  // ---- lowerbound ---------------------------------------------------------
  auto* lb = app.add_subcommand(
      "lowerbound", "two-client instance with an explicit per-round map");
  lb->set_help_flag("--help", "print help");
  double lb_L = 14.0, lb_eta = 0.1;
  std::size_t lb_H = 2, lb_T = 10;
  lb->add_option("--l", lb_L, "smoothness of the stiff client")
      ->capture_default_str();
  lb->add_option("--h", lb_H, "local steps per round")->capture_default_str();
  lb->add_option("--eta", lb_eta, "step size (must be < 1/H)")
      ->capture_default_str();
  lb->add_option("--rounds", lb_T, "rounds to simulate")->capture_default_str();

  // ---- verify -------------------------------------------------------------
  auto* ver = app.add_subcommand("verify", "check a trace against a guarantee");
  ver->set_help_flag("--help", "print help");
  std::string ver_trace, ver_theorem = "T1", ver_preset;
  RateBound vb{};
  ver->add_option("--trace", ver_trace, "trace CSV path")->required();
  ver->add_option("--theorem", ver_theorem, "T1|P3|T3|T4a|T4b|T5|T6|T7|T8")
      ->capture_default_str();
  ver->add_option("--preset", ver_preset,
                  "preset the trace was produced with (refused on mismatch)");
  ver->add_option("--kappa", vb.kappa, "condition number");
  ver->add_option("--l", vb.L, "smoothness constant");
  ver->add_option("--mu", vb.mu, "strong convexity constant");
  ver->add_option("--delta-s", vb.delta_s, "server distortion d/k");
  ver->add_option("--delta-c", vb.delta_c, "client distortion d/k");
  ver->add_option("--c-dissim", vb.C, "dissimilarity slope")->capture_default_str();
  ver->add_option("--d-dissim", vb.D, "dissimilarity offset");
  ver->add_option("--eta-bar", vb.eta_bar, "eta_bar of the run");
  ver->add_option("--h", vb.H, "local steps per round");

  // ---- repro --------------------------------------------------------------
  auto* rep = app.add_subcommand("repro", "re-run a pinned recipe");
  std::string rep_id, rep_out = "out", rep_dir = "recipes";
  rep->add_option("figure-id", rep_id,
                  "fig1-left|fig1-right|fig2|fig3|appendix-h-server|"
                  "appendix-h-client|fedsplit-appendix-g")
      ->required();
  rep->add_option("--out", rep_out, "output directory")->capture_default_str();
  rep->add_option("--recipes", rep_dir, "recipe directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  std::cout.precision(15);
  try {
    if (*gen) {
      synth.seed = seed;
      const FederationProblem p = gen_type == "least_squares"
                                      ? synth_least_squares(synth)
                                      : synth_logistic(synth);
      save_problem(p, gen_out);
      std::cout << "wrote " << gen_out << " (m=" << p.m() << ", d=" << p.dim()
                << ", L=" << p.L << ", mu=" << p.mu
                << ", kernels=" << kern::active_variant() << ")\n";
      return 0;
    }

    if (*runc) {
      nlohmann::json problem_cfg =
          run_problem == "two-client-scalar"
              ? nlohmann::json{{"type", "two_client_scalar"}}
              : nlohmann::json{{"type", "file"}, {"path", run_problem}};

      nlohmann::json schedule =
          tau_hi > 0 ? nlohmann::json{{"type", "seeded_uniform"},
                                      {"lo", tau_lo},
                                      {"hi", tau_hi},
                                      {"seed", seed}}
                     : nlohmann::json{{"type", "uniform"}, {"H", run_H}};

      nlohmann::json steps;
      if (!run_preset.empty()) {
        steps["preset"] = run_preset;
        if (run_preset == "thm8") steps["eta_bar"] = run_eta_bar;
      } else if (run_eta_bar > 0.0) {
        steps = {{"type", "inverse_tau"}, {"eta_bar", run_eta_bar}};
      } else {
        steps = {{"type", "uniform"}, {"eta", run_eta}};
      }

      const std::filesystem::path out_path(run_out);
      nlohmann::json entry{{"algorithm", run_algo},
                           {"T", run_T},
                           {"schedule", schedule},
                           {"steps", steps},
                           {"label", out_path.stem().string()}};
      if (run_algo == "fedlin") {
        if (server_k > 0) entry["server_k"] = server_k;
        if (client_k > 0) entry["client_k"] = client_k;
        entry["server_error_feedback"] = !no_server_ef;
      }
      if (run_algo == "fedprox") entry["beta"] = run_beta;
      if (run_algo == "fedsplit") {
        entry["s"] = run_s;
        entry["alpha"] = run_alpha;
        entry["e_steps"] = run_esteps;
      }
      nlohmann::json cfg{{"problem", problem_cfg},
                         {"entries", nlohmann::json::array({entry})}};
      const std::string dir = out_path.has_parent_path()
                                  ? out_path.parent_path().string()
                                  : std::string(".");
      const auto traces = run_experiment(cfg, dir);
      const Trace& tr = traces.at(0);
      std::cout << tr.algorithm << ": rounds=" << tr.rounds.size()
                << " diverged=" << (tr.diverged ? "true" : "false")
                << " final_f_gap=" << tr.rounds.back().f_gap << "\n";
      return tr.diverged && run_algo != "fedsplit" ? 1 : 0;
    }

    if (*cmp) {
      const auto cfg = load_experiment_config(cmp_config);
      const auto traces = run_experiment(cfg, cmp_out);
      bool any_diverged = false;
      for (const auto& tr : traces) {
        std::cout << tr.algorithm << ": rounds=" << tr.rounds.size()
                  << " diverged=" << (tr.diverged ? "true" : "false")
                  << " final_f_gap=" << tr.rounds.back().f_gap << "\n";
        any_diverged = any_diverged || tr.diverged;
      }
      std::cout << "wrote " << traces.size() << " traces to " << cmp_out << "\n";
      (void)any_diverged;  // divergence is recorded, not fatal
      return 0;
    }

    if (*sur) {
      const FederationProblem p = two_client_scalar_instance();
      if (sur_algo == "fedprox") {
        const auto sol = surrogate_fedprox(p, sur_eta, sur_beta, sur_H);
        std::cout << "distortion=" << sol.distortion
                  << " surrogate_minimizer=" << sol.surrogate_minimizer[0]
                  << " closed_form=" << fedprox_scalar_error(sur_eta, sur_beta)
                  << "\n";
      } else {
        const auto sol = surrogate_fednova(p, sur_eta, sur_taus);
        std::cout << "distortion=" << sol.distortion
                  << " surrogate_minimizer=" << sol.surrogate_minimizer[0];
        if (sur_taus == std::vector<std::size_t>{3, 2})
          std::cout << " closed_form=" << fednova_scalar_error(sur_eta);
        std::cout << "\n";
      }
      return 0;
    }

    if (*lb) {
      const auto inst = lower_bound_instance(lb_L, lb_H, lb_eta);
      std::cout << "lambda1=" << inst.lambda1 << " lambda2=" << inst.lambda2
                << "\n";
      RunOptions opts;
      opts.x_bar1 = Vec{0.0, 1.0};
      const Trace tr =
          run(AlgorithmSpec::fedlin_uncompressed(2), inst.problem,
              ClientSchedule::Uniform(lb_H), StepPolicy::uniform(lb_eta), lb_T,
              opts);
      bool ok = true;
      for (std::size_t t = 0; t < tr.rounds.size(); ++t) {
        const double predicted = std::pow(inst.lambda2, 2.0 * t);
        std::cout << "t=" << t + 1 << " dist_sq=" << tr.rounds[t].dist_sq
                  << " predicted=" << predicted << "\n";
        ok = ok && std::abs(tr.rounds[t].dist_sq - predicted) <=
                       1e-9 * (1.0 + predicted);
      }
      std::cout << (ok ? "round map confirmed" : "round map MISMATCH") << "\n";
      return ok ? 0 : 1;
    }

    if (*ver) {
      const Trace tr = read_trace_csv(ver_trace);
      vb.id = parse_theorem(ver_theorem);
      const BoundReport rep_out_b = verify_bound(tr, vb, nullptr, ver_preset);
      if (rep_out_b.refused) {
        std::cout << "refused: " << rep_out_b.detail << "\n";
        return 1;
      }
      std::cout << (rep_out_b.verdict ? "pass" : "FAIL") << ": "
                << rep_out_b.rounds_failed << "/" << rep_out_b.rounds_checked
                << " rounds violated";
      if (rep_out_b.rounds_failed > 0)
        std::cout << " (worst relative violation " << rep_out_b.max_rel_violation
                  << ")";
      std::cout << "\n";
      return rep_out_b.verdict ? 0 : 1;
    }

    if (*rep) {
      const std::string path = rep_dir + "/" + rep_id + ".json";
      const auto cfg = load_experiment_config(path);
      const auto traces = run_experiment(cfg, rep_out);
      for (const auto& tr : traces)
        std::cout << tr.algorithm << ": rounds=" << tr.rounds.size()
                  << " diverged=" << (tr.diverged ? "true" : "false")
                  << " final_f_gap=" << tr.rounds.back().f_gap << "\n";
      std::cout << "wrote " << traces.size() << " traces to " << rep_out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
