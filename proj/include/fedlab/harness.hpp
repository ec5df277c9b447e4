// Experiment orchestration: JSON-configured run matrices, trace persistence,
// rate-bound verification, and fixed-point extraction.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedlab/algorithms.hpp"
#include "fedlab/oracle.hpp"

namespace fedlab {

struct BoundReport {
  RateBound::Id theorem;
  bool refused = false;      // preset mismatch: no meaningful comparison
  bool verdict = false;      // pass iff every checked round passes
  std::size_t rounds_checked = 0;
  std::size_t rounds_failed = 0;
  double max_rel_violation = 0.0;  // (measured - bound)/bound, worst round
  std::string detail;
};

// Name of the step preset a bound requires ("thm1", "thm3", ...).
std::string required_preset(RateBound::Id id);

// Checks a trace against a theorem bound with 1e-9 relative slack. The f-gap
// metric is used for the linear-rate results, distance-squared with an
// additive floor for the client-compression result, averaged-iterate and
// last-iterate forms for the convex rates (these need the problem to evaluate
// f at the averaged iterate), and min gradient-norm for the nonconvex rate.
// When preset_label is nonempty it must match required_preset or the report is
// refused.
BoundReport verify_bound(const Trace& trace, const RateBound& bound,
                         const FederationProblem* problem = nullptr,
                         const std::string& preset_label = "",
                         double rel_tol = 1e-9);

// Iterates until ||x_{t+1} - x_t|| <= 1e-12 (1 + ||x_t||) or throws after
// t_max rounds. Supports the restartable algorithms (uncompressed tracked
// method and all baselines except the operator-splitting one).
Vec fixed_point(const AlgorithmSpec& spec, const FederationProblem& problem,
                const ClientSchedule& schedule, const StepPolicy& steps,
                std::size_t t_max = 200000);

// The two-client instance (condition number 1000) on which the inexact-prox
// operator-splitting baseline diverges for small odd inner-step counts.
FederationProblem fedsplit_divergence_instance(double L = 1000.0,
                                               double mu = 1.0);

// Runs every entry of a JSON experiment config; writes one CSV trace plus a
// JSON sidecar per entry into out_dir (empty out_dir skips persistence).
// Returns the traces in entry order.
std::vector<Trace> run_experiment(const nlohmann::json& cfg,
                                  const std::string& out_dir);

// Loads a recipe file (JSON experiment config) by path.
nlohmann::json load_experiment_config(const std::string& path);

// Builds the problem described by cfg["problem"].
FederationProblem build_problem(const nlohmann::json& problem_cfg);

}  // namespace fedlab
