// Round-based execution engine: the tracked local-update method (with its
// sparsification variants) and the baselines it is compared against.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedlab/compression.hpp"
#include "fedlab/objectives.hpp"

namespace fedlab {

class ClientSchedule {
 public:
  static ClientSchedule Uniform(std::size_t H);
  static ClientSchedule PerClient(std::vector<std::size_t> taus);
  // Draws one tau per client from [lo, hi], fixed across rounds.
  static ClientSchedule SeededUniformRange(std::size_t lo, std::size_t hi,
                                           std::uint64_t seed, std::size_t m);

  std::size_t tau(std::size_t client, std::size_t round) const;
  bool uniform() const { return uniform_h_.has_value(); }
  std::size_t uniform_h() const;

 private:
  std::optional<std::size_t> uniform_h_;
  std::vector<std::size_t> taus_;
};

struct StepPolicy {
  enum class Kind { Uniform, InverseTau, PerClient };
  Kind kind = Kind::Uniform;
  double eta = 0.0;       // Uniform: step; InverseTau: eta_bar
  std::vector<double> etas;  // PerClient

  double step_for(std::size_t client, std::size_t tau) const;

  // Presets keyed by the rate guarantees they satisfy.
  static StepPolicy uniform(double eta);
  static StepPolicy inverse_tau(double eta_bar);
  static StepPolicy preset_thm1(double L, std::size_t H);  // 1/(6LH)
  static StepPolicy preset_prop3(double L);                // 1/L
  static StepPolicy preset_thm3(double L);                 // eta_i = 1/(6 L tau_i)
  static StepPolicy preset_thm4a(double L);                // 1/(10 L tau_i)
  static StepPolicy preset_thm4b(double L);                // 1/(6 L tau_i)
  static StepPolicy preset_thm5(double L);                 // 1/(26 L tau_i)
  static StepPolicy preset_thm6(double L, double delta_s); // 1/(2(2+sqrt(ds)) L tau_i)
  static StepPolicy preset_thm7(double L, double delta_s); // 1/(72 L ds tau_i)
  static StepPolicy preset_thm8(double eta_bar);           // eta_bar/tau_i
};

struct CompressionPlan {
  SparsityLevel server{0};
  SparsityLevel client{0};
  // false selects the variant that sparsifies the exact averaged gradient and
  // keeps no server residual; it requires an uncompressed client side.
  bool server_error_feedback = true;

  static CompressionPlan none(std::size_t d);
  void validate(std::size_t d) const;
};

struct AlgorithmSpec {
  enum class Kind { FedLin, FedAvg, FedProx, FedNova, FedSplit, CentralizedGD };
  Kind kind = Kind::FedLin;
  CompressionPlan plan;     // FedLin
  double beta = 0.0;        // FedProx
  double s = 0.0;           // FedSplit prox step
  double alpha = 0.0;       // FedSplit inner GD step
  std::size_t e_steps = 1;  // FedSplit inner GD iterations

  static AlgorithmSpec fedlin(CompressionPlan plan);
  static AlgorithmSpec fedlin_uncompressed(std::size_t d);
  static AlgorithmSpec fedavg();
  static AlgorithmSpec fedprox(double beta);
  static AlgorithmSpec fednova();
  static AlgorithmSpec fedsplit(double s, double alpha, std::size_t e_steps);
  static AlgorithmSpec centralized_gd();
  std::string name() const;
};

struct RoundMetrics {
  std::size_t round = 0;
  double f_gap = 0.0;
  double dist_sq = 0.0;  // NaN when x* is unknown
  double grad_norm_sq = 0.0;
  std::uint64_t grad_evals = 0;  // cumulative
  std::uint64_t bytes_up = 0;    // cumulative
  std::uint64_t bytes_down = 0;  // cumulative
};

struct Trace {
  std::string algorithm;
  bool diverged = false;
  bool reference_minimum = false;  // f_gap measured against a GD reference
  double f_reference = 0.0;        // f(x*) or the reference minimum
  std::vector<RoundMetrics> rounds;  // t = 1 .. T+1 unless truncated
  Vec final_x;
  // (1/T) sum_{t=1..T} x_bar_t over the recorded rounds (the final row is
  // excluded); used by the averaged-iterate rate check.
  Vec iterate_avg;
};

// State for the tracked method, exposed so single rounds can be driven
// directly in tests.
struct FedLinState {
  Vec x_bar;
  Vec g;
  std::vector<Vec> grads_at_xbar;  // per-client gradient at x_bar
  std::vector<ErrorAccumulator> client_residuals;
  ErrorAccumulator server_residual;
  std::size_t round = 1;
  std::uint64_t grad_evals = 0;
  std::uint64_t bytes_up = 0;
  std::uint64_t bytes_down = 0;

  static FedLinState init(const FederationProblem& p, Vec x_bar1);
};

// One local step: x - eta * (grad_i(x) - grad_i(x_bar) + g). Exactly one
// gradient evaluation.
Vec fedlin_local_update(const Vec& x, const Vec& grad_at_xbar_i, const Vec& g,
                        double eta_i, const Objective& obj);

// One full round of the tracked method (local steps, aggregation, payload
// compression, broadcast update).
void fedlin_round(FedLinState& state, const FederationProblem& problem,
                  const ClientSchedule& schedule, const StepPolicy& steps,
                  const CompressionPlan& plan);

struct RunOptions {
  std::optional<Vec> x_bar1;      // defaults to the zero vector
  double divergence_threshold = 1e12;
  // Early stop when dist_sq falls at or below this value (0 disables).
  double stop_dist_sq = 0.0;
};

Trace run(const AlgorithmSpec& spec, const FederationProblem& problem,
          const ClientSchedule& schedule, const StepPolicy& steps,
          std::size_t T, const RunOptions& opts = {});

}  // namespace fedlab
