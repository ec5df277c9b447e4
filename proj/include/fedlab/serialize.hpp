// Problem and trace persistence: JSON problems (lossless double round-trip),
// CSV traces with a JSON sidecar.
#pragma once

#include <string>

#include <json.hpp>

#include "fedlab/algorithms.hpp"
#include "fedlab/objectives.hpp"

namespace fedlab {

nlohmann::json problem_to_json(const FederationProblem& p);
FederationProblem problem_from_json(const nlohmann::json& j);

void save_problem(const FederationProblem& p, const std::string& path);
FederationProblem load_problem(const std::string& path);

// CSV header: round,f_gap,dist_sq,grad_norm_sq,grad_evals,bytes_up,bytes_down
void write_trace_csv(const Trace& t, const std::string& path);
Trace read_trace_csv(const std::string& path);

// Sidecar: config echo and flags (diverged, reference-minimum provenance).
void write_trace_sidecar(const Trace& t, const nlohmann::json& config_echo,
                         const std::string& path);

}  // namespace fedlab
