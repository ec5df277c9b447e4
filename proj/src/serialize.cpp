#include "fedlab/serialize.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace fedlab {

using nlohmann::json;

namespace {

json mat_to_json(const Mat& m) {
  return json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

Mat mat_from_json(const json& j) {
  Mat m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  m.data = j.at("data").get<std::vector<double>>();
  if (m.data.size() != m.rows * m.cols)
    throw std::runtime_error("matrix payload size mismatch");
  return m;
}

json objective_to_json(const Objective& o) {
  if (const auto* q = std::get_if<Quadratic>(&o.fn))
    return json{{"family", "quadratic"},
                {"A", mat_to_json(q->A)},
                {"b", q->b},
                {"c0", q->c0}};
  if (const auto* ls = std::get_if<LeastSquares>(&o.fn))
    return json{{"family", "least_squares"},
                {"design", mat_to_json(ls->design)},
                {"response", ls->response}};
  const auto& lg = std::get<Logistic>(o.fn);
  return json{{"family", "logistic"},
              {"features", mat_to_json(lg.features)},
              {"labels", lg.labels}};
}

Objective objective_from_json(const json& j) {
  const std::string family = j.at("family").get<std::string>();
  if (family == "quadratic") {
    Quadratic q;
    q.A = mat_from_json(j.at("A"));
    q.b = j.at("b").get<Vec>();
    q.c0 = j.at("c0").get<double>();
    return Objective::make(std::move(q));
  }
  if (family == "least_squares")
    return Objective::make(
        LeastSquares::make(mat_from_json(j.at("design")), j.at("response").get<Vec>()));
  if (family == "logistic") {
    Logistic lg;
    lg.features = mat_from_json(j.at("features"));
    lg.labels = j.at("labels").get<std::vector<int>>();
    return Objective::make(std::move(lg));
  }
  throw std::runtime_error("unknown objective family: " + family);
}

std::string fmt_double(double v) {
  // 17 significant digits round-trips IEEE binary64 exactly.
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

json problem_to_json(const FederationProblem& p) {
  json clients = json::array();
  for (const auto& c : p.clients) clients.push_back(objective_to_json(c));
  json j{{"clients", clients}};
  if (p.x_star) j["x_star"] = *p.x_star;
  return j;
}

FederationProblem problem_from_json(const json& j) {
  std::vector<Objective> clients;
  for (const auto& cj : j.at("clients")) clients.push_back(objective_from_json(cj));
  auto p = FederationProblem::from_clients(std::move(clients));
  if (j.contains("x_star")) p.x_star = j.at("x_star").get<Vec>();
  return p;
}

void save_problem(const FederationProblem& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << problem_to_json(p).dump(2) << "\n";
}

FederationProblem load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  json j;
  in >> j;
  return problem_from_json(j);
}

void write_trace_csv(const Trace& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "round,f_gap,dist_sq,grad_norm_sq,grad_evals,bytes_up,bytes_down\n";
  for (const auto& r : t.rounds) {
    out << r.round << ',' << fmt_double(r.f_gap) << ',' << fmt_double(r.dist_sq)
        << ',' << fmt_double(r.grad_norm_sq) << ',' << r.grad_evals << ','
        << r.bytes_up << ',' << r.bytes_down << '\n';
  }
}

Trace read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("empty trace file: " + path);
  Trace t;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    RoundMetrics r;
    std::istringstream ss(line);
    std::string field;
    const auto next = [&]() -> std::string {
      if (!std::getline(ss, field, ',')) throw std::runtime_error("short CSV row");
      return field;
    };
    r.round = std::stoull(next());
    r.f_gap = std::stod(next());
    r.dist_sq = std::stod(next());
    r.grad_norm_sq = std::stod(next());
    r.grad_evals = std::stoull(next());
    r.bytes_up = std::stoull(next());
    r.bytes_down = std::stoull(next());
    t.rounds.push_back(r);
  }
  return t;
}

void write_trace_sidecar(const Trace& t, const json& config_echo,
                         const std::string& path) {
  json j{{"algorithm", t.algorithm},
         {"diverged", t.diverged},
         {"reference_minimum", t.reference_minimum},
         {"f_reference", t.f_reference},
         {"rounds", t.rounds.size()},
         {"config", config_echo}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace fedlab
