#include "vpflow/serialize.hpp"

#include <fstream>

#include "vpflow/error.hpp"

namespace vpflow {

namespace {

void expect_format(const Json& j, const char* format) {
  require(j.is_object() && j.value("format", std::string{}) == format,
          std::string("expected a document with format ") + format);
}

std::size_t dim(const Json& j, const char* key) { return j.at(key).get<std::size_t>(); }

std::vector<double> table(const Json& j, const char* key) { return j.at(key).get<std::vector<double>>(); }

}  // namespace

Json to_json(const GoalMdp& mdp) {
  const auto& t = mdp.tables();
  return Json{{"format", "vpflow.goal_mdp/1"},
              {"name", t.name},
              {"n_states", t.n_states},
              {"n_actions", t.n_actions},
              {"n_goals", t.n_goals},
              {"discount", t.discount},
              {"transition", t.transition},
              {"reward", t.reward},
              {"init_dist", t.init_dist},
              {"goal_dist", t.goal_dist}};
}

GoalMdp goal_mdp_from_json(const Json& j) {
  expect_format(j, "vpflow.goal_mdp/1");
  GoalMdp::Tables t;
  t.name = j.value("name", std::string{});
  t.n_states = dim(j, "n_states");
  t.n_actions = dim(j, "n_actions");
  t.n_goals = dim(j, "n_goals");
  t.discount = j.at("discount").get<double>();
  t.transition = table(j, "transition");
  t.reward = table(j, "reward");
  t.init_dist = table(j, "init_dist");
  t.goal_dist = table(j, "goal_dist");
  return GoalMdp(std::move(t));
}

Json to_json(const Policy& policy) {
  return Json{{"format", "vpflow.policy/1"},
              {"n_states", policy.n_states()},
              {"n_goals", policy.n_goals()},
              {"n_actions", policy.n_actions()},
              {"probs", policy.probs()}};
}

Policy policy_from_json(const Json& j) {
  expect_format(j, "vpflow.policy/1");
  return Policy(dim(j, "n_states"), dim(j, "n_goals"), dim(j, "n_actions"), table(j, "probs"));
}

Json to_json(const OccupancyMeasure& d) {
  return Json{{"format", "vpflow.occupancy/1"},
              {"n_states", d.n_states()},
              {"n_actions", d.n_actions()},
              {"n_goals", d.n_goals()},
              {"values", d.values()}};
}

OccupancyMeasure occupancy_from_json(const Json& j) {
  expect_format(j, "vpflow.occupancy/1");
  return OccupancyMeasure(dim(j, "n_states"), dim(j, "n_actions"), dim(j, "n_goals"), table(j, "values"));
}

Json to_json(const ValueFn& v) {
  return Json{{"format", "vpflow.value/1"},
              {"n_states", v.n_states()},
              {"n_goals", v.n_goals()},
              {"v_max", v.v_max()},
              {"values", v.values()}};
}

ValueFn value_from_json(const Json& j) {
  expect_format(j, "vpflow.value/1");
  return ValueFn(dim(j, "n_states"), dim(j, "n_goals"), table(j, "values"), j.at("v_max").get<double>());
}

Json to_json(const SolveReport& r) {
  return Json{{"objective_trace", r.objective_trace},
              {"final_gradient_norm", r.final_gradient_norm},
              {"tolerance_used", r.tolerance_used},
              {"converged", r.converged},
              {"iterations", r.iterations}};
}

SolveReport report_from_json(const Json& j) {
  SolveReport r;
  r.objective_trace = table(j, "objective_trace");
  r.final_gradient_norm = j.at("final_gradient_norm").get<double>();
  r.tolerance_used = j.at("tolerance_used").get<double>();
  r.converged = j.at("converged").get<bool>();
  r.iterations = j.at("iterations").get<std::size_t>();
  return r;
}

Json to_json(const RegularizedSolution& s) {
  return Json{{"format", "vpflow.oracle/1"},
              {"alpha", s.alpha},
              {"primal_value", s.primal_value},
              {"dual_value", s.dual_value},
              {"duality_gap", s.duality_gap},
              {"c_star_alpha", s.c_star_alpha},
              {"j_reg_opt", s.j_reg_opt},
              {"kkt_residual", s.kkt_residual},
              {"iterations", s.iterations},
              {"d_star_alpha", to_json(s.d_star_alpha)},
              {"v_star_alpha", to_json(s.v_star_alpha)},
              {"pi_star_alpha", to_json(s.pi_star_alpha)}};
}

RegularizedSolution solution_from_json(const Json& j) {
  expect_format(j, "vpflow.oracle/1");
  return RegularizedSolution{j.at("alpha").get<double>(),
                             occupancy_from_json(j.at("d_star_alpha")),
                             value_from_json(j.at("v_star_alpha")),
                             policy_from_json(j.at("pi_star_alpha")),
                             j.at("primal_value").get<double>(),
                             j.at("dual_value").get<double>(),
                             j.at("duality_gap").get<double>(),
                             j.at("c_star_alpha").get<double>(),
                             j.at("j_reg_opt").get<double>(),
                             j.at("kkt_residual").get<double>(),
                             j.at("iterations").get<std::size_t>()};
}

ValueClass value_class_from_json(const Json& j, double v_max) {
  return ValueClass::linear(dim(j, "n_states"), dim(j, "n_goals"), dim(j, "n_features"), table(j, "features"),
                            v_max);
}

void write_json(const std::string& path, const Json& j) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), "cannot open " + path + " for writing");
  os << j.dump(2) << '\n';
}

Json read_json(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), "cannot open " + path);
  try {
    return Json::parse(is);
  } catch (const Json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

}  // namespace vpflow
