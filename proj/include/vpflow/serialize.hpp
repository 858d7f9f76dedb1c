#pragma once

#include <string>

#include "json.hpp"
#include "vpflow/mdp.hpp"
#include "vpflow/optim.hpp"
#include "vpflow/oracle.hpp"
#include "vpflow/vlearn.hpp"

namespace vpflow {

using Json = nlohmann::json;

// Tables are flat row-major arrays in the layouts documented on each type.
// Every document carries a "format" tag that readers check.

Json to_json(const GoalMdp& mdp);
GoalMdp goal_mdp_from_json(const Json& j);

Json to_json(const Policy& policy);
Policy policy_from_json(const Json& j);

Json to_json(const OccupancyMeasure& d);
OccupancyMeasure occupancy_from_json(const Json& j);

Json to_json(const ValueFn& v);
ValueFn value_from_json(const Json& j);

Json to_json(const SolveReport& report);
SolveReport report_from_json(const Json& j);

Json to_json(const RegularizedSolution& solution);
RegularizedSolution solution_from_json(const Json& j);

/// {"n_states", "n_goals", "n_features", "features"} with features S x G x k.
ValueClass value_class_from_json(const Json& j, double v_max);

/// Two-space indented, newline-terminated.
void write_json(const std::string& path, const Json& j);
Json read_json(const std::string& path);

}  // namespace vpflow
