#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vpflow/data.hpp"
#include "vpflow/mdp.hpp"
#include "vpflow/optim.hpp"
#include "vpflow/oracle.hpp"

namespace vpflow {

/// Softmax policies mixed with the uniform policy:
/// pi = (1 - epsilon) softmax(logits) + epsilon / |A|, so pi >= tau = epsilon / |A|.
class PolicyClass {
 public:
  PolicyClass(std::size_t n_states, std::size_t n_goals, std::size_t n_actions, double epsilon = 1e-3);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_goals() const { return n_goals_; }
  std::size_t n_actions() const { return n_actions_; }
  double epsilon() const { return epsilon_; }
  double tau() const { return epsilon_ / static_cast<double>(n_actions_); }

  /// logits: S x G x A
  Policy realize(std::span<const double> logits) const;

 private:
  std::size_t n_states_, n_goals_, n_actions_;
  double epsilon_;
};

/// (1/W) sum_i w_i (U_i)_+ / alpha * log pi(a_i | s_i, g_i)
double weighted_mle_objective(const OfflineDataset& data, std::span<const double> u_records, double alpha,
                              const Policy& policy);

/// Gradient of weighted_mle_objective(realize(logits)) with respect to the logits.
std::vector<double> weighted_mle_logit_gradient(const OfflineDataset& data, std::span<const double> u_records,
                                                double alpha, const PolicyClass& cls,
                                                std::span<const double> logits);

struct PolicyFit {
  Policy policy;
  /// True when every weight is zero; the policy is then uniform.
  bool degenerate = false;
  SolveReport report;
};

/// Maximizes the weighted likelihood over the closure of the class. The
/// problem separates over (s,g) cells; each cell is solved exactly as
/// max sum_a c_a log pi_a over {pi >= tau, sum pi = 1}, whose solution is
/// pi_a = max(tau, c_a / nu). Cells without weight stay uniform.
PolicyFit fit_policy(const OfflineDataset& data, std::span<const double> u_records, double alpha,
                     const PolicyClass& cls);

struct Suboptimality {
  double j_hat = 0.0;
  /// J(pi*) - J(pi_hat)
  double subopt_vs_opt = 0.0;
  /// J(pi*_alpha) - J(pi_hat)
  double subopt_vs_reg = 0.0;
  /// E_{(s,g) ~ p x d*_alpha} TV(pi*_alpha(.|s,g), pi_hat(.|s,g))
  double tv_to_reg_opt = 0.0;
};

Suboptimality evaluate_suboptimality(const GoalMdp& mdp, const Policy& pi_hat,
                                     const RegularizedSolution& oracle, double j_opt);

/// E_{(s,g) ~ p x d} TV(pi(.|s,g), pi'(.|s,g)) with d a per-goal occupancy.
double expected_tv(const OccupancyMeasure& d, std::span<const double> goal_dist, const Policy& pi,
                   const Policy& other);

}  // namespace vpflow
