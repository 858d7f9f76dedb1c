#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace vpflow {

/// Finite goal-conditioned MDP.
///
/// All tables are dense and row-major in the order their dimensions are
/// listed: transition is S x A x S (P(s'|s,a)), reward is S x G (r(s;g)).
/// Rewards do not depend on the action; the table shape makes that structural.
class GoalMdp {
 public:
  struct Tables {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::size_t n_goals = 0;
    std::vector<double> transition;
    std::vector<double> reward;
    std::vector<double> init_dist;
    std::vector<double> goal_dist;
    double discount = 0.0;
    std::string name;
  };

  /// Validates every invariant; throws InputError on violation.
  explicit GoalMdp(Tables tables);

  std::size_t n_states() const { return t_.n_states; }
  std::size_t n_actions() const { return t_.n_actions; }
  std::size_t n_goals() const { return t_.n_goals; }
  double discount() const { return t_.discount; }
  const std::string& name() const { return t_.name; }

  /// True iff every transition row is a point mass.
  bool deterministic() const { return deterministic_; }

  double transition(std::size_t s, std::size_t a, std::size_t next) const {
    return t_.transition[(s * t_.n_actions + a) * t_.n_states + next];
  }
  std::span<const double> transition_row(std::size_t s, std::size_t a) const {
    return {t_.transition.data() + (s * t_.n_actions + a) * t_.n_states, t_.n_states};
  }
  double reward(std::size_t s, std::size_t g) const { return t_.reward[s * t_.n_goals + g]; }
  double init(std::size_t s) const { return t_.init_dist[s]; }
  double goal_weight(std::size_t g) const { return t_.goal_dist[g]; }

  /// Most likely successor; the unique successor for deterministic MDPs.
  std::size_t successor(std::size_t s, std::size_t a) const;

  /// Upper end of the value range, 1/(1-gamma), since rewards lie in [0,1].
  double v_max() const { return 1.0 / (1.0 - t_.discount); }

  const Tables& tables() const { return t_; }

 private:
  Tables t_;
  bool deterministic_ = false;
};

/// Stationary goal-conditioned policy pi(a|s,g), stored S x G x A.
class Policy {
 public:
  Policy(std::size_t n_states, std::size_t n_goals, std::size_t n_actions,
         std::vector<double> probs);

  static Policy uniform(std::size_t n_states, std::size_t n_goals, std::size_t n_actions);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_goals() const { return n_goals_; }
  std::size_t n_actions() const { return n_actions_; }

  double operator()(std::size_t s, std::size_t g, std::size_t a) const {
    return probs_[(s * n_goals_ + g) * n_actions_ + a];
  }
  std::span<const double> row(std::size_t s, std::size_t g) const {
    return {probs_.data() + (s * n_goals_ + g) * n_actions_, n_actions_};
  }
  const std::vector<double>& probs() const { return probs_; }
  double min_entry() const;

 private:
  std::size_t n_states_, n_goals_, n_actions_;
  std::vector<double> probs_;
};

/// Discounted state-action visitation d(s,a;g), stored S x A x G. Each goal
/// slice of a genuine occupancy sums to one; measures recovered from a dual
/// candidate may not, so normalization is checked rather than enforced.
class OccupancyMeasure {
 public:
  OccupancyMeasure(std::size_t n_states, std::size_t n_actions, std::size_t n_goals,
                   std::vector<double> values);

  static OccupancyMeasure zeros(std::size_t n_states, std::size_t n_actions,
                                std::size_t n_goals);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  std::size_t n_goals() const { return n_goals_; }

  double operator()(std::size_t s, std::size_t a, std::size_t g) const {
    return d_[(s * n_actions_ + a) * n_goals_ + g];
  }
  double& at(std::size_t s, std::size_t a, std::size_t g) {
    return d_[(s * n_actions_ + a) * n_goals_ + g];
  }
  /// d(s;g) = sum_a d(s,a;g).
  double state_mass(std::size_t s, std::size_t g) const;
  double min_entry() const;
  const std::vector<double>& values() const { return d_; }

  /// max_g |sum_{s,a} d(s,a;g) - 1|.
  double normalization_error() const;

 private:
  std::size_t n_states_, n_actions_, n_goals_;
  std::vector<double> d_;
};

/// V(s;g) in [0, v_max], stored S x G.
class ValueFn {
 public:
  ValueFn(std::size_t n_states, std::size_t n_goals, std::vector<double> values, double v_max);

  static ValueFn zeros(std::size_t n_states, std::size_t n_goals, double v_max);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_goals() const { return n_goals_; }
  double v_max() const { return v_max_; }
  double operator()(std::size_t s, std::size_t g) const { return v_[s * n_goals_ + g]; }
  const std::vector<double>& values() const { return v_; }

 private:
  std::size_t n_states_, n_goals_;
  std::vector<double> v_;
  double v_max_;
};

/// U_V(s,a;g) = r(s;g) + gamma (T V)(s,a;g) - V(s;g) + alpha, stored S x A x G.
class ShiftedAdvantage {
 public:
  ShiftedAdvantage(std::size_t n_states, std::size_t n_actions, std::size_t n_goals,
                   std::vector<double> values, double alpha);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  std::size_t n_goals() const { return n_goals_; }
  double alpha() const { return alpha_; }
  double operator()(std::size_t s, std::size_t a, std::size_t g) const {
    return u_[(s * n_actions_ + a) * n_goals_ + g];
  }
  const std::vector<double>& values() const { return u_; }

 private:
  std::size_t n_states_, n_actions_, n_goals_;
  std::vector<double> u_;
  double alpha_;
};

/// (T V)(s,a;g) = E_{s'~P(.|s,a)} V(s';g).
double expected_next_value(const GoalMdp& mdp, const ValueFn& v, std::size_t s, std::size_t a,
                           std::size_t g);

ShiftedAdvantage build_shifted_advantage(const GoalMdp& mdp, const ValueFn& v, double alpha);

/// d^pi by a direct linear solve of the Bellman flow system per goal.
OccupancyMeasure occupancy_of_policy(const GoalMdp& mdp, const Policy& policy);

/// pi_d(a|s,g) = d(s,a;g)/d(s;g), uniform where d(s;g) = 0.
Policy policy_from_occupancy(const OccupancyMeasure& d, std::size_t n_actions);

/// Exact V^pi; lies in [0, v_max] because rewards lie in [0,1].
ValueFn evaluate_policy(const GoalMdp& mdp, const Policy& policy);

/// A^pi(s,a;g) = r(s;g) + gamma (T V^pi)(s,a;g) - V^pi(s;g), stored S x A x G.
std::vector<double> advantage_of_policy(const GoalMdp& mdp, const Policy& policy);

/// J(pi) = sum_{s,a,g} p(g) d^pi(s,a;g) r(s;g).
double j_value(const GoalMdp& mdp, const Policy& policy);

/// Expected reward under an occupancy: sum_{s,a,g} p(g) d(s,a;g) r(s;g).
double expected_reward(const GoalMdp& mdp, const OccupancyMeasure& d);

/// Per-(s,g) Bellman-flow residual, maximised over entries.
double flow_residual(const GoalMdp& mdp, const OccupancyMeasure& d);

/// Smallest C with p(g) d_target <= C p(g) d_behavior everywhere; 0/0 counts
/// as 0 and positive/0 yields +infinity.
double concentrability(const OccupancyMeasure& target, const OccupancyMeasure& behavior,
                       std::span<const double> goal_dist);

struct OptimalPolicy {
  Policy policy;
  ValueFn value;
  double j = 0.0;
  /// Final value-iteration sup-norm residual.
  double residual = 0.0;
};

/// Goal-wise value iteration followed by exact policy-iteration polishing.
/// The greedy policy is deterministic with argmax ties broken toward the
/// lowest action index.
OptimalPolicy exact_optimal_policy(const GoalMdp& mdp);

/// Lowest index among entries within tie_tol of the maximum.
std::size_t argmax_lowest(std::span<const double> values, double tie_tol = 0.0);

}  // namespace vpflow
