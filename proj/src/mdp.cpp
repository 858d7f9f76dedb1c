#include "vpflow/mdp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "vpflow/error.hpp"

namespace vpflow {

namespace {

constexpr double kDistTol = 1e-12;

bool is_distribution(std::span<const double> p) {
  double total = 0.0;
  for (double x : p) {
    if (!(x >= 0.0) || !std::isfinite(x)) return false;
    total += x;
  }
  return std::abs(total - 1.0) <= kDistTol;
}

std::string dims_message(const char* what, std::size_t got, std::size_t want) {
  std::ostringstream os;
  os << what << ": expected " << want << " entries, got " << got;
  return os.str();
}

// Row-stochastic P_pi for one goal.
Eigen::MatrixXd policy_transition(const GoalMdp& mdp, const Policy& policy, std::size_t g) {
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(S, S);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) {
      const double w = policy(s, g, a);
      if (w == 0.0) continue;
      auto row = mdp.transition_row(s, a);
      for (std::size_t t = 0; t < S; ++t) p(s, t) += w * row[t];
    }
  return p;
}

void check_policy_dims(const GoalMdp& mdp, const Policy& policy) {
  require(policy.n_states() == mdp.n_states() && policy.n_actions() == mdp.n_actions() &&
              policy.n_goals() == mdp.n_goals(),
          "policy dimensions do not match the MDP");
}

}  // namespace

GoalMdp::GoalMdp(Tables tables) : t_(std::move(tables)) {
  const std::size_t S = t_.n_states, A = t_.n_actions, G = t_.n_goals;
  require(S > 0 && A > 0 && G > 0, "GoalMdp: dimensions must be positive");
  require(t_.transition.size() == S * A * S, dims_message("transition", t_.transition.size(), S * A * S));
  require(t_.reward.size() == S * G, dims_message("reward", t_.reward.size(), S * G));
  require(t_.init_dist.size() == S, dims_message("init_dist", t_.init_dist.size(), S));
  require(t_.goal_dist.size() == G, dims_message("goal_dist", t_.goal_dist.size(), G));
  require(t_.discount >= 0.0 && t_.discount < 1.0, "GoalMdp: discount must lie in [0,1)");
  require(is_distribution(t_.init_dist), "GoalMdp: init_dist is not a distribution");
  require(is_distribution(t_.goal_dist), "GoalMdp: goal_dist is not a distribution");
  for (double r : t_.reward)
    require(r >= 0.0 && r <= 1.0, "GoalMdp: rewards must lie in [0,1]");

  deterministic_ = true;
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) {
      auto row = transition_row(s, a);
      if (!is_distribution(row)) {
        std::ostringstream os;
        os << "GoalMdp: transition row (" << s << "," << a << ") is not a distribution";
        throw InputError(os.str());
      }
      if (std::count(row.begin(), row.end(), 1.0) != 1) deterministic_ = false;
    }
}

std::size_t GoalMdp::successor(std::size_t s, std::size_t a) const {
  return argmax_lowest(transition_row(s, a));
}

Policy::Policy(std::size_t n_states, std::size_t n_goals, std::size_t n_actions,
               std::vector<double> probs)
    : n_states_(n_states), n_goals_(n_goals), n_actions_(n_actions), probs_(std::move(probs)) {
  require(n_states > 0 && n_goals > 0 && n_actions > 0, "Policy: dimensions must be positive");
  require(probs_.size() == n_states * n_goals * n_actions,
          dims_message("Policy", probs_.size(), n_states * n_goals * n_actions));
  for (std::size_t s = 0; s < n_states; ++s)
    for (std::size_t g = 0; g < n_goals; ++g)
      require(is_distribution(row(s, g)), "Policy: row is not a probability vector");
}

Policy Policy::uniform(std::size_t n_states, std::size_t n_goals, std::size_t n_actions) {
  return Policy(n_states, n_goals, n_actions,
                std::vector<double>(n_states * n_goals * n_actions, 1.0 / static_cast<double>(n_actions)));
}

double Policy::min_entry() const { return *std::min_element(probs_.begin(), probs_.end()); }

OccupancyMeasure::OccupancyMeasure(std::size_t n_states, std::size_t n_actions, std::size_t n_goals,
                                   std::vector<double> values)
    : n_states_(n_states), n_actions_(n_actions), n_goals_(n_goals), d_(std::move(values)) {
  require(n_states > 0 && n_actions > 0 && n_goals > 0,
          "OccupancyMeasure: dimensions must be positive");
  require(d_.size() == n_states * n_actions * n_goals,
          dims_message("OccupancyMeasure", d_.size(), n_states * n_actions * n_goals));
  for (double x : d_) require(x >= 0.0 && std::isfinite(x), "OccupancyMeasure: entries must be nonnegative");
}

OccupancyMeasure OccupancyMeasure::zeros(std::size_t n_states, std::size_t n_actions,
                                         std::size_t n_goals) {
  return OccupancyMeasure(n_states, n_actions, n_goals,
                          std::vector<double>(n_states * n_actions * n_goals, 0.0));
}

double OccupancyMeasure::state_mass(std::size_t s, std::size_t g) const {
  double total = 0.0;
  for (std::size_t a = 0; a < n_actions_; ++a) total += (*this)(s, a, g);
  return total;
}

double OccupancyMeasure::min_entry() const { return *std::min_element(d_.begin(), d_.end()); }

double OccupancyMeasure::normalization_error() const {
  double worst = 0.0;
  for (std::size_t g = 0; g < n_goals_; ++g) {
    double total = 0.0;
    for (std::size_t s = 0; s < n_states_; ++s) total += state_mass(s, g);
    worst = std::max(worst, std::abs(total - 1.0));
  }
  return worst;
}

ValueFn::ValueFn(std::size_t n_states, std::size_t n_goals, std::vector<double> values, double v_max)
    : n_states_(n_states), n_goals_(n_goals), v_(std::move(values)), v_max_(v_max) {
  require(v_max > 0.0, "ValueFn: v_max must be positive");
  require(v_.size() == n_states * n_goals, dims_message("ValueFn", v_.size(), n_states * n_goals));
  for (double x : v_) require(x >= 0.0 && x <= v_max, "ValueFn: entries must lie in [0, v_max]");
}

ValueFn ValueFn::zeros(std::size_t n_states, std::size_t n_goals, double v_max) {
  return ValueFn(n_states, n_goals, std::vector<double>(n_states * n_goals, 0.0), v_max);
}

ShiftedAdvantage::ShiftedAdvantage(std::size_t n_states, std::size_t n_actions, std::size_t n_goals,
                                   std::vector<double> values, double alpha)
    : n_states_(n_states), n_actions_(n_actions), n_goals_(n_goals), u_(std::move(values)), alpha_(alpha) {
  require(alpha > 0.0, "ShiftedAdvantage: alpha must be positive");
  require(u_.size() == n_states * n_actions * n_goals,
          dims_message("ShiftedAdvantage", u_.size(), n_states * n_actions * n_goals));
}

double expected_next_value(const GoalMdp& mdp, const ValueFn& v, std::size_t s, std::size_t a,
                           std::size_t g) {
  auto row = mdp.transition_row(s, a);
  double acc = 0.0;
  for (std::size_t t = 0; t < row.size(); ++t)
    if (row[t] != 0.0) acc += row[t] * v(t, g);
  return acc;
}

ShiftedAdvantage build_shifted_advantage(const GoalMdp& mdp, const ValueFn& v, double alpha) {
  require(v.n_states() == mdp.n_states() && v.n_goals() == mdp.n_goals(),
          "value function dimensions do not match the MDP");
  const std::size_t S = mdp.n_states(), A = mdp.n_actions(), G = mdp.n_goals();
  const double gamma = mdp.discount();
  std::vector<double> u(S * A * G);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t g = 0; g < G; ++g)
        u[(s * A + a) * G + g] =
            mdp.reward(s, g) + gamma * expected_next_value(mdp, v, s, a, g) - v(s, g) + alpha;
  return ShiftedAdvantage(S, A, G, std::move(u), alpha);
}

OccupancyMeasure occupancy_of_policy(const GoalMdp& mdp, const Policy& policy) {
  check_policy_dims(mdp, policy);
  const std::size_t S = mdp.n_states(), A = mdp.n_actions(), G = mdp.n_goals();
  const double gamma = mdp.discount();

  Eigen::VectorXd rhs(S);
  for (std::size_t s = 0; s < S; ++s) rhs(s) = (1.0 - gamma) * mdp.init(s);

  std::vector<double> d(S * A * G, 0.0);
  for (std::size_t g = 0; g < G; ++g) {
    const Eigen::MatrixXd system =
        Eigen::MatrixXd::Identity(S, S) - gamma * policy_transition(mdp, policy, g).transpose();
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    Eigen::VectorXd state = lu.solve(rhs);
    state += lu.solve(rhs - system * state);  // one step of iterative refinement
    const double residual = (system * state - rhs).cwiseAbs().maxCoeff();
    if (!(residual <= 1e-12)) throw NumericError("occupancy_of_policy: flow solve failed");
    for (std::size_t s = 0; s < S; ++s) {
      double mass = state(s);
      if (mass < 0.0) {
        if (mass < -1e-13) throw NumericError("occupancy_of_policy: negative state occupancy");
        mass = 0.0;
      }
      for (std::size_t a = 0; a < A; ++a) d[(s * A + a) * G + g] = mass * policy(s, g, a);
    }
  }
  return OccupancyMeasure(S, A, G, std::move(d));
}

Policy policy_from_occupancy(const OccupancyMeasure& d, std::size_t n_actions) {
  require(d.n_actions() == n_actions, "policy_from_occupancy: action count mismatch");
  const std::size_t S = d.n_states(), G = d.n_goals(), A = n_actions;
  std::vector<double> probs(S * G * A);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t g = 0; g < G; ++g) {
      const double mass = d.state_mass(s, g);
      double* row = probs.data() + (s * G + g) * A;
      if (mass > 0.0) {
        for (std::size_t a = 0; a < A; ++a) row[a] = d(s, a, g) / mass;
      } else {
        std::fill(row, row + A, 1.0 / static_cast<double>(A));
      }
    }
  return Policy(S, G, A, std::move(probs));
}

ValueFn evaluate_policy(const GoalMdp& mdp, const Policy& policy) {
  check_policy_dims(mdp, policy);
  const std::size_t S = mdp.n_states(), G = mdp.n_goals();
  const double gamma = mdp.discount();
  std::vector<double> v(S * G);
  for (std::size_t g = 0; g < G; ++g) {
    const Eigen::MatrixXd system =
        Eigen::MatrixXd::Identity(S, S) - gamma * policy_transition(mdp, policy, g);
    Eigen::VectorXd r(S);
    for (std::size_t s = 0; s < S; ++s) r(s) = mdp.reward(s, g);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    Eigen::VectorXd x = lu.solve(r);
    x += lu.solve(r - system * x);
    for (std::size_t s = 0; s < S; ++s) v[s * G + g] = std::clamp(x(s), 0.0, mdp.v_max());
  }
  return ValueFn(S, G, std::move(v), mdp.v_max());
}

std::vector<double> advantage_of_policy(const GoalMdp& mdp, const Policy& policy) {
  const ValueFn v = evaluate_policy(mdp, policy);
  const ShiftedAdvantage u = build_shifted_advantage(mdp, v, 1.0);
  std::vector<double> adv = u.values();
  for (double& x : adv) x -= 1.0;
  return adv;
}

double expected_reward(const GoalMdp& mdp, const OccupancyMeasure& d) {
  double total = 0.0;
  for (std::size_t g = 0; g < mdp.n_goals(); ++g) {
    double per_goal = 0.0;
    for (std::size_t s = 0; s < mdp.n_states(); ++s) per_goal += d.state_mass(s, g) * mdp.reward(s, g);
    total += mdp.goal_weight(g) * per_goal;
  }
  return total;
}

double j_value(const GoalMdp& mdp, const Policy& policy) {
  return expected_reward(mdp, occupancy_of_policy(mdp, policy));
}

double flow_residual(const GoalMdp& mdp, const OccupancyMeasure& d) {
  require(d.n_states() == mdp.n_states() && d.n_actions() == mdp.n_actions() &&
              d.n_goals() == mdp.n_goals(),
          "flow_residual: dimension mismatch");
  const std::size_t S = mdp.n_states(), A = mdp.n_actions(), G = mdp.n_goals();
  const double gamma = mdp.discount();
  double worst = 0.0;
  for (std::size_t g = 0; g < G; ++g) {
    std::vector<double> inflow(S, 0.0);
    for (std::size_t sp = 0; sp < S; ++sp)
      for (std::size_t ap = 0; ap < A; ++ap) {
        const double mass = d(sp, ap, g);
        if (mass == 0.0) continue;
        auto row = mdp.transition_row(sp, ap);
        for (std::size_t s = 0; s < S; ++s) inflow[s] += row[s] * mass;
      }
    for (std::size_t s = 0; s < S; ++s) {
      const double r = d.state_mass(s, g) - (1.0 - gamma) * mdp.init(s) - gamma * inflow[s];
      worst = std::max(worst, std::abs(r));
    }
  }
  return worst;
}

double concentrability(const OccupancyMeasure& target, const OccupancyMeasure& behavior,
                       std::span<const double> goal_dist) {
  require(target.n_states() == behavior.n_states() && target.n_actions() == behavior.n_actions() &&
              target.n_goals() == behavior.n_goals() && goal_dist.size() == target.n_goals(),
          "concentrability: dimension mismatch");
  double worst = 0.0;
  for (std::size_t s = 0; s < target.n_states(); ++s)
    for (std::size_t a = 0; a < target.n_actions(); ++a)
      for (std::size_t g = 0; g < target.n_goals(); ++g) {
        const double num = goal_dist[g] * target(s, a, g);
        const double den = goal_dist[g] * behavior(s, a, g);
        if (num == 0.0) continue;
        if (den == 0.0) return std::numeric_limits<double>::infinity();
        worst = std::max(worst, num / den);
      }
  return worst;
}

std::size_t argmax_lowest(std::span<const double> values, double tie_tol) {
  require(!values.empty(), "argmax_lowest: empty input");
  const double best = *std::max_element(values.begin(), values.end());
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i] >= best - tie_tol) return i;
  return 0;
}

OptimalPolicy exact_optimal_policy(const GoalMdp& mdp) {
  const std::size_t S = mdp.n_states(), A = mdp.n_actions(), G = mdp.n_goals();
  const double gamma = mdp.discount();
  constexpr double kResidualTol = 1e-12;
  constexpr double kTieTol = 1e-9;
  constexpr std::size_t kMaxSweeps = 1000000;

  std::vector<double> v(S * G, 0.0), q(A);
  double residual = 0.0;
  auto q_row = [&](std::size_t s, std::size_t g, const std::vector<double>& values) {
    for (std::size_t a = 0; a < A; ++a) {
      auto row = mdp.transition_row(s, a);
      double next = 0.0;
      for (std::size_t t = 0; t < S; ++t)
        if (row[t] != 0.0) next += row[t] * values[t * G + g];
      q[a] = mdp.reward(s, g) + gamma * next;
    }
  };

  for (std::size_t sweep = 0; sweep < kMaxSweeps; ++sweep) {
    residual = 0.0;
    std::vector<double> next(S * G);
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t g = 0; g < G; ++g) {
        q_row(s, g, v);
        next[s * G + g] = *std::max_element(q.begin(), q.end());
        residual = std::max(residual, std::abs(next[s * G + g] - v[s * G + g]));
      }
    v = std::move(next);
    if (residual <= kResidualTol) break;
  }

  auto greedy = [&](const std::vector<double>& values) {
    std::vector<double> probs(S * G * A, 0.0);
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t g = 0; g < G; ++g) {
        q_row(s, g, values);
        probs[(s * G + g) * A + argmax_lowest(q, kTieTol)] = 1.0;
      }
    return Policy(S, G, A, std::move(probs));
  };

  // Policy-iteration polish: value iteration leaves O(residual) noise in Q, so
  // re-derive the greedy policy from exact evaluations until it is stable.
  Policy policy = greedy(v);
  for (std::size_t round = 0; round < 100; ++round) {
    const ValueFn exact = evaluate_policy(mdp, policy);
    Policy improved = greedy(exact.values());
    if (improved.probs() == policy.probs()) break;
    policy = std::move(improved);
  }
  ValueFn value = evaluate_policy(mdp, policy);
  const double j = j_value(mdp, policy);
  return OptimalPolicy{std::move(policy), std::move(value), j, residual};
}

}  // namespace vpflow
