#include "vpflow/plearn.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "vpflow/error.hpp"

namespace vpflow {

namespace {

void check_alignment(const OfflineDataset& data, std::span<const double> u, double alpha) {
  require(u.size() == data.size(), "policy learning: U-hat records are not aligned with the dataset");
  require(alpha > 0.0 && std::isfinite(alpha), "alpha must be positive and finite");
}

// c(s,g,a) = (1/W) sum over records in the cell of w_i (U_i)_+ / alpha
std::vector<double> cell_weights(const OfflineDataset& data, std::span<const double> u, double alpha) {
  const auto& shape = data.shape();
  std::vector<double> c(shape.n_states * shape.n_goals * shape.n_actions, 0.0);
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!(u[i] > 0.0)) continue;
    const auto& t = data.records()[i];
    c[(t.s * shape.n_goals + t.g) * shape.n_actions + t.a] += t.weight * u[i] / alpha;
  }
  for (double& x : c) x /= data.total_weight();
  return c;
}

void softmax(std::span<const double> logits, std::span<double> out) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t a = 0; a < logits.size(); ++a) {
    out[a] = std::exp(logits[a] - top);
    total += out[a];
  }
  for (double& x : out) x /= total;
}

// d/d logits of sum_a c_a log((1-eps) sigma_a + tau)
void cell_gradient(std::span<const double> c, std::span<const double> sigma, double epsilon, double tau,
                   std::span<double> out) {
  double mean = 0.0;
  for (std::size_t a = 0; a < c.size(); ++a) mean += c[a] * sigma[a] / ((1.0 - epsilon) * sigma[a] + tau);
  for (std::size_t b = 0; b < c.size(); ++b)
    out[b] = (1.0 - epsilon) * sigma[b] * (c[b] / ((1.0 - epsilon) * sigma[b] + tau) - mean);
}

// argmax sum_a c_a log pi_a over {pi >= tau, sum pi = 1}
void water_fill(std::span<const double> c, double tau, std::span<double> pi) {
  const std::size_t A = c.size();
  std::vector<std::size_t> order(A);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return c[x] > c[y]; });
  double mass = 0.0;
  double nu = 0.0;
  std::size_t k = 0;
  for (std::size_t j = 0; j < A; ++j) {
    if (c[order[j]] <= 0.0) break;
    mass += c[order[j]];
    const double candidate = mass / (1.0 - static_cast<double>(A - j - 1) * tau);
    // entries above the floor at this nu are exactly the first j+1
    if (c[order[j]] / candidate <= tau) break;
    nu = candidate;
    k = j + 1;
    if (j + 1 < A && c[order[j + 1]] / nu <= tau) break;
  }
  for (std::size_t a = 0; a < A; ++a) pi[a] = tau;
  for (std::size_t j = 0; j < k; ++j) pi[order[j]] = c[order[j]] / nu;
}

}  // namespace

PolicyClass::PolicyClass(std::size_t n_states, std::size_t n_goals, std::size_t n_actions, double epsilon)
    : n_states_(n_states), n_goals_(n_goals), n_actions_(n_actions), epsilon_(epsilon) {
  require(n_states_ > 0 && n_goals_ > 0 && n_actions_ > 0, "PolicyClass: dimensions must be positive");
  require(epsilon_ > 0.0 && epsilon_ < 1.0, "PolicyClass: epsilon must lie in (0, 1)");
}

Policy PolicyClass::realize(std::span<const double> logits) const {
  const std::size_t A = n_actions_;
  require(logits.size() == n_states_ * n_goals_ * A, "PolicyClass::realize: wrong logit count");
  std::vector<double> probs(logits.size());
  for (std::size_t cell = 0; cell < n_states_ * n_goals_; ++cell) {
    std::span<double> out(probs.data() + cell * A, A);
    softmax(logits.subspan(cell * A, A), out);
    for (double& x : out) x = (1.0 - epsilon_) * x + tau();
  }
  return Policy(n_states_, n_goals_, A, std::move(probs));
}

double weighted_mle_objective(const OfflineDataset& data, std::span<const double> u_records, double alpha,
                              const Policy& policy) {
  check_alignment(data, u_records, alpha);
  require(policy.n_states() == data.shape().n_states && policy.n_goals() == data.shape().n_goals &&
              policy.n_actions() == data.shape().n_actions,
          "weighted_mle_objective: policy dimensions do not match the dataset");
  double acc = 0.0;
  for (std::size_t i = 0; i < u_records.size(); ++i) {
    if (!(u_records[i] > 0.0)) continue;
    const auto& t = data.records()[i];
    acc += t.weight * u_records[i] / alpha * std::log(policy(t.s, t.g, t.a));
  }
  return acc / data.total_weight();
}

std::vector<double> weighted_mle_logit_gradient(const OfflineDataset& data, std::span<const double> u_records,
                                                double alpha, const PolicyClass& cls,
                                                std::span<const double> logits) {
  check_alignment(data, u_records, alpha);
  const std::size_t A = cls.n_actions();
  require(logits.size() == cls.n_states() * cls.n_goals() * A, "weighted_mle_logit_gradient: wrong logit count");
  const std::vector<double> c = cell_weights(data, u_records, alpha);
  std::vector<double> grad(logits.size()), sigma(A);
  for (std::size_t cell = 0; cell < cls.n_states() * cls.n_goals(); ++cell) {
    softmax(logits.subspan(cell * A, A), sigma);
    cell_gradient(std::span<const double>(c).subspan(cell * A, A), sigma, cls.epsilon(), cls.tau(),
                  std::span<double>(grad).subspan(cell * A, A));
  }
  return grad;
}

PolicyFit fit_policy(const OfflineDataset& data, std::span<const double> u_records, double alpha,
                     const PolicyClass& cls) {
  check_alignment(data, u_records, alpha);
  require(cls.n_states() == data.shape().n_states && cls.n_goals() == data.shape().n_goals &&
              cls.n_actions() == data.shape().n_actions,
          "fit_policy: policy class dimensions do not match the dataset");
  const std::size_t A = cls.n_actions(), cells = cls.n_states() * cls.n_goals();
  const std::vector<double> c = cell_weights(data, u_records, alpha);
  const double uniform = 1.0 / static_cast<double>(A);

  std::vector<double> probs(cells * A, uniform);
  bool any_weight = false;
  double grad_norm = 0.0;
  std::vector<double> sigma(A), grad(A);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    std::span<const double> cw(c.data() + cell * A, A);
    if (std::all_of(cw.begin(), cw.end(), [](double x) { return x == 0.0; })) continue;
    any_weight = true;
    std::span<double> pi(probs.data() + cell * A, A);
    water_fill(cw, cls.tau(), pi);
    for (std::size_t a = 0; a < A; ++a) sigma[a] = std::max(0.0, (pi[a] - cls.tau()) / (1.0 - cls.epsilon()));
    cell_gradient(cw, sigma, cls.epsilon(), cls.tau(), grad);
    for (double x : grad) grad_norm = std::max(grad_norm, std::abs(x));
  }

  Policy policy(cls.n_states(), cls.n_goals(), A, std::move(probs));
  PolicyFit fit{std::move(policy), !any_weight, {}};
  const Policy start = Policy::uniform(cls.n_states(), cls.n_goals(), A);
  fit.report.objective_trace = {weighted_mle_objective(data, u_records, alpha, start),
                                weighted_mle_objective(data, u_records, alpha, fit.policy)};
  fit.report.final_gradient_norm = grad_norm;
  fit.report.tolerance_used = 1e-8;
  fit.report.converged = grad_norm <= 1e-8;
  fit.report.iterations = 1;
  return fit;
}

double expected_tv(const OccupancyMeasure& d, std::span<const double> goal_dist, const Policy& pi,
                   const Policy& other) {
  require(pi.n_states() == d.n_states() && other.n_states() == d.n_states() && pi.n_goals() == d.n_goals() &&
              other.n_goals() == d.n_goals() && pi.n_actions() == other.n_actions() &&
              goal_dist.size() == d.n_goals(),
          "expected_tv: dimension mismatch");
  double acc = 0.0;
  for (std::size_t s = 0; s < d.n_states(); ++s)
    for (std::size_t g = 0; g < d.n_goals(); ++g) {
      const double w = goal_dist[g] * d.state_mass(s, g);
      if (w == 0.0) continue;
      double tv = 0.0;
      for (std::size_t a = 0; a < pi.n_actions(); ++a) tv += std::abs(pi(s, g, a) - other(s, g, a));
      acc += w * 0.5 * tv;
    }
  return acc;
}

Suboptimality evaluate_suboptimality(const GoalMdp& mdp, const Policy& pi_hat, const RegularizedSolution& oracle,
                                     double j_opt) {
  Suboptimality out;
  out.j_hat = j_value(mdp, pi_hat);
  out.subopt_vs_opt = j_opt - out.j_hat;
  out.subopt_vs_reg = oracle.j_reg_opt - out.j_hat;
  out.tv_to_reg_opt = expected_tv(oracle.d_star_alpha, mdp.tables().goal_dist, oracle.pi_star_alpha, pi_hat);
  return out;
}

}  // namespace vpflow
