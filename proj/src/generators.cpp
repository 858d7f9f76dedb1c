#include "vpflow/generators.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <string>

#include "vpflow/error.hpp"
#include "vpflow/rng.hpp"

namespace vpflow {

namespace {

std::vector<double> dirichlet_ones(Rng& rng, std::size_t k) {
  std::vector<double> x(k);
  double total = 0.0;
  for (double& v : x) {
    v = rng.exponential();
    total += v;
  }
  for (double& v : x) v /= total;
  // fold the rounding residue into the largest entry so the row sums to 1
  const auto top = std::max_element(x.begin(), x.end());
  double rest = 0.0;
  for (auto it = x.begin(); it != x.end(); ++it)
    if (it != top) rest += *it;
  *top = 1.0 - rest;
  return x;
}

std::size_t grid_move(std::size_t s, std::size_t action, std::size_t width, std::size_t height) {
  const std::size_t x = s % width, y = s / width;
  switch (action) {
    case kUp: return y > 0 ? s - width : s;
    case kDown: return y + 1 < height ? s + width : s;
    case kLeft: return x > 0 ? s - 1 : s;
    case kRight: return x + 1 < width ? s + 1 : s;
    default: return s;
  }
}

GoalMdp build_grid(std::size_t width, std::size_t height, double p_slip, double discount, std::string name) {
  require(width > 0 && height > 0, "gridworld: dimensions must be positive");
  require(p_slip >= 0.0 && p_slip <= 1.0, "gridworld: slip probability must lie in [0, 1]");
  const std::size_t S = width * height, A = 5;
  std::vector<std::size_t> goals{0, width - 1, (height - 1) * width, S - 1};
  std::sort(goals.begin(), goals.end());
  goals.erase(std::unique(goals.begin(), goals.end()), goals.end());
  const std::size_t G = goals.size();

  GoalMdp::Tables t;
  t.n_states = S;
  t.n_actions = A;
  t.n_goals = G;
  t.discount = discount;
  t.name = std::move(name);
  t.transition.assign(S * A * S, 0.0);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) {
      double* row = t.transition.data() + (s * A + a) * S;
      row[grid_move(s, a, width, height)] += 1.0 - p_slip;
      if (p_slip > 0.0)
        for (std::size_t b = 0; b < A; ++b) row[grid_move(s, b, width, height)] += p_slip / A;
    }
  t.reward.assign(S * G, 0.0);
  for (std::size_t g = 0; g < G; ++g) t.reward[goals[g] * G + g] = 1.0;
  t.init_dist.assign(S, 1.0 / static_cast<double>(S));
  t.goal_dist.assign(G, 1.0 / static_cast<double>(G));
  return GoalMdp(std::move(t));
}

}  // namespace

GoalMdp gridworld(std::size_t width, std::size_t height, double discount) {
  return build_grid(width, height, 0.0, discount,
                    "gridworld " + std::to_string(width) + "x" + std::to_string(height));
}

GoalMdp noisy_gridworld(std::size_t width, std::size_t height, double p_slip, double discount) {
  return build_grid(width, height, p_slip, discount,
                    "noisy-gridworld " + std::to_string(width) + "x" + std::to_string(height));
}

GoalMdp random_chain(std::size_t n, double discount, std::uint64_t seed) {
  require(n >= 2, "random_chain: need at least two states");
  Rng rng(seed);
  const std::size_t S = n, A = 3;
  GoalMdp::Tables t;
  t.n_states = S;
  t.n_actions = A;
  t.n_goals = 1;
  t.discount = discount;
  t.name = "random-chain " + std::to_string(n);
  t.transition.assign(S * A * S, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    const std::size_t left = s > 0 ? s - 1 : s, right = s + 1 < S ? s + 1 : s;
    const double success = 0.6 + 0.35 * rng.uniform();
    double* row_left = t.transition.data() + (s * A + 0) * S;
    double* row_right = t.transition.data() + (s * A + 1) * S;
    double* row_stay = t.transition.data() + (s * A + 2) * S;
    row_left[left] += success;
    row_left[right] += 1.0 - success;
    row_right[right] += success;
    row_right[left] += 1.0 - success;
    row_stay[s] = 1.0;
  }
  t.reward.assign(S, 0.0);
  t.reward[S - 1] = 1.0;
  t.init_dist.assign(S, 1.0 / static_cast<double>(S));
  t.goal_dist = {1.0};
  return GoalMdp(std::move(t));
}

GoalMdp random_mdp(const RandomMdpOptions& o, std::uint64_t seed) {
  require(o.n_states > 0 && o.n_actions > 0 && o.n_goals > 0, "random_mdp: dimensions must be positive");
  Rng rng(seed);
  const std::size_t S = o.n_states, A = o.n_actions, G = o.n_goals;
  GoalMdp::Tables t;
  t.n_states = S;
  t.n_actions = A;
  t.n_goals = G;
  t.discount = o.discount;
  t.name = std::string("random") + (o.deterministic ? " deterministic" : "");
  t.transition.assign(S * A * S, 0.0);
  for (std::size_t sa = 0; sa < S * A; ++sa) {
    if (o.deterministic) {
      t.transition[sa * S + rng.below(S)] = 1.0;
    } else {
      const auto row = dirichlet_ones(rng, S);
      std::copy(row.begin(), row.end(), t.transition.begin() + static_cast<std::ptrdiff_t>(sa * S));
    }
  }
  t.reward.resize(S * G);
  for (double& r : t.reward) r = rng.uniform();
  t.init_dist = dirichlet_ones(rng, S);
  t.goal_dist = dirichlet_ones(rng, G);
  return GoalMdp(std::move(t));
}

Policy shortest_path_behavior(const GoalMdp& mdp, double epsilon) {
  require(epsilon >= 0.0 && epsilon <= 1.0, "shortest_path_behavior: epsilon must lie in [0, 1]");
  const std::size_t S = mdp.n_states(), A = mdp.n_actions(), G = mdp.n_goals();
  constexpr std::size_t kFar = std::numeric_limits<std::size_t>::max();

  // predecessors over the support graph
  std::vector<std::vector<std::size_t>> preds(S);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t t = 0; t < S; ++t)
        if (mdp.transition(s, a, t) > 0.0) preds[t].push_back(s);

  const double uniform = 1.0 / static_cast<double>(A);
  std::vector<double> probs(S * G * A, uniform);
  for (std::size_t g = 0; g < G; ++g) {
    double best = 0.0;
    for (std::size_t s = 0; s < S; ++s) best = std::max(best, mdp.reward(s, g));
    std::vector<std::size_t> dist(S, kFar);
    std::deque<std::size_t> queue;
    if (best > 0.0)
      for (std::size_t s = 0; s < S; ++s)
        if (mdp.reward(s, g) == best) {
          dist[s] = 0;
          queue.push_back(s);
        }
    while (!queue.empty()) {
      const std::size_t t = queue.front();
      queue.pop_front();
      for (std::size_t s : preds[t])
        if (dist[s] == kFar) {
          dist[s] = dist[t] + 1;
          queue.push_back(s);
        }
    }

    for (std::size_t s = 0; s < S; ++s) {
      if (dist[s] == kFar) continue;
      // expected distance after each action; unreachable successors count as far
      std::vector<double> score(A, 0.0);
      for (std::size_t a = 0; a < A; ++a)
        for (std::size_t t = 0; t < S; ++t) {
          const double p = mdp.transition(s, a, t);
          if (p == 0.0) continue;
          score[a] += p * (dist[t] == kFar ? static_cast<double>(S) : static_cast<double>(dist[t]));
        }
      const double low = *std::min_element(score.begin(), score.end());
      std::size_t ties = 0;
      for (double x : score) ties += x <= low + 1e-12 ? 1 : 0;
      double* row = probs.data() + (s * G + g) * A;
      for (std::size_t a = 0; a < A; ++a) {
        const double greedy = score[a] <= low + 1e-12 ? 1.0 / static_cast<double>(ties) : 0.0;
        row[a] = (1.0 - epsilon) * greedy + epsilon * uniform;
      }
    }
  }
  return Policy(S, G, A, std::move(probs));
}

Policy random_behavior(const GoalMdp& mdp, double epsilon, std::uint64_t seed) {
  require(epsilon >= 0.0 && epsilon <= 1.0, "random_behavior: epsilon must lie in [0, 1]");
  Rng rng(seed);
  const std::size_t S = mdp.n_states(), A = mdp.n_actions(), G = mdp.n_goals();
  std::vector<double> probs;
  probs.reserve(S * G * A);
  for (std::size_t cell = 0; cell < S * G; ++cell) {
    const auto row = dirichlet_ones(rng, A);
    for (double x : row) probs.push_back((1.0 - epsilon) * x + epsilon / static_cast<double>(A));
  }
  return Policy(S, G, A, std::move(probs));
}

}  // namespace vpflow
