#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "vpflow/error.hpp"
#include "vpflow/generators.hpp"
#include "vpflow/oracle.hpp"
#include "vpflow/rng.hpp"
#include "vpflow/vlearn.hpp"

using namespace vpflow;
namespace to = testing_oracles;

namespace {

ValueFn random_value(const GoalMdp& mdp, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, mdp.v_max());
  std::vector<double> v(mdp.n_states() * mdp.n_goals());
  for (double& x : v) x = u(gen);
  return ValueFn(mdp.n_states(), mdp.n_goals(), v, mdp.v_max());
}

// sqrt(sum_i w_i (a_i+ - b_i+)^2 / sum_i w_i)
double plus_distance(const OfflineDataset& data, std::span<const double> u_hat, const ShiftedAdvantage& u_star) {
  double num = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Transition& t = data.records()[i];
    const double diff = std::max(u_hat[i], 0.0) - std::max(u_star(t.s, t.a, t.g), 0.0);
    num += t.weight * diff * diff;
  }
  return std::sqrt(num / data.total_weight());
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("objective at V = 0") {
  const GoalMdp mdp = gridworld(3, 3, 0.9);
  const GeneratedData gd = generate_dataset(mdp, shortest_path_behavior(mdp, 0.3), 500, 100, 1);
  const double alpha = 0.2;
  double expect = 0.0;
  for (const Transition& t : gd.data.records()) expect += (t.r + alpha) * (t.r + alpha);
  expect /= 2.0 * double(gd.data.size());
  const ValueFn zero = ValueFn::zeros(9, mdp.n_goals(), mdp.v_max());
  CHECK(empirical_dual_deterministic(gd.data, gd.init, alpha, zero) == doctest::Approx(expect).epsilon(1e-13));
  const auto terms = empirical_dual_terms_deterministic(gd.data, gd.init, alpha, zero);
  CHECK(terms.l1 == 0.0);
  CHECK(terms.total() == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("exhaustive datasets reproduce the population objective") {
  const GoalMdp det = gridworld(3, 3, 0.9);
  const Policy pi = shortest_path_behavior(det, 0.3);
  const GeneratedData pop = population_dataset(det, pi);
  const TransitionModel exact = TransitionModel::exact(det);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ValueFn v = random_value(det, seed);
    const double alpha = 0.1 + 0.2 * double(seed);
    const double ref = dual_objective(det, pop.mu, alpha, v);
    CHECK(empirical_dual_deterministic(pop.data, pop.init, alpha, v) == doctest::Approx(ref).epsilon(1e-12));
    CHECK(empirical_dual_stochastic(pop.data, pop.init, alpha, exact, v) == doctest::Approx(ref).epsilon(1e-12));
  }

  const GoalMdp noisy = noisy_gridworld(3, 3, 0.2, 0.9);
  const GeneratedData npop = population_dataset(noisy, shortest_path_behavior(noisy, 0.3));
  const TransitionModel nexact = TransitionModel::exact(noisy);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ValueFn v = random_value(noisy, 10 + seed);
    CHECK(empirical_dual_stochastic(npop.data, npop.init, 0.3, nexact, v) ==
          doctest::Approx(dual_objective(noisy, npop.mu, 0.3, v)).epsilon(1e-12));
  }
}

TEST_CASE("deterministic estimator is unbiased on deterministic dynamics") {
  const GoalMdp mdp = gridworld(3, 3, 0.8);
  const Policy pi = shortest_path_behavior(mdp, 0.3);
  const ValueFn v = random_value(mdp, 3);
  const double alpha = 0.2;
  const OccupancyMeasure mu = occupancy_of_policy(mdp, pi);
  const double truth = dual_objective(mdp, mu, alpha, v);
  const int reps = 10000;
  double sum = 0.0, sq = 0.0;
  for (int r = 0; r < reps; ++r) {
    const GeneratedData gd = generate_dataset(mdp, pi, 50, 50, derive_seed(77, r));
    const double x = empirical_dual_deterministic(gd.data, gd.init, alpha, v);
    sum += x;
    sq += x * x;
  }
  const double mean = sum / reps;
  const double se = std::sqrt((sq / reps - mean * mean) / reps);
  CHECK(std::abs(mean - truth) <= 3.0 * se);
}

TEST_CASE("fit on exhaustive data matches the oracle") {
  for (const GoalMdp& mdp : {gridworld(4, 4, 0.9), gridworld(3, 2, 0.8)}) {
    const GeneratedData pop = population_dataset(mdp, shortest_path_behavior(mdp, 0.3));
    for (double alpha : {0.05, 0.2, 1.0}) {
      const RegularizedSolution sol = solve_oracle(mdp, pop.mu, alpha).solution;
      const ShiftedAdvantage u_star = build_shifted_advantage(mdp, sol.v_star_alpha, alpha);
      const ValueClass cls = ValueClass::tabular(mdp.n_states(), mdp.n_goals(), mdp.v_max());
      const VFit fit = fit_v_deterministic(pop.data, pop.init, alpha, cls);
      CHECK(fit.report.converged);
      CHECK(fit.report.final_gradient_norm <= 1e-8);
      CHECK(plus_distance(pop.data, fit.u_records, u_star) <= 1e-4);

      const double excess = dual_objective(mdp, pop.mu, alpha, fit.v) - dual_objective(mdp, pop.mu, alpha, sol.v_star_alpha);
      const double d = plus_distance(pop.data, fit.u_records, u_star);
      CHECK(d * d <= 2.0 * excess + 1e-8);

      const auto& tr = fit.report.objective_trace;
      for (std::size_t i = 1; i < tr.size(); ++i) CHECK(tr[i] <= tr[i - 1] + 1e-10);
    }
  }
}

TEST_CASE("zero rewards with the zero class give U = alpha") {
  GoalMdp::Tables t = gridworld(3, 3, 0.9).tables();
  for (double& r : t.reward) r = 0.0;
  const GoalMdp mdp(t);
  const GeneratedData gd = generate_dataset(mdp, Policy::uniform(9, mdp.n_goals(), 5), 300, 30, 2);
  const std::size_t SG = 9 * mdp.n_goals();
  const ValueClass zero = ValueClass::linear(9, mdp.n_goals(), 1, std::vector<double>(SG, 0.0), mdp.v_max());
  const VFit fit = fit_v_deterministic(gd.data, gd.init, 0.3, zero);
  for (double u : fit.u_records) CHECK(u == doctest::Approx(0.3).epsilon(1e-15));
  for (double v : fit.v.values()) CHECK(v == 0.0);
}

TEST_CASE("advantage error shrinks with N") {
  const GoalMdp mdp = gridworld(4, 4, 0.9);
  const Policy pi = shortest_path_behavior(mdp, 0.3);
  const OccupancyMeasure mu = occupancy_of_policy(mdp, pi);
  const double alpha = 0.2;
  const RegularizedSolution sol = solve_oracle(mdp, mu, alpha).solution;
  const ShiftedAdvantage u_star = build_shifted_advantage(mdp, sol.v_star_alpha, alpha);
  const ValueClass cls = ValueClass::tabular(16, mdp.n_goals(), mdp.v_max());
  std::vector<double> medians;
  for (std::size_t n : {1000u, 10000u, 100000u}) {
    std::vector<double> errs;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const GeneratedData gd = generate_dataset(mdp, pi, n, n, derive_seed(seed, n));
      const VFit fit = fit_v_deterministic(gd.data, gd.init, alpha, cls);
      errs.push_back(plus_distance(gd.data, fit.u_records, u_star));
    }
    medians.push_back(median(errs));
  }
  CHECK(medians[1] < medians[0]);
  CHECK(medians[2] < medians[1]);
}

TEST_CASE("transition MLE") {
  SUBCASE("counts") {
    const DatasetShape shape{3, 1, 1, 0.9};
    const OfflineDataset data(shape, {Transition{0, 0, 0, 1, 0}, Transition{0, 0, 0, 1, 0}, Transition{0, 0, 0, 1, 0},
                                      Transition{0, 0, 0, 2, 0}, Transition{1, 0, 0, 0, 0, 2.0},
                                      Transition{1, 0, 0, 2, 0, 6.0}});
    const TransitionModel m = fit_transition_mle(data, 3, 1);
    CHECK(m(0, 0, 1) == 0.75);
    CHECK(m(0, 0, 2) == 0.25);
    CHECK(m(1, 0, 0) == 0.25);
    CHECK(m(1, 0, 2) == 0.75);
    CHECK_FALSE(m.visited(2, 0));
    for (std::size_t t = 0; t < 3; ++t) CHECK(m(2, 0, t) == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("deterministic dynamics give point masses") {
    const GoalMdp mdp = gridworld(3, 3, 0.9);
    const GeneratedData gd = generate_dataset(mdp, shortest_path_behavior(mdp, 0.3), 2000, 10, 3);
    const TransitionModel m = fit_transition_mle(gd.data, 9, 5);
    for (std::size_t s = 0; s < 9; ++s)
      for (std::size_t a = 0; a < 5; ++a) {
        double sum = 0.0;
        for (double p : m.row(s, a)) sum += p;
        CHECK(std::abs(sum - 1.0) <= 1e-12);
        if (m.visited(s, a)) CHECK(m(s, a, mdp.successor(s, a)) == 1.0);
      }
  }
  SUBCASE("error decays at the tabular rate") {
    const GoalMdp mdp = noisy_gridworld(3, 3, 0.3, 0.9);
    const Policy pi = shortest_path_behavior(mdp, 0.3);
    const OccupancyMeasure mu = occupancy_of_policy(mdp, pi);
    auto mean_err = [&](std::size_t n) {
      double total = 0.0;
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const GeneratedData gd = generate_dataset(mdp, pi, n, 1, derive_seed(500 + seed, n));
        total += model_tv_squared_error(fit_transition_mle(gd.data, 9, 5), mdp, mu);
      }
      return total / 20.0;
    };
    const double sa = 45.0;
    const double e3 = mean_err(1000), e4 = mean_err(10000);
    const double c = e3 * 1000.0 / (sa * std::log(1000.0));
    CHECK(e4 <= c * sa * std::log(10000.0) / 10000.0);
    CHECK(model_tv_squared_error(TransitionModel::exact(mdp), mdp, mu) == 0.0);
  }
}

TEST_CASE("stochastic fit agrees with the deterministic fit on deterministic dynamics") {
  const GoalMdp mdp = gridworld(4, 4, 0.9);
  const GeneratedData gd = generate_dataset(mdp, shortest_path_behavior(mdp, 0.3), 3000, 3000, 9);
  const TransitionModel m = fit_transition_mle(gd.data, 16, 5);
  const ValueClass cls = ValueClass::tabular(16, mdp.n_goals(), mdp.v_max());
  for (double alpha : {0.05, 0.5}) {
    const VFit det = fit_v_deterministic(gd.data, gd.init, alpha, cls);
    const VFit sto = fit_v_stochastic(gd.data, gd.init, alpha, cls, m);
    CHECK(to::max_abs_diff(det.v.values(), sto.v.values()) <= 1e-6);
    CHECK(to::max_abs_diff(det.u_records, sto.u_records) <= 1e-6);
    CHECK(det.objective == doctest::Approx(sto.objective).epsilon(1e-10));
  }
}

TEST_CASE("empirical objectives are convex") {
  const GoalMdp mdp = noisy_gridworld(3, 3, 0.2, 0.9);
  const GeneratedData gd = generate_dataset(mdp, shortest_path_behavior(mdp, 0.3), 400, 100, 5);
  const TransitionModel m = fit_transition_mle(gd.data, 9, 5);
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> ul(0.0, 1.0);
  for (std::uint64_t k = 0; k < 50; ++k) {
    const ValueFn a = random_value(mdp, 2 * k), b = random_value(mdp, 2 * k + 1);
    const double lam = ul(gen);
    std::vector<double> mix(a.values().size());
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = lam * a.values()[i] + (1.0 - lam) * b.values()[i];
    const ValueFn c(9, mdp.n_goals(), mix, mdp.v_max());
    const double alpha = 0.1;
    CHECK(empirical_dual_deterministic(gd.data, gd.init, alpha, c) <=
          lam * empirical_dual_deterministic(gd.data, gd.init, alpha, a) +
              (1.0 - lam) * empirical_dual_deterministic(gd.data, gd.init, alpha, b) + 1e-10);
    CHECK(empirical_dual_stochastic(gd.data, gd.init, alpha, m, c) <=
          lam * empirical_dual_stochastic(gd.data, gd.init, alpha, m, a) +
              (1.0 - lam) * empirical_dual_stochastic(gd.data, gd.init, alpha, m, b) + 1e-10);
  }
}

TEST_CASE("analytic gradients match finite differences") {
  const GoalMdp mdp = noisy_gridworld(3, 3, 0.2, 0.9);
  const GeneratedData gd = generate_dataset(mdp, shortest_path_behavior(mdp, 0.3), 400, 100, 8);
  const TransitionModel m = fit_transition_mle(gd.data, 9, 5);
  const double alpha = 0.2;
  const std::size_t G = mdp.n_goals();
  for (std::uint64_t k = 0; k < 20; ++k) {
    const ValueFn v = random_value(mdp, 300 + k);
    const auto gd_det = empirical_dual_gradient_deterministic(gd.data, gd.init, alpha, v);
    const auto fd_det = to::finite_difference(
        [&](const std::vector<double>& x) {
          return empirical_dual_deterministic(gd.data, gd.init, alpha, ValueFn(9, G, x, 1e300));
        },
        v.values(), 1e-5);
    CHECK(to::max_rel_diff(gd_det, fd_det, 1e-3) <= 1e-6);
    const auto gd_sto = empirical_dual_gradient_stochastic(gd.data, gd.init, alpha, m, v);
    const auto fd_sto = to::finite_difference(
        [&](const std::vector<double>& x) {
          return empirical_dual_stochastic(gd.data, gd.init, alpha, m, ValueFn(9, G, x, 1e300));
        },
        v.values(), 1e-5);
    CHECK(to::max_rel_diff(gd_sto, fd_sto, 1e-3) <= 1e-6);

    const HingeQuadratic prog = empirical_program_deterministic(gd.data, gd.init, alpha,
                                                                ValueClass::tabular(9, G, mdp.v_max()));
    CHECK(prog.value(v.values()) == doctest::Approx(empirical_dual_deterministic(gd.data, gd.init, alpha, v)).epsilon(1e-12));
  }
}

TEST_CASE("record advantages are the terms inside the objective") {
  const GoalMdp mdp = noisy_gridworld(3, 3, 0.2, 0.9);
  const GeneratedData gd = generate_dataset(mdp, shortest_path_behavior(mdp, 0.3), 300, 100, 12);
  const TransitionModel m = fit_transition_mle(gd.data, 9, 5);
  const ValueFn v = random_value(mdp, 1);
  const double alpha = 0.15;
  const auto u_det = record_advantage(gd.data, v, alpha);
  const auto u_sto = record_advantage(gd.data, v, alpha, m);
  double l2_det = 0.0, l2_sto = 0.0;
  for (std::size_t i = 0; i < gd.data.size(); ++i) {
    const Transition& t = gd.data.records()[i];
    double next = 0.0;
    for (std::size_t s2 = 0; s2 < 9; ++s2) next += m(t.s, t.a, s2) * v(s2, t.g);
    CHECK(u_det[i] - alpha == doctest::Approx(t.r + 0.9 * v(t.s_next, t.g) - v(t.s, t.g)).epsilon(1e-13));
    CHECK(u_sto[i] - alpha == doctest::Approx(t.r + 0.9 * next - v(t.s, t.g)).epsilon(1e-13));
    l2_det += std::pow(std::max(u_det[i], 0.0), 2) / 2.0;
    l2_sto += std::pow(std::max(u_sto[i], 0.0), 2) / 2.0;
  }
  const double n = double(gd.data.size());
  CHECK(empirical_dual_terms_deterministic(gd.data, gd.init, alpha, v).l2 == doctest::Approx(l2_det / n).epsilon(1e-12));
  CHECK(empirical_dual_terms_stochastic(gd.data, gd.init, alpha, m, v).l2 == doctest::Approx(l2_sto / n).epsilon(1e-12));
}

TEST_CASE("linear value class") {
  const std::size_t S = 3, G = 2;
  SUBCASE("validation") {
    CHECK_THROWS_AS(ValueClass::linear(S, G, 1, std::vector<double>(S * G, -0.1), 10.0), InputError);
    CHECK_THROWS_AS(ValueClass::linear(S, G, 2, std::vector<double>(S * G * 2, 0.6), 10.0), InputError);
    CHECK_THROWS_AS(ValueClass::linear(S, G, 2, std::vector<double>(S * G, 0.1), 10.0), InputError);
  }
  SUBCASE("one-hot features reproduce the tabular class") {
    const GoalMdp mdp = gridworld(3, 3, 0.9);
    const std::size_t SG = 9 * mdp.n_goals();
    std::vector<double> feats(SG * SG, 0.0);
    for (std::size_t i = 0; i < SG; ++i) feats[i * SG + i] = 1.0;
    const ValueClass lin = ValueClass::linear(9, mdp.n_goals(), SG, feats, mdp.v_max());
    const ValueClass tab = ValueClass::tabular(9, mdp.n_goals(), mdp.v_max());
    const GeneratedData gd = generate_dataset(mdp, shortest_path_behavior(mdp, 0.3), 2000, 500, 4);
    const VFit a = fit_v_deterministic(gd.data, gd.init, 0.2, lin);
    const VFit b = fit_v_deterministic(gd.data, gd.init, 0.2, tab);
    CHECK(to::max_abs_diff(a.v.values(), b.v.values()) <= 1e-8);
  }
  SUBCASE("realized values stay in range") {
    std::vector<double> feats(S * G * 2);
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> u(0.0, 0.5);
    for (double& f : feats) f = u(gen);
    const ValueClass lin = ValueClass::linear(S, G, 2, feats, 10.0);
    const std::vector<double> w{10.0, 10.0};
    const ValueFn v = lin.realize(w);
    for (double x : v.values()) {
      CHECK(x >= 0.0);
      CHECK(x <= 10.0);
    }
    const std::vector<double> tg(S * G, 1.0);
    const auto pg = lin.pullback(tg);
    double col0 = 0.0;
    for (std::size_t i = 0; i < S * G; ++i) col0 += feats[2 * i];
    CHECK(pg[0] == doctest::Approx(col0));
  }
}

TEST_CASE("learners reject bad input") {
  const GoalMdp mdp = gridworld(3, 3, 0.9);
  const GeneratedData gd = generate_dataset(mdp, shortest_path_behavior(mdp, 0.3), 100, 10, 1);
  const ValueClass cls = ValueClass::tabular(9, mdp.n_goals(), mdp.v_max());
  const OfflineDataset empty(gd.data.shape(), {});
  CHECK_THROWS_AS(fit_v_deterministic(empty, gd.init, 0.2, cls), InputError);
  CHECK_THROWS_AS(fit_v_deterministic(gd.data, gd.init, 0.0, cls), InputError);
  CHECK_THROWS_AS(fit_v_deterministic(gd.data, gd.init, 0.2, ValueClass::tabular(8, mdp.n_goals(), mdp.v_max())),
                  InputError);
  CHECK_THROWS_AS(empirical_dual_deterministic(gd.data, InitDataset(gd.init.shape(), {}), 0.2,
                                               ValueFn::zeros(9, mdp.n_goals(), mdp.v_max())),
                  InputError);
  CHECK_THROWS_AS(TransitionModel(2, 1, {0.5, 0.4, 0.0, 1.0}, {true, true}), InputError);
}
