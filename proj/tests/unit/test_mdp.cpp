#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "vpflow/error.hpp"
#include "vpflow/generators.hpp"
#include "vpflow/mdp.hpp"

using namespace vpflow;
namespace to = testing_oracles;

namespace {

GoalMdp random_instance(std::uint64_t seed, std::size_t S = 5, std::size_t A = 2, std::size_t G = 2,
                        double gamma = 0.9) {
  RandomMdpOptions o;
  o.n_states = S;
  o.n_actions = A;
  o.n_goals = G;
  o.discount = gamma;
  return random_mdp(o, seed);
}

GoalMdp::Tables single_state(std::size_t A, double gamma) {
  GoalMdp::Tables t;
  t.n_states = 1;
  t.n_actions = A;
  t.n_goals = 1;
  t.discount = gamma;
  t.transition.assign(A, 1.0);
  t.reward = {0.5};
  t.init_dist = {1.0};
  t.goal_dist = {1.0};
  return t;
}

GoalMdp with_reward(const GoalMdp& mdp, double r) {
  GoalMdp::Tables t = mdp.tables();
  for (double& x : t.reward) x = r;
  return GoalMdp(std::move(t));
}

}  // namespace

TEST_CASE("GoalMdp validates its tables") {
  GoalMdp::Tables good = single_state(2, 0.9);
  CHECK_NOTHROW(GoalMdp{good});

  auto bad = good;
  bad.transition[0] = 0.9;
  CHECK_THROWS_AS(GoalMdp{bad}, InputError);

  bad = good;
  bad.reward[0] = 1.5;
  CHECK_THROWS_AS(GoalMdp{bad}, InputError);

  bad = good;
  bad.discount = 1.0;
  CHECK_THROWS_AS(GoalMdp{bad}, InputError);

  bad = good;
  bad.init_dist = {0.5};
  CHECK_THROWS_AS(GoalMdp{bad}, InputError);

  bad = good;
  bad.goal_dist = {0.5, 0.5};
  CHECK_THROWS_AS(GoalMdp{bad}, InputError);

  bad = good;
  bad.n_actions = 0;
  CHECK_THROWS_AS(GoalMdp{bad}, InputError);
}

TEST_CASE("deterministic flag matches the transition table") {
  CHECK(gridworld(3, 3, 0.9).deterministic());
  CHECK_FALSE(noisy_gridworld(3, 3, 0.2, 0.9).deterministic());
  CHECK_FALSE(random_instance(1).deterministic());
}

TEST_CASE("Policy and ValueFn validate their entries") {
  CHECK_THROWS_AS(Policy(1, 1, 2, {0.7, 0.7}), InputError);
  CHECK_THROWS_AS(Policy(1, 1, 2, {1.2, -0.2}), InputError);
  CHECK_THROWS_AS(ValueFn(1, 1, {11.0}, 10.0), InputError);
  CHECK_THROWS_AS(ValueFn(1, 1, {-0.1}, 10.0), InputError);
  CHECK_THROWS_AS(OccupancyMeasure(1, 1, 1, {-0.1}), InputError);
}

TEST_CASE("occupancy with gamma = 0 is rho times pi") {
  const GoalMdp mdp = random_instance(3, 5, 3, 2, 0.0);
  const Policy pi = to::random_policy(5, 2, 3, 9);
  const OccupancyMeasure d = occupancy_of_policy(mdp, pi);
  for (std::size_t s = 0; s < 5; ++s)
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t g = 0; g < 2; ++g) CHECK(d(s, a, g) == doctest::Approx(mdp.init(s) * pi(s, g, a)).epsilon(1e-14));
}

TEST_CASE("occupancy on a single state equals the policy") {
  const GoalMdp mdp(single_state(3, 0.95));
  const Policy pi(1, 1, 3, {0.2, 0.5, 0.3});
  const OccupancyMeasure d = occupancy_of_policy(mdp, pi);
  for (std::size_t a = 0; a < 3; ++a) CHECK(std::abs(d(0, a, 0) - pi(0, 0, a)) < 1e-14);
}

TEST_CASE("occupancy matches the truncated power series") {
  const GoalMdp mdp = random_instance(5);
  const Policy pi = Policy::uniform(5, 2, 2);
  const OccupancyMeasure d = occupancy_of_policy(mdp, pi);
  const auto series = to::power_series_occupancy(mdp, pi, 500);
  CHECK(to::max_abs_diff(d.values(), series) < 1e-8);
  CHECK(d.normalization_error() < 1e-9);
}

TEST_CASE("occupancy satisfies the flow constraint and factorizes") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const GoalMdp mdp = random_instance(100 + seed, 6, 3, 2, seed % 2 ? 0.9 : 0.5);
    const Policy pi = to::random_policy(6, 2, 3, seed);
    const OccupancyMeasure d = occupancy_of_policy(mdp, pi);
    CHECK(flow_residual(mdp, d) <= 1e-10);
    CHECK(d.normalization_error() <= 1e-9);
    for (std::size_t s = 0; s < 6; ++s)
      for (std::size_t g = 0; g < 2; ++g)
        for (std::size_t a = 0; a < 3; ++a)
          CHECK(std::abs(d(s, a, g) - d.state_mass(s, g) * pi(s, g, a)) < 1e-12);
  }
}

TEST_CASE("occupancy rejects mismatched policies") {
  const GoalMdp mdp = random_instance(5);
  CHECK_THROWS_AS(occupancy_of_policy(mdp, Policy::uniform(5, 2, 3)), InputError);
}

TEST_CASE("policy_from_occupancy") {
  SUBCASE("zero mass gives the uniform row") {
    OccupancyMeasure d(2, 3, 1, {0.2, 0.6, 0.2, 0, 0, 0});
    const Policy pi = policy_from_occupancy(d, 3);
    for (std::size_t a = 0; a < 3; ++a) CHECK(pi(1, 0, a) == doctest::Approx(1.0 / 3.0));
    CHECK(pi(0, 0, 0) == doctest::Approx(0.2));
    CHECK(pi(0, 0, 1) == doctest::Approx(0.6));
    CHECK(pi(0, 0, 2) == doctest::Approx(0.2));
  }
  SUBCASE("round trip through the occupancy") {
    const GoalMdp mdp = random_instance(8, 5, 3, 2, 0.9);
    const Policy pi = to::random_policy(5, 2, 3, 4, 0.1);
    const Policy back = policy_from_occupancy(occupancy_of_policy(mdp, pi), 3);
    CHECK(to::max_abs_diff(pi.probs(), back.probs()) < 1e-9);
  }
  SUBCASE("action count must match") {
    CHECK_THROWS_AS(policy_from_occupancy(OccupancyMeasure::zeros(2, 3, 1), 2), InputError);
  }
}

TEST_CASE("j_value on constant rewards") {
  const GoalMdp base = random_instance(12);
  const Policy pi = to::random_policy(5, 2, 2, 1);
  CHECK(j_value(with_reward(base, 0.37), pi) == doctest::Approx(0.37).epsilon(1e-12));
  CHECK(std::abs(j_value(with_reward(base, 0.0), pi)) < 1e-15);
}

TEST_CASE("j_value agrees with policy evaluation") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const GoalMdp mdp = random_instance(200 + seed, 4 + seed % 3, 2 + seed % 2, 1 + seed % 2, seed % 2 ? 0.9 : 0.5);
    const Policy pi = to::random_policy(mdp.n_states(), mdp.n_goals(), mdp.n_actions(), seed);
    const ValueFn v = evaluate_policy(mdp, pi);
    double expect = 0.0;
    for (std::size_t s = 0; s < mdp.n_states(); ++s)
      for (std::size_t g = 0; g < mdp.n_goals(); ++g) expect += mdp.goal_weight(g) * mdp.init(s) * v(s, g);
    expect *= 1.0 - mdp.discount();
    CHECK(std::abs(j_value(mdp, pi) - expect) <= 1e-9);
  }
}

TEST_CASE("j_value agrees with Monte Carlo rollouts") {
  const GoalMdp mdp = random_instance(77, 5, 2, 2, 0.8);
  const Policy pi = to::random_policy(5, 2, 2, 77);
  const auto est = to::monte_carlo_j(mdp, pi, 1000000, 2024);
  CHECK(std::abs(j_value(mdp, pi) - est.mean) <= 3.0 * est.stderr_);
}

TEST_CASE("performance difference identity") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const GoalMdp mdp = random_instance(300 + seed, 5, 3, 2, 0.9);
    const Policy pi = to::random_policy(5, 2, 3, seed);
    const Policy other = to::random_policy(5, 2, 3, seed + 1000);
    const OccupancyMeasure d = occupancy_of_policy(mdp, pi);
    const auto adv = advantage_of_policy(mdp, other);
    double expect = 0.0;
    for (std::size_t s = 0; s < 5; ++s)
      for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t g = 0; g < 2; ++g) expect += mdp.goal_weight(g) * d(s, a, g) * adv[(s * 3 + a) * 2 + g];
    CHECK(std::abs(j_value(mdp, pi) - j_value(mdp, other) - expect) <= 1e-8);
  }
}

TEST_CASE("concentrability") {
  const std::vector<double> p{0.5, 0.5};
  SUBCASE("identical measures give one") {
    const GoalMdp mdp = random_instance(1);
    const OccupancyMeasure d = occupancy_of_policy(mdp, to::random_policy(5, 2, 2, 3));
    CHECK(concentrability(d, d, p) == doctest::Approx(1.0));
  }
  SUBCASE("point mass against uniform") {
    const std::size_t S = 3, A = 2, G = 2;
    OccupancyMeasure uniform(S, A, G, std::vector<double>(S * A * G, 1.0 / (S * A * G)));
    OccupancyMeasure point = OccupancyMeasure::zeros(S, A, G);
    point.at(1, 1, 0) = 1.0;
    CHECK(concentrability(point, uniform, p) == doctest::Approx(double(S * A * G)));
  }
  SUBCASE("matches an exhaustive maximum") {
    const GoalMdp mdp = random_instance(31, 5, 3, 2);
    const OccupancyMeasure t = occupancy_of_policy(mdp, to::random_policy(5, 2, 3, 1));
    const OccupancyMeasure b = occupancy_of_policy(mdp, to::random_policy(5, 2, 3, 2));
    double worst = 0.0;
    for (std::size_t i = 0; i < t.values().size(); ++i)
      worst = std::max(worst, p[i % 2] * t.values()[i] / (p[i % 2] * b.values()[i]));
    CHECK(concentrability(t, b, p) == doctest::Approx(worst).epsilon(1e-14));
  }
  SUBCASE("uncovered mass is infinite, absent mass is ignored") {
    OccupancyMeasure t(1, 2, 1, {0.5, 0.5}), b(1, 2, 1, {1.0, 0.0});
    const std::vector<double> one{1.0};
    CHECK(std::isinf(concentrability(t, b, one)));
    OccupancyMeasure t2(1, 2, 1, {1.0, 0.0});
    CHECK(concentrability(t2, b, one) == doctest::Approx(1.0));
  }
}

TEST_CASE("exact_optimal_policy") {
  SUBCASE("constant unit reward") {
    const GoalMdp mdp = with_reward(random_instance(4), 1.0);
    const auto opt = exact_optimal_policy(mdp);
    CHECK(opt.j == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(j_value(mdp, to::random_policy(5, 2, 2, 8)) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("ties go to the lowest action") {
    const GoalMdp mdp(single_state(2, 0.9));
    const auto opt = exact_optimal_policy(mdp);
    CHECK(opt.policy(0, 0, 0) == 1.0);
    CHECK(opt.policy(0, 0, 1) == 0.0);
  }
  SUBCASE("gridworld closed form") {
    const double gamma = 0.9;
    const GoalMdp mdp = gridworld(4, 4, gamma);
    const auto opt = exact_optimal_policy(mdp);
    CHECK(opt.residual <= 1e-12);
    const std::size_t corners[4] = {0, 3, 12, 15};
    double expect = 0.0;
    for (std::size_t g = 0; g < 4; ++g)
      for (std::size_t s = 0; s < 16; ++s) {
        const long dx = std::labs(long(s % 4) - long(corners[g] % 4));
        const long dy = std::labs(long(s / 4) - long(corners[g] / 4));
        // (1-gamma) sum_{t >= T0} gamma^t = gamma^T0
        expect += std::pow(gamma, double(dx + dy)) / 64.0;
      }
    CHECK(opt.j == doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("no policy beats it") {
    const GoalMdp mdp = random_instance(90, 6, 3, 2);
    const auto opt = exact_optimal_policy(mdp);
    for (std::uint64_t s = 0; s < 20; ++s)
      CHECK(j_value(mdp, to::random_policy(6, 2, 3, s)) <= opt.j + 1e-12);
  }
}

TEST_CASE("argmax_lowest") {
  const std::vector<double> v{1.0, 3.0, 3.0, 2.0};
  CHECK(argmax_lowest(v) == 1);
  const std::vector<double> w{2.9999999999, 3.0};
  CHECK(argmax_lowest(w, 1e-9) == 0);
  CHECK(argmax_lowest(w, 0.0) == 1);
}

TEST_CASE("shifted advantage construction") {
  const GoalMdp mdp = random_instance(6);
  std::vector<double> vals(10);
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = 0.7 * double(i);
  const ValueFn v(5, 2, vals, mdp.v_max());
  const ShiftedAdvantage u = build_shifted_advantage(mdp, v, 0.3);
  for (std::size_t s = 0; s < 5; ++s)
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t g = 0; g < 2; ++g) {
        double next = 0.0;
        for (std::size_t t = 0; t < 5; ++t) next += mdp.transition(s, a, t) * v(t, g);
        CHECK(std::abs(u(s, a, g) - (mdp.reward(s, g) + 0.9 * next - v(s, g) + 0.3)) <= 1e-12);
      }
}
