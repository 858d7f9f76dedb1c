#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "vpflow/optim.hpp"

using namespace vpflow;
namespace to = testing_oracles;

namespace {

HingeQuadratic random_problem(std::size_t dim, std::size_t rows, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0), w(0.1, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, dim - 1);
  HingeQuadratic q(dim);
  for (std::size_t j = 0; j < dim; ++j) q.add_linear(j, 0.2 * w(gen));
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t idx[3] = {pick(gen), pick(gen), pick(gen)};
    const double coef[3] = {u(gen), u(gen), -w(gen)};
    q.add_row(idx, coef, u(gen), w(gen));
  }
  return q;
}

double naive_value(const HingeQuadratic& q, const std::vector<double>& x) {
  double total = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) total += q.linear()[j] * x[j];
  return total;
}

}  // namespace

TEST_CASE("row evaluation and merged indices") {
  HingeQuadratic q(2);
  q.add_linear(0, 0.5);
  const std::size_t idx[3] = {0, 1, 0};
  const double coef[3] = {1.0, -2.0, 2.0};
  q.add_row(idx, coef, 0.5, 2.0);
  const std::vector<double> x{1.0, 0.25};
  const auto rows = q.row_values(x);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0] == doctest::Approx(3.0 - 0.5 + 0.5));
  CHECK(q.value(x) == doctest::Approx(0.5 + 0.5 * 2.0 * 9.0));
  CHECK(naive_value(q, x) == doctest::Approx(0.5));
  const std::vector<double> y{-1.0, 0.0};
  CHECK(q.value(y) == doctest::Approx(-0.5));
}

TEST_CASE("gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const HingeQuadratic q = random_problem(6, 20, seed);
    std::mt19937_64 gen(seed + 100);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<double> x(6);
    for (double& v : x) v = u(gen);
    std::vector<double> grad(6);
    q.gradient(x, grad);
    const auto fd = to::finite_difference([&](const std::vector<double>& z) { return q.value(z); }, x, 1e-6);
    CHECK(to::max_abs_diff(grad, fd) < 1e-6);
  }
}

TEST_CASE("smoothness bound dominates observed curvature") {
  const HingeQuadratic q = random_problem(5, 15, 3);
  const double L = q.smoothness_bound();
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> x(5), y(5), gx(5), gy(5);
    for (std::size_t j = 0; j < 5; ++j) {
      x[j] = u(gen);
      y[j] = u(gen);
    }
    q.gradient(x, gx);
    q.gradient(y, gy);
    double dg = 0.0, dx = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
      dg += (gx[j] - gy[j]) * (gx[j] - gy[j]);
      dx += (x[j] - y[j]) * (x[j] - y[j]);
    }
    CHECK(std::sqrt(dg) <= L * std::sqrt(dx) * (1.0 + 1e-12));
  }
}

TEST_CASE("one-dimensional minimizers") {
  const std::vector<double> lo{0.0}, hi{10.0};
  SUBCASE("interior") {
    // -w + (w - 3)_+^2 / 2 is minimized at w = 4
    HingeQuadratic q(1);
    q.add_linear(0, -1.0);
    const std::size_t idx[1] = {0};
    const double coef[1] = {1.0};
    q.add_row(idx, coef, -3.0, 1.0);
    const auto res = minimize_on_box(q, lo, hi, {0.0}, {});
    CHECK(res.report.converged);
    CHECK(res.w[0] == doctest::Approx(4.0).epsilon(1e-12));
  }
  SUBCASE("active upper bound") {
    HingeQuadratic q(1);
    q.add_linear(0, -1.0);
    const auto res = minimize_on_box(q, lo, hi, {5.0}, {});
    CHECK(res.report.converged);
    CHECK(res.w[0] == 10.0);
  }
  SUBCASE("active lower bound") {
    // w + (w - 2)_+^2 / 2 is increasing on the box
    HingeQuadratic q(1);
    q.add_linear(0, 1.0);
    const std::size_t idx[1] = {0};
    const double coef[1] = {1.0};
    q.add_row(idx, coef, -2.0, 1.0);
    const auto res = minimize_on_box(q, lo, hi, {7.0}, {});
    CHECK(res.report.converged);
    CHECK(res.w[0] == 0.0);
  }
}

TEST_CASE("box solver reaches a stationary point with a monotone trace") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const HingeQuadratic q = random_problem(8, 30, seed + 50);
    const std::vector<double> lo(8, 0.0), hi(8, 3.0);
    const auto res = minimize_on_box(q, lo, hi, std::vector<double>(8, 1.5), {});
    CHECK(res.report.converged);
    std::vector<double> g(8);
    q.gradient(res.w, g);
    CHECK(projected_gradient_norm(res.w, g, lo, hi) <= 1e-10);
    const auto& tr = res.report.objective_trace;
    for (std::size_t i = 1; i < tr.size(); ++i) CHECK(tr[i] <= tr[i - 1] + 1e-10);

    // slow projected gradient as an independent route to the same value
    std::vector<double> w(8, 1.5), gw(8);
    const double step = 1.0 / q.smoothness_bound();
    for (int it = 0; it < 200000; ++it) {
      q.gradient(w, gw);
      for (std::size_t j = 0; j < 8; ++j) w[j] = std::clamp(w[j] - step * gw[j], lo[j], hi[j]);
    }
    CHECK(std::abs(q.value(w) - q.value(res.w)) <= 1e-9);
    CHECK(q.value(res.w) <= q.value(w) + 1e-12);
  }
}

TEST_CASE("projected gradient norm") {
  const std::vector<double> lo{0.0, 0.0}, hi{1.0, 1.0};
  const std::vector<double> w{0.0, 0.5}, g{3.0, -0.2};
  CHECK(projected_gradient_norm(w, g, lo, hi) == doctest::Approx(0.2));
  const std::vector<double> w2{1.0, 1.0}, g2{-5.0, -5.0};
  CHECK(projected_gradient_norm(w2, g2, lo, hi) == 0.0);
}
