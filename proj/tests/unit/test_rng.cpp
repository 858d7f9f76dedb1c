#include <cmath>
#include <vector>

#include "doctest.h"
#include "vpflow/error.hpp"
#include "vpflow/rng.hpp"

using namespace vpflow;

TEST_CASE("same seed gives the same stream") {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    CHECK(x == b.next());
    differs = differs || x != c.next();
  }
  CHECK(differs);
}

TEST_CASE("uniform stays in [0,1) and has mean one half") {
  Rng rng(7);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST_CASE("below covers the range without leaving it") {
  Rng rng(1);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto k = rng.below(7);
    REQUIRE(k < 7);
    ++counts[k];
  }
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("categorical samplers never pick zero-weight entries") {
  const std::vector<double> w{0.0, 0.25, 0.0, 0.75, 0.0};
  CategoricalSampler draw(w);
  Rng rng(3);
  std::vector<int> counts(w.size(), 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[draw(rng)];
  CHECK(counts[0] == 0);
  CHECK(counts[2] == 0);
  CHECK(counts[4] == 0);
  CHECK(std::abs(counts[1] / double(n) - 0.25) < 0.01);

  Rng rng2(3);
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += rng2.categorical(w) == 3 ? 1 : 0;
  CHECK(std::abs(hits / double(n) - 0.75) < 0.01);
}

TEST_CASE("categorical rejects empty mass") {
  const std::vector<double> w{0.0, 0.0};
  Rng rng(1);
  CHECK_THROWS_AS(rng.categorical(w), InputError);
  CHECK_THROWS_AS(CategoricalSampler{w}, InputError);
  const std::vector<double> neg{0.5, -0.1};
  CHECK_THROWS_AS(CategoricalSampler{neg}, InputError);
}

TEST_CASE("exponential variates have unit mean") {
  Rng rng(11);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) sum += rng.exponential();
  CHECK(std::abs(sum / n - 1.0) < 4.0 / std::sqrt(double(n)));
}

TEST_CASE("derived seeds separate streams") {
  CHECK(derive_seed(1, 2) != derive_seed(2, 1));
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
  CHECK(derive_seed(0, 0) != derive_seed(0, 1));
}
