#include "vpflow/rng.hpp"

#include <algorithm>
#include <cmath>

#include "vpflow/error.hpp"

namespace vpflow {

std::size_t Rng::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  require(total > 0.0, "categorical: weights must have positive mass");
  const double target = uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (target < acc) return i;
  }
  return last_positive;
}

double Rng::exponential() {
  // 1 - u lies in (0, 1]
  return -std::log1p(-uniform());
}

CategoricalSampler::CategoricalSampler(std::span<const double> weights) {
  cumulative_.resize(weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    require(weights[i] >= 0.0, "CategoricalSampler: negative weight");
    acc += weights[i];
    cumulative_[i] = acc;
  }
  require(acc > 0.0, "CategoricalSampler: weights must have positive mass");
}

std::size_t CategoricalSampler::operator()(Rng& rng) const {
  const double target = rng.uniform() * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
  if (it == cumulative_.end()) {
    // rounding put target on the total; take the last entry with positive weight
    it = std::lower_bound(cumulative_.begin(), cumulative_.end(), cumulative_.back());
  }
  return static_cast<std::size_t>(it - cumulative_.begin());
}

}  // namespace vpflow
