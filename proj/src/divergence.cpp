#include "vpflow/divergence.hpp"

#include <cmath>
#include <limits>

#include "vpflow/error.hpp"

namespace vpflow {

ChiSquareSpec::ChiSquareSpec(double alpha) : alpha_(alpha) {
  require(alpha > 0.0 && std::isfinite(alpha), "alpha must be a positive finite number");
}

double f_value(double x) { return 0.5 * (x - 1.0) * (x - 1.0); }

double f_conjugate(double x) { return 0.5 * (x + 1.0) * (x + 1.0) - 0.5; }

double g_conjugate(const ChiSquareSpec& spec, double x) {
  const double a = spec.alpha();
  const double y = x / a + 1.0;
  return 0.5 * a * y * y - 0.5 * a;
}

double g_conjugate_prime(const ChiSquareSpec& spec, double x) { return x / spec.alpha() + 1.0; }

double g_conjugate_plus(const ChiSquareSpec& spec, double x) {
  const double shifted = x + spec.alpha();
  if (shifted <= 0.0) return 0.0;
  return shifted * shifted / (2.0 * spec.alpha());
}

double f_divergence(const OccupancyMeasure& d, const OccupancyMeasure& mu,
                    std::span<const double> goal_dist) {
  require(d.n_states() == mu.n_states() && d.n_actions() == mu.n_actions() &&
              d.n_goals() == mu.n_goals() && goal_dist.size() == d.n_goals(),
          "f_divergence: dimension mismatch");
  double total = 0.0;
  for (std::size_t s = 0; s < d.n_states(); ++s)
    for (std::size_t a = 0; a < d.n_actions(); ++a)
      for (std::size_t g = 0; g < d.n_goals(); ++g) {
        const double num = goal_dist[g] * d(s, a, g);
        const double den = goal_dist[g] * mu(s, a, g);
        if (den == 0.0) {
          if (num > 0.0) return std::numeric_limits<double>::infinity();
          continue;
        }
        total += den * f_value(num / den);
      }
  return total;
}

}  // namespace vpflow
