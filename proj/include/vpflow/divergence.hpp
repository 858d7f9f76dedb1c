#pragma once

#include <span>

#include "vpflow/mdp.hpp"

namespace vpflow {

/// Chi-square regularizer g = alpha * f with f(x) = (x-1)^2 / 2.
class ChiSquareSpec {
 public:
  explicit ChiSquareSpec(double alpha);
  double alpha() const { return alpha_; }

 private:
  double alpha_;
};

/// f(x) = (x-1)^2 / 2
double f_value(double x);
/// f*(x) = (x+1)^2 / 2 - 1/2
double f_conjugate(double x);

/// g*(x) = alpha (x/alpha + 1)^2 / 2 - alpha / 2; minimum -alpha/2 at x = -alpha.
double g_conjugate(const ChiSquareSpec& spec, double x);
/// g*'(x) = x/alpha + 1
double g_conjugate_prime(const ChiSquareSpec& spec, double x);

/// Positive part 1{g*'(x) >= 0} (g*(x) - min g*), which simplifies to
/// (x + alpha)_+^2 / (2 alpha).
double g_conjugate_plus(const ChiSquareSpec& spec, double x);

/// D_f(d || mu) = sum_{s,a,g} p(g) mu(s,a;g) f(d/mu). Returns +infinity when d
/// puts mass where mu has none.
double f_divergence(const OccupancyMeasure& d, const OccupancyMeasure& mu,
                    std::span<const double> goal_dist);

}  // namespace vpflow
