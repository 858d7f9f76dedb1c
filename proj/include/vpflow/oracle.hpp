#pragma once

#include <cstddef>
#include <vector>

#include "vpflow/mdp.hpp"
#include "vpflow/optim.hpp"

namespace vpflow {

/// Ground truth for one (mdp, mu, alpha): the regularized optimal occupancy,
/// its dual value function and the induced policy, with a duality certificate.
///
/// mu is the behavior occupancy with one normalized slice per goal; the joint
/// sampling distribution is p(g) mu(s,a;g).
struct RegularizedSolution {
  double alpha = 0.0;
  OccupancyMeasure d_star_alpha;
  ValueFn v_star_alpha;
  Policy pi_star_alpha;
  /// E_d[r] - alpha D_f(d || mu) at d_star_alpha.
  double primal_value = 0.0;
  /// L_alpha(V)/alpha - alpha/2 at v_star_alpha (the Lagrangian dual).
  double dual_value = 0.0;
  double duality_gap = 0.0;
  double c_star_alpha = 0.0;
  /// J(pi*_alpha) by exact evaluation.
  double j_reg_opt = 0.0;
  /// Max KKT violation of the primal solve.
  double kkt_residual = 0.0;
  std::size_t iterations = 0;
};

struct PrimalSolution {
  OccupancyMeasure d;
  /// Flow-constraint multipliers, S x G; at the optimum these equal V*_alpha
  /// wherever they are determined.
  std::vector<double> multipliers;
  double value = 0.0;
  double kkt_residual = 0.0;
  SolveReport report;
};

struct PrimalOptions {
  std::size_t max_iterations = 100000;
};

/// Exact solve of max_{d >= 0, flow} E_d[r] - alpha D_f(d || mu) by a primal
/// active-set method on each goal's quadratic program, started from mu. The
/// objective trace records the negated objective. Requires mu > 0 and p > 0.
PrimalSolution solve_regularized_primal(const GoalMdp& mdp, const OccupancyMeasure& mu,
                                        double alpha, const PrimalOptions& options = {});

/// E_d[r] - alpha D_f(d || mu).
double primal_objective(const GoalMdp& mdp, const OccupancyMeasure& mu, double alpha,
                        const OccupancyMeasure& d);

/// L_alpha(V) = alpha (1-gamma) E_{rho,p}[V] + alpha E_mu[g*_+(A_V)].
double dual_objective(const GoalMdp& mdp, const OccupancyMeasure& mu, double alpha,
                      const ValueFn& v);

/// Gradient of L_alpha with respect to V, laid out S x G.
std::vector<double> dual_gradient(const GoalMdp& mdp, const OccupancyMeasure& mu, double alpha,
                                  const ValueFn& v);

/// L_alpha as a HingeQuadratic over the S x G table of V.
HingeQuadratic dual_program(const GoalMdp& mdp, const OccupancyMeasure& mu, double alpha);

struct DualSolution {
  ValueFn v;
  double objective = 0.0;
  SolveReport report;
};

DualSolution solve_dual(const GoalMdp& mdp, const OccupancyMeasure& mu, double alpha,
                        const BoxSolveOptions& options = {});

/// d = mu (U_V)_+ / alpha, without renormalization.
OccupancyMeasure recover_occupancy(const GoalMdp& mdp, const OccupancyMeasure& mu, double alpha,
                                   const ValueFn& v);

struct OracleResult {
  RegularizedSolution solution;
  SolveReport primal_report;
  SolveReport dual_report;
};

/// Primal and dual solves combined into one certified solution.
OracleResult solve_oracle(const GoalMdp& mdp, const OccupancyMeasure& mu, double alpha);

struct RegularizationBias {
  /// J(pi*) - J(pi*_alpha)
  double gap = 0.0;
  /// alpha (C*_alpha)^2 / 2
  double bound = 0.0;
};

RegularizationBias regularization_bias(const GoalMdp& mdp, const OccupancyMeasure& mu, double alpha);
RegularizationBias regularization_bias(const RegularizedSolution& solution, double j_opt);

}  // namespace vpflow
