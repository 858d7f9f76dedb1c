#include "vpflow/oracle.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "vpflow/divergence.hpp"
#include "vpflow/error.hpp"

namespace vpflow {

namespace {

void check_inputs(const GoalMdp& mdp, const OccupancyMeasure& mu, double alpha) {
  require(mu.n_states() == mdp.n_states() && mu.n_actions() == mdp.n_actions() &&
              mu.n_goals() == mdp.n_goals(),
          "behavior occupancy dimensions do not match the MDP");
  require(alpha > 0.0 && std::isfinite(alpha), "alpha must be positive and finite");
}

void check_value(const GoalMdp& mdp, const ValueFn& v) {
  require(v.n_states() == mdp.n_states() && v.n_goals() == mdp.n_goals(),
          "value function dimensions do not match the MDP");
}

// One goal's slice of the primal as  min 1/2 x'Hx + c'x  s.t.  E x = b, x >= 0,
// with H diagonal.
struct GoalQp {
  Eigen::VectorXd h, c, mu, r;
  Eigen::MatrixXd e;
  Eigen::VectorXd b;

  double value(const Eigen::VectorXd& x) const {
    return 0.5 * (h.array() * (x - mu).array().square()).sum() - r.dot(x);
  }
};

GoalQp goal_program(const GoalMdp& mdp, const OccupancyMeasure& mu, double alpha, std::size_t g) {
  const std::size_t S = mdp.n_states(), A = mdp.n_actions(), n = S * A;
  const double gamma = mdp.discount();
  GoalQp qp;
  qp.h.resize(n);
  qp.c.resize(n);
  qp.mu.resize(n);
  qp.r.resize(n);
  qp.e = Eigen::MatrixXd::Zero(S, n);
  qp.b.resize(S);
  for (std::size_t s = 0; s < S; ++s) {
    qp.b(s) = (1.0 - gamma) * mdp.init(s);
    for (std::size_t a = 0; a < A; ++a) {
      const std::size_t i = s * A + a;
      qp.mu(i) = mu(s, a, g);
      qp.h(i) = alpha / qp.mu(i);
      qp.r(i) = mdp.reward(s, g);
      // 1/2 h (x - mu)^2 - r x  =  1/2 h x^2 - (alpha + r) x + const
      qp.c(i) = -alpha - qp.r(i);
      qp.e(s, i) += 1.0;
      auto row = mdp.transition_row(s, a);
      for (std::size_t t = 0; t < S; ++t) qp.e(t, i) -= gamma * row[t];
    }
  }
  return qp;
}

struct EqualitySolve {
  Eigen::VectorXd x;
  Eigen::VectorXd lambda;
};

// Minimizer on the face {x_W = 0, E x = b}, via the Schur complement
// E_F H_F^{-1} E_F'. A pseudo-inverse handles states left with no free inflow.
EqualitySolve solve_face(const GoalQp& qp, const std::vector<bool>& fixed) {
  const Eigen::Index n = qp.h.size();
  Eigen::VectorXd hinv = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i)
    if (!fixed[static_cast<std::size_t>(i)]) hinv(i) = 1.0 / qp.h(i);
  const Eigen::MatrixXd ehinv = qp.e * hinv.asDiagonal();
  const Eigen::MatrixXd schur = ehinv * qp.e.transpose();
  const Eigen::VectorXd rhs = ehinv * (-qp.c) - qp.b;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(schur);
  Eigen::VectorXd lambda = cod.solve(rhs);
  lambda += cod.solve(rhs - schur * lambda);
  EqualitySolve out;
  out.x = hinv.asDiagonal() * (-qp.c - qp.e.transpose() * lambda);
  out.lambda = std::move(lambda);
  return out;
}

struct GoalResult {
  Eigen::VectorXd x;
  Eigen::VectorXd lambda;
  double kkt = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

double kkt_violation(const GoalQp& qp, const Eigen::VectorXd& x, const Eigen::VectorXd& lambda,
                     const std::vector<bool>& fixed) {
  const Eigen::VectorXd grad = qp.h.cwiseProduct(x) + qp.c + qp.e.transpose() * lambda;
  double worst = (qp.e * x - qp.b).cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    worst = std::max(worst, std::max(0.0, -x(i)));
    if (fixed[static_cast<std::size_t>(i)]) {
      worst = std::max(worst, std::max(0.0, -grad(i)));
      worst = std::max(worst, std::abs(x(i) * grad(i)));
    } else {
      worst = std::max(worst, std::abs(grad(i)));
    }
  }
  return worst;
}

template <class OnStep>
GoalResult active_set(const GoalQp& qp, std::size_t max_iterations, OnStep on_step) {
  const Eigen::Index n = qp.h.size();
  constexpr double kMultiplierTol = 1e-12;
  constexpr double kStepTol = 1e-15;

  GoalResult res;
  res.x = qp.mu;  // feasible and strictly positive, so no bound is active
  std::vector<bool> fixed(static_cast<std::size_t>(n), false);
  EqualitySolve face;

  for (std::size_t it = 0; it < max_iterations; ++it) {
    res.iterations = it + 1;
    face = solve_face(qp, fixed);
    const Eigen::VectorXd p = face.x - res.x;

    double step = 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (fixed[static_cast<std::size_t>(i)] || p(i) >= -kStepTol) continue;
      const double t = res.x(i) / -p(i);
      if (t < step) {
        step = t;
        blocking = i;
      }
    }
    res.x += step * p;
    for (Eigen::Index i = 0; i < n; ++i)
      if (fixed[static_cast<std::size_t>(i)] || res.x(i) < 0.0) res.x(i) = 0.0;
    on_step(res.x);

    if (blocking >= 0) {
      fixed[static_cast<std::size_t>(blocking)] = true;
      res.x(blocking) = 0.0;
      continue;
    }

    // At the face minimizer: release the most negative bound multiplier.
    const Eigen::VectorXd z = qp.c + qp.e.transpose() * face.lambda;
    Eigen::Index release = -1;
    double most_negative = -kMultiplierTol;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!fixed[static_cast<std::size_t>(i)]) continue;
      if (z(i) < most_negative) {
        most_negative = z(i);
        release = i;
      }
    }
    if (release < 0) {
      res.converged = true;
      break;
    }
    fixed[static_cast<std::size_t>(release)] = false;
  }
  res.lambda = face.lambda;
  res.kkt = kkt_violation(qp, res.x, res.lambda, fixed);
  return res;
}

}  // namespace

PrimalSolution solve_regularized_primal(const GoalMdp& mdp, const OccupancyMeasure& mu, double alpha,
                                        const PrimalOptions& options) {
  check_inputs(mdp, mu, alpha);
  require(mu.min_entry() > 0.0, "solve_regularized_primal: behavior occupancy must be strictly positive");
  for (std::size_t g = 0; g < mdp.n_goals(); ++g)
    require(mdp.goal_weight(g) > 0.0, "solve_regularized_primal: goal distribution must be strictly positive");
  require(flow_residual(mdp, mu) <= 1e-8, "solve_regularized_primal: behavior occupancy is not flow-feasible");

  const std::size_t S = mdp.n_states(), A = mdp.n_actions(), G = mdp.n_goals();
  std::vector<GoalQp> programs;
  std::vector<double> goal_values(G);
  for (std::size_t g = 0; g < G; ++g) {
    programs.push_back(goal_program(mdp, mu, alpha, g));
    goal_values[g] = programs[g].value(programs[g].mu);
  }
  auto total = [&] {
    double acc = 0.0;
    for (std::size_t g = 0; g < G; ++g) acc += mdp.goal_weight(g) * goal_values[g];
    return acc;
  };

  PrimalSolution out{OccupancyMeasure::zeros(S, A, G), std::vector<double>(S * G, 0.0), 0.0, 0.0, {}};
  out.report.objective_trace.push_back(total());
  out.report.converged = true;
  std::vector<double> d(S * A * G, 0.0);
  for (std::size_t g = 0; g < G; ++g) {
    const GoalResult res = active_set(programs[g], options.max_iterations, [&](const Eigen::VectorXd& x) {
      goal_values[g] = programs[g].value(x);
      out.report.objective_trace.push_back(total());
    });
    out.report.iterations += res.iterations;
    out.report.converged = out.report.converged && res.converged;
    out.kkt_residual = std::max(out.kkt_residual, res.kkt);
    for (std::size_t s = 0; s < S; ++s) {
      out.multipliers[s * G + g] = res.lambda(static_cast<Eigen::Index>(s));
      for (std::size_t a = 0; a < A; ++a) d[(s * A + a) * G + g] = res.x(static_cast<Eigen::Index>(s * A + a));
    }
  }
  out.d = OccupancyMeasure(S, A, G, std::move(d));
  out.value = primal_objective(mdp, mu, alpha, out.d);
  out.report.final_gradient_norm = out.kkt_residual;
  out.report.tolerance_used = 1e-8;
  out.report.converged = out.report.converged && out.kkt_residual <= 1e-8;
  return out;
}

double primal_objective(const GoalMdp& mdp, const OccupancyMeasure& mu, double alpha,
                        const OccupancyMeasure& d) {
  check_inputs(mdp, mu, alpha);
  return expected_reward(mdp, d) - alpha * f_divergence(d, mu, mdp.tables().goal_dist);
}

double dual_objective(const GoalMdp& mdp, const OccupancyMeasure& mu, double alpha, const ValueFn& v) {
  check_inputs(mdp, mu, alpha);
  check_value(mdp, v);
  const ChiSquareSpec spec(alpha);
  const ShiftedAdvantage u = build_shifted_advantage(mdp, v, alpha);
  const std::size_t S = mdp.n_states(), A = mdp.n_actions(), G = mdp.n_goals();
  const double gamma = mdp.discount();
  double init_term = 0.0, hinge_term = 0.0;
  for (std::size_t g = 0; g < G; ++g) {
    const double pg = mdp.goal_weight(g);
    for (std::size_t s = 0; s < S; ++s) {
      init_term += pg * mdp.init(s) * v(s, g);
      for (std::size_t a = 0; a < A; ++a)
        hinge_term += pg * mu(s, a, g) * g_conjugate_plus(spec, u(s, a, g) - alpha);
    }
  }
  return alpha * ((1.0 - gamma) * init_term + hinge_term);
}

std::vector<double> dual_gradient(const GoalMdp& mdp, const OccupancyMeasure& mu, double alpha,
                                  const ValueFn& v) {
  check_inputs(mdp, mu, alpha);
  check_value(mdp, v);
  const ShiftedAdvantage u = build_shifted_advantage(mdp, v, alpha);
  const std::size_t S = mdp.n_states(), A = mdp.n_actions(), G = mdp.n_goals();
  const double gamma = mdp.discount();
  std::vector<double> grad(S * G, 0.0);
  for (std::size_t g = 0; g < G; ++g) {
    const double pg = mdp.goal_weight(g);
    for (std::size_t s = 0; s < S; ++s) {
      grad[s * G + g] += alpha * (1.0 - gamma) * pg * mdp.init(s);
      for (std::size_t a = 0; a < A; ++a) {
        const double w = pg * mu(s, a, g) * std::max(0.0, u(s, a, g));
        if (w == 0.0) continue;
        grad[s * G + g] -= w;
        auto row = mdp.transition_row(s, a);
        for (std::size_t t = 0; t < S; ++t)
          if (row[t] != 0.0) grad[t * G + g] += w * gamma * row[t];
      }
    }
  }
  return grad;
}

HingeQuadratic dual_program(const GoalMdp& mdp, const OccupancyMeasure& mu, double alpha) {
  check_inputs(mdp, mu, alpha);
  const std::size_t S = mdp.n_states(), A = mdp.n_actions(), G = mdp.n_goals();
  const double gamma = mdp.discount();
  HingeQuadratic program(S * G);
  std::vector<std::size_t> idx;
  std::vector<double> coef;
  for (std::size_t g = 0; g < G; ++g) {
    const double pg = mdp.goal_weight(g);
    for (std::size_t s = 0; s < S; ++s) {
      program.add_linear(s * G + g, alpha * (1.0 - gamma) * pg * mdp.init(s));
      for (std::size_t a = 0; a < A; ++a) {
        const double weight = pg * mu(s, a, g);
        if (weight == 0.0) continue;
        idx.assign(1, s * G + g);
        coef.assign(1, -1.0);
        auto row = mdp.transition_row(s, a);
        for (std::size_t t = 0; t < S; ++t)
          if (row[t] != 0.0) {
            idx.push_back(t * G + g);
            coef.push_back(gamma * row[t]);
          }
        program.add_row(idx, coef, mdp.reward(s, g) + alpha, weight);
      }
    }
  }
  return program;
}

DualSolution solve_dual(const GoalMdp& mdp, const OccupancyMeasure& mu, double alpha,
                        const BoxSolveOptions& options) {
  const HingeQuadratic program = dual_program(mdp, mu, alpha);
  const std::size_t n = program.dim();
  const std::vector<double> lo(n, 0.0), hi(n, mdp.v_max());
  BoxSolveResult res = minimize_on_box(program, lo, hi, std::vector<double>(n, 0.0), options);
  const double objective = program.value(res.w);
  return DualSolution{ValueFn(mdp.n_states(), mdp.n_goals(), std::move(res.w), mdp.v_max()), objective,
                      std::move(res.report)};
}

OccupancyMeasure recover_occupancy(const GoalMdp& mdp, const OccupancyMeasure& mu, double alpha,
                                   const ValueFn& v) {
  check_inputs(mdp, mu, alpha);
  const ShiftedAdvantage u = build_shifted_advantage(mdp, v, alpha);
  std::vector<double> d(u.values().size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = mu.values()[i] * std::max(0.0, u.values()[i]) / alpha;
  return OccupancyMeasure(mdp.n_states(), mdp.n_actions(), mdp.n_goals(), std::move(d));
}

OracleResult solve_oracle(const GoalMdp& mdp, const OccupancyMeasure& mu, double alpha) {
  PrimalSolution primal = solve_regularized_primal(mdp, mu, alpha);
  DualSolution dual = solve_dual(mdp, mu, alpha);
  Policy pi = policy_from_occupancy(primal.d, mdp.n_actions());
  const double dual_value = dual.objective / alpha - alpha / 2.0;
  const double c_star = concentrability(primal.d, mu, mdp.tables().goal_dist);
  const double j_reg = j_value(mdp, pi);
  const std::size_t iterations = primal.report.iterations + dual.report.iterations;
  RegularizedSolution sol{alpha,
                          std::move(primal.d),
                          std::move(dual.v),
                          std::move(pi),
                          primal.value,
                          dual_value,
                          dual_value - primal.value,
                          c_star,
                          j_reg,
                          primal.kkt_residual,
                          iterations};
  return OracleResult{std::move(sol), std::move(primal.report), std::move(dual.report)};
}

RegularizationBias regularization_bias(const RegularizedSolution& solution, double j_opt) {
  return RegularizationBias{j_opt - solution.j_reg_opt,
                            solution.alpha * solution.c_star_alpha * solution.c_star_alpha / 2.0};
}

RegularizationBias regularization_bias(const GoalMdp& mdp, const OccupancyMeasure& mu, double alpha) {
  const OracleResult res = solve_oracle(mdp, mu, alpha);
  return regularization_bias(res.solution, exact_optimal_policy(mdp).j);
}

}  // namespace vpflow
