#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace vpflow {

/// Outcome of an iterative solve.
struct SolveReport {
  /// Objective after each iteration, in the direction the solver improves it
  /// (minimisers record values that never increase).
  std::vector<double> objective_trace;
  double final_gradient_norm = 0.0;
  double tolerance_used = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

/// Convex piecewise-quadratic objective
///
///   F(w) = linᵀ w + 1/2 sum_i c_i (a_iᵀ w + b_i)_+^2
///
/// with sparse rows a_i. Both the population dual of the regularized program
/// and its empirical estimators have this form once alpha * g*_+ is written as
/// (x + alpha)_+^2 / 2.
class HingeQuadratic {
 public:
  explicit HingeQuadratic(std::size_t dim);

  std::size_t dim() const { return linear_.size(); }
  std::size_t n_rows() const { return offsets_.size(); }

  void add_linear(std::size_t j, double coef) { linear_[j] += coef; }

  /// Appends c * (sum_k coef_k w[idx_k] + offset)_+^2 / 2. Repeated indices are merged.
  void add_row(std::span<const std::size_t> indices, std::span<const double> coefs, double offset,
               double weight);

  double value(std::span<const double> w) const;
  void gradient(std::span<const double> w, std::span<double> out) const;
  /// a_iᵀ w + b_i for every row.
  std::vector<double> row_values(std::span<const double> w) const;
  /// Upper bound on the Lipschitz constant of the gradient.
  double smoothness_bound() const;

  std::span<const double> linear() const { return linear_; }

  /// Adds the generalised Hessian restricted to free coordinates into a dense
  /// column-major n_free x n_free buffer; position[j] is the free index of j or -1.
  void accumulate_hessian(std::span<const double> w, std::span<const long> position,
                          std::span<double> dense, std::size_t n_free) const;

 private:
  std::vector<double> linear_;
  std::vector<std::size_t> row_start_{0};
  std::vector<std::size_t> idx_;
  std::vector<double> coef_;
  std::vector<double> offsets_;
  std::vector<double> weights_;
};

struct BoxSolveOptions {
  /// Stop when |w - P(w - grad F(w))|_inf falls to this level.
  double tolerance = 1e-10;
  std::size_t max_iterations = 200000;
};

struct BoxSolveResult {
  std::vector<double> w;
  SolveReport report;
};

/// Minimises a HingeQuadratic over lo <= w <= hi by projected Newton steps on
/// the generalised Hessian with a projected Armijo search; falls back to a
/// projected gradient step of length 1/L whenever the Newton direction makes
/// no progress.
BoxSolveResult minimize_on_box(const HingeQuadratic& objective, std::span<const double> lo,
                               std::span<const double> hi, std::vector<double> start,
                               const BoxSolveOptions& options);

/// |w - P_[lo,hi](w - grad)|_inf
double projected_gradient_norm(std::span<const double> w, std::span<const double> grad,
                               std::span<const double> lo, std::span<const double> hi);

}  // namespace vpflow
