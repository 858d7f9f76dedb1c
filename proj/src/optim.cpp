#include "vpflow/optim.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>

#include "vpflow/error.hpp"

namespace vpflow {

HingeQuadratic::HingeQuadratic(std::size_t dim) : linear_(dim, 0.0) {}

void HingeQuadratic::add_row(std::span<const std::size_t> indices, std::span<const double> coefs,
                             double offset, double weight) {
  require(indices.size() == coefs.size(), "HingeQuadratic::add_row: size mismatch");
  require(weight >= 0.0, "HingeQuadratic::add_row: negative weight");
  std::map<std::size_t, double> merged;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    require(indices[k] < dim(), "HingeQuadratic::add_row: index out of range");
    merged[indices[k]] += coefs[k];
  }
  for (const auto& [j, c] : merged) {
    if (c == 0.0) continue;
    idx_.push_back(j);
    coef_.push_back(c);
  }
  row_start_.push_back(idx_.size());
  offsets_.push_back(offset);
  weights_.push_back(weight);
}

std::vector<double> HingeQuadratic::row_values(std::span<const double> w) const {
  std::vector<double> out(n_rows());
  for (std::size_t i = 0; i < n_rows(); ++i) {
    double x = offsets_[i];
    for (std::size_t k = row_start_[i]; k < row_start_[i + 1]; ++k) x += coef_[k] * w[idx_[k]];
    out[i] = x;
  }
  return out;
}

double HingeQuadratic::value(std::span<const double> w) const {
  double lin = 0.0;
  for (std::size_t j = 0; j < dim(); ++j) lin += linear_[j] * w[j];
  double quad = 0.0;
  const auto x = row_values(w);
  for (std::size_t i = 0; i < n_rows(); ++i)
    if (x[i] > 0.0) quad += weights_[i] * x[i] * x[i];
  return lin + 0.5 * quad;
}

void HingeQuadratic::gradient(std::span<const double> w, std::span<double> out) const {
  std::copy(linear_.begin(), linear_.end(), out.begin());
  const auto x = row_values(w);
  for (std::size_t i = 0; i < n_rows(); ++i) {
    if (x[i] <= 0.0) continue;
    const double scale = weights_[i] * x[i];
    for (std::size_t k = row_start_[i]; k < row_start_[i + 1]; ++k) out[idx_[k]] += scale * coef_[k];
  }
}

double HingeQuadratic::smoothness_bound() const {
  double bound = 0.0;
  for (std::size_t i = 0; i < n_rows(); ++i) {
    double norm2 = 0.0;
    for (std::size_t k = row_start_[i]; k < row_start_[i + 1]; ++k) norm2 += coef_[k] * coef_[k];
    bound += weights_[i] * norm2;
  }
  return bound;
}

void HingeQuadratic::accumulate_hessian(std::span<const double> w, std::span<const long> position,
                                        std::span<double> dense, std::size_t n_free) const {
  const auto x = row_values(w);
  for (std::size_t i = 0; i < n_rows(); ++i) {
    if (x[i] <= 0.0) continue;
    for (std::size_t k = row_start_[i]; k < row_start_[i + 1]; ++k) {
      const long pk = position[idx_[k]];
      if (pk < 0) continue;
      for (std::size_t m = row_start_[i]; m < row_start_[i + 1]; ++m) {
        const long pm = position[idx_[m]];
        if (pm < 0) continue;
        dense[static_cast<std::size_t>(pm) * n_free + static_cast<std::size_t>(pk)] +=
            weights_[i] * coef_[k] * coef_[m];
      }
    }
  }
}

double projected_gradient_norm(std::span<const double> w, std::span<const double> grad,
                               std::span<const double> lo, std::span<const double> hi) {
  double worst = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double moved = std::clamp(w[j] - grad[j], lo[j], hi[j]);
    worst = std::max(worst, std::abs(w[j] - moved));
  }
  return worst;
}

BoxSolveResult minimize_on_box(const HingeQuadratic& objective, std::span<const double> lo,
                               std::span<const double> hi, std::vector<double> start,
                               const BoxSolveOptions& options) {
  const std::size_t n = objective.dim();
  require(lo.size() == n && hi.size() == n && start.size() == n, "minimize_on_box: size mismatch");
  for (std::size_t j = 0; j < n; ++j) require(lo[j] <= hi[j], "minimize_on_box: empty box");

  constexpr double kArmijo = 1e-4;
  constexpr int kMaxHalvings = 60;
  constexpr int kStallLimit = 8;

  std::vector<double> w = std::move(start);
  for (std::size_t j = 0; j < n; ++j) w[j] = std::clamp(w[j], lo[j], hi[j]);
  std::vector<double> grad(n), trial(n);
  std::vector<long> position(n);
  const double lipschitz = std::max(objective.smoothness_bound(), 1e-300);

  SolveReport report;
  report.tolerance_used = options.tolerance;
  double f = objective.value(w);
  report.objective_trace.push_back(f);
  int stalled = 0;

  auto project_step = [&](const std::vector<double>& dir, double t) {
    for (std::size_t j = 0; j < n; ++j) trial[j] = std::clamp(w[j] + t * dir[j], lo[j], hi[j]);
  };

  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    objective.gradient(w, grad);
    const double pg = projected_gradient_norm(w, grad, lo, hi);
    report.final_gradient_norm = pg;
    report.iterations = it;
    if (pg <= options.tolerance) {
      report.converged = true;
      break;
    }

    // Coordinates pinned at a bound with the gradient pushing outward stay fixed.
    const double eps = std::min(1e-6, pg);
    std::size_t n_free = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const bool pinned = (w[j] <= lo[j] + eps && grad[j] > 0.0) || (w[j] >= hi[j] - eps && grad[j] < 0.0);
      position[j] = pinned ? -1 : static_cast<long>(n_free++);
    }

    std::vector<double> dir(n, 0.0);
    bool newton_ok = false;
    if (n_free > 0) {
      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_free), static_cast<Eigen::Index>(n_free));
      objective.accumulate_hessian(w, position, std::span<double>(h.data(), n_free * n_free), n_free);
      const double scale = std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
      h.diagonal().array() += 1e-12 * scale;
      Eigen::VectorXd g_free(static_cast<Eigen::Index>(n_free));
      for (std::size_t j = 0; j < n; ++j)
        if (position[j] >= 0) g_free(position[j]) = grad[j];
      Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
      if (ldlt.info() == Eigen::Success) {
        const Eigen::VectorXd step = -ldlt.solve(g_free);
        if (step.allFinite()) {
          for (std::size_t j = 0; j < n; ++j)
            if (position[j] >= 0) dir[j] = step(position[j]);
          newton_ok = true;
        }
      }
    }

    bool accepted = false;
    double f_trial = f;
    if (newton_ok) {
      double t = 1.0;
      for (int k = 0; k < kMaxHalvings; ++k, t *= 0.5) {
        project_step(dir, t);
        double predicted = 0.0;
        for (std::size_t j = 0; j < n; ++j) predicted += grad[j] * (w[j] - trial[j]);
        if (predicted <= 0.0) continue;
        f_trial = objective.value(trial);
        if (f_trial <= f - kArmijo * predicted) {
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) {
      for (std::size_t j = 0; j < n; ++j) dir[j] = -grad[j];
      project_step(dir, 1.0 / lipschitz);
      f_trial = objective.value(trial);
      if (f_trial > f) {
        // a 1/L projected step cannot increase a convex L-smooth objective
        // beyond roundoff; treat as a stall
        f_trial = f;
        trial = w;
      }
    }

    if (f_trial >= f - 1e-15 * std::max(1.0, std::abs(f))) {
      if (++stalled >= kStallLimit) {
        w.swap(trial);
        f = f_trial;
        report.objective_trace.push_back(f);
        break;
      }
    } else {
      stalled = 0;
    }
    w.swap(trial);
    f = f_trial;
    report.objective_trace.push_back(f);
  }

  objective.gradient(w, grad);
  report.final_gradient_norm = projected_gradient_norm(w, grad, lo, hi);
  report.converged = report.final_gradient_norm <= options.tolerance;
  return BoxSolveResult{std::move(w), std::move(report)};
}

}  // namespace vpflow
