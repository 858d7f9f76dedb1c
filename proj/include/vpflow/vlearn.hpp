#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vpflow/data.hpp"
#include "vpflow/mdp.hpp"
#include "vpflow/optim.hpp"

namespace vpflow {

/// Value function class. Tabular is all of [0, v_max]^{S x G}. Linear uses
/// V(s;g) = phi(s,g)' w with nonnegative features whose rows sum to at most
/// one and weights boxed to [0, v_max], so every member lies in [0, v_max]
/// without clipping.
class ValueClass {
 public:
  enum class Kind { tabular, linear };

  static ValueClass tabular(std::size_t n_states, std::size_t n_goals, double v_max);
  /// features: S x G x k, row-major.
  static ValueClass linear(std::size_t n_states, std::size_t n_goals, std::size_t n_features,
                           std::vector<double> features, double v_max);

  Kind kind() const { return kind_; }
  std::size_t n_states() const { return n_states_; }
  std::size_t n_goals() const { return n_goals_; }
  std::size_t n_params() const { return n_params_; }
  double v_max() const { return v_max_; }
  const std::vector<double>& features() const { return features_; }

  ValueFn realize(std::span<const double> params) const;

  /// Appends scale * phi(s,g) as sparse (index, coefficient) pairs.
  void append_features(std::size_t s, std::size_t g, double scale, std::vector<std::size_t>& idx,
                       std::vector<double>& coef) const;

  /// Chain rule from a gradient over the S x G value table to the parameters.
  std::vector<double> pullback(std::span<const double> table_grad) const;

 private:
  ValueClass(Kind kind, std::size_t n_states, std::size_t n_goals, std::size_t n_params,
             std::vector<double> features, double v_max);

  Kind kind_;
  std::size_t n_states_, n_goals_, n_params_;
  std::vector<double> features_;
  double v_max_;
};

/// Tabular transition estimate P-hat(s'|s,a), stored S x A x S.
class TransitionModel {
 public:
  TransitionModel(std::size_t n_states, std::size_t n_actions, std::vector<double> p_hat,
                  std::vector<bool> visited);

  /// The true kernel of an MDP, as a model.
  static TransitionModel exact(const GoalMdp& mdp);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  double operator()(std::size_t s, std::size_t a, std::size_t next) const {
    return p_[(s * n_actions_ + a) * n_states_ + next];
  }
  std::span<const double> row(std::size_t s, std::size_t a) const {
    return {p_.data() + (s * n_actions_ + a) * n_states_, n_states_};
  }
  bool visited(std::size_t s, std::size_t a) const { return visited_[s * n_actions_ + a]; }
  const std::vector<double>& values() const { return p_; }

 private:
  std::size_t n_states_, n_actions_;
  std::vector<double> p_;
  std::vector<bool> visited_;
};

/// Empirical conditional frequencies (weighted counts); unvisited pairs get the
/// uniform row.
TransitionModel fit_transition_mle(const OfflineDataset& data, std::size_t n_states, std::size_t n_actions);

/// E_{(s,a) ~ p x mu} TV(P-hat(.|s,a), P(.|s,a))^2.
double model_tv_squared_error(const TransitionModel& model, const GoalMdp& mdp, const OccupancyMeasure& mu);

/// Per-record U-hat_i = r_i + gamma V(s'_i; g_i) - V(s_i; g_i) + alpha.
std::vector<double> record_advantage(const OfflineDataset& data, const ValueFn& v, double alpha);
/// Per-record U-hat_i = r_i + gamma (T-hat V)(s_i, a_i; g_i) - V(s_i; g_i) + alpha.
std::vector<double> record_advantage(const OfflineDataset& data, const ValueFn& v, double alpha,
                                     const TransitionModel& model);

/// Objective split as L = l1 + l2 with l1 = alpha (1-gamma) E_0[V] and
/// l2 = alpha E[g*_+(U - alpha)] = E[(U)_+^2] / 2.
struct DualTerms {
  double l1 = 0.0;
  double l2 = 0.0;
  double total() const { return l1 + l2; }
};

DualTerms empirical_dual_terms_deterministic(const OfflineDataset& data, const InitDataset& init,
                                             double alpha, const ValueFn& v);
DualTerms empirical_dual_terms_stochastic(const OfflineDataset& data, const InitDataset& init,
                                          double alpha, const TransitionModel& model, const ValueFn& v);

double empirical_dual_deterministic(const OfflineDataset& data, const InitDataset& init, double alpha,
                                    const ValueFn& v);
double empirical_dual_stochastic(const OfflineDataset& data, const InitDataset& init, double alpha,
                                 const TransitionModel& model, const ValueFn& v);

/// Gradients with respect to the S x G value table.
std::vector<double> empirical_dual_gradient_deterministic(const OfflineDataset& data,
                                                          const InitDataset& init, double alpha,
                                                          const ValueFn& v);
std::vector<double> empirical_dual_gradient_stochastic(const OfflineDataset& data,
                                                       const InitDataset& init, double alpha,
                                                       const TransitionModel& model, const ValueFn& v);

/// The empirical objectives as HingeQuadratics over the class parameters.
/// Records sharing a row are merged.
HingeQuadratic empirical_program_deterministic(const OfflineDataset& data, const InitDataset& init,
                                               double alpha, const ValueClass& cls);
HingeQuadratic empirical_program_stochastic(const OfflineDataset& data, const InitDataset& init,
                                            double alpha, const ValueClass& cls,
                                            const TransitionModel& model);

struct VFit {
  ValueFn v;
  std::vector<double> params;
  /// U-hat on the fitting dataset, one entry per record.
  std::vector<double> u_records;
  double objective = 0.0;
  SolveReport report;
};

VFit fit_v_deterministic(const OfflineDataset& data, const InitDataset& init, double alpha,
                         const ValueClass& cls, const BoxSolveOptions& options = {});
VFit fit_v_stochastic(const OfflineDataset& data, const InitDataset& init, double alpha,
                      const ValueClass& cls, const TransitionModel& model,
                      const BoxSolveOptions& options = {});

}  // namespace vpflow
