#include "vpflow/vlearn.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "vpflow/divergence.hpp"
#include "vpflow/error.hpp"

namespace vpflow {

namespace {

void check_datasets(const OfflineDataset& data, const InitDataset& init, double alpha) {
  require(data.size() > 0, "V-learning: empty dataset");
  require(init.size() > 0, "V-learning: empty initial-state dataset");
  const auto& a = data.shape();
  const auto& b = init.shape();
  require(a.n_states == b.n_states && a.n_goals == b.n_goals && a.discount == b.discount,
          "V-learning: dataset and initial-state dataset disagree on shape");
  require(alpha > 0.0 && std::isfinite(alpha), "alpha must be positive and finite");
}

void check_value(const OfflineDataset& data, const ValueFn& v) {
  require(v.n_states() == data.shape().n_states && v.n_goals() == data.shape().n_goals,
          "value function dimensions do not match the dataset");
}

void check_model(const OfflineDataset& data, const TransitionModel& model) {
  require(model.n_states() == data.shape().n_states && model.n_actions() == data.shape().n_actions,
          "transition model dimensions do not match the dataset");
}

double model_next_value(const TransitionModel& model, const ValueFn& v, std::size_t s, std::size_t a,
                        std::size_t g) {
  auto row = model.row(s, a);
  double acc = 0.0;
  for (std::size_t t = 0; t < row.size(); ++t)
    if (row[t] != 0.0) acc += row[t] * v(t, g);
  return acc;
}

DualTerms terms_from_records(const OfflineDataset& data, const InitDataset& init, double alpha,
                             const ValueFn& v, const std::vector<double>& u) {
  const ChiSquareSpec spec(alpha);
  const double gamma = data.shape().discount;
  DualTerms out;
  for (const auto& p : init.records()) out.l1 += p.weight * v(p.s, p.g);
  out.l1 *= alpha * (1.0 - gamma) / init.total_weight();
  for (std::size_t i = 0; i < u.size(); ++i)
    out.l2 += data.records()[i].weight * g_conjugate_plus(spec, u[i] - alpha);
  out.l2 *= alpha / data.total_weight();
  return out;
}

std::vector<double> init_gradient(const InitDataset& init, double alpha, double gamma) {
  std::vector<double> grad(init.shape().n_states * init.shape().n_goals, 0.0);
  const double scale = alpha * (1.0 - gamma) / init.total_weight();
  for (const auto& p : init.records()) grad[p.s * init.shape().n_goals + p.g] += scale * p.weight;
  return grad;
}

void add_init_terms(HingeQuadratic& program, const InitDataset& init, double alpha, double gamma,
                    const ValueClass& cls) {
  std::map<std::pair<std::size_t, std::size_t>, double> merged;
  for (const auto& p : init.records()) merged[{p.s, p.g}] += p.weight;
  std::vector<std::size_t> idx;
  std::vector<double> coef;
  const double scale = alpha * (1.0 - gamma) / init.total_weight();
  for (const auto& [key, w] : merged) {
    idx.clear();
    coef.clear();
    cls.append_features(key.first, key.second, scale * w, idx, coef);
    for (std::size_t k = 0; k < idx.size(); ++k) program.add_linear(idx[k], coef[k]);
  }
}

void check_class(const OfflineDataset& data, const ValueClass& cls) {
  require(cls.n_states() == data.shape().n_states && cls.n_goals() == data.shape().n_goals,
          "value class dimensions do not match the dataset");
}

VFit finish_fit(const HingeQuadratic& program, const ValueClass& cls, const BoxSolveOptions& options) {
  const std::size_t n = program.dim();
  const std::vector<double> lo(n, 0.0), hi(n, cls.v_max());
  BoxSolveResult res = minimize_on_box(program, lo, hi, std::vector<double>(n, 0.0), options);
  ValueFn v = cls.realize(res.w);
  const double objective = program.value(res.w);
  return VFit{std::move(v), std::move(res.w), {}, objective, std::move(res.report)};
}

}  // namespace

ValueClass::ValueClass(Kind kind, std::size_t n_states, std::size_t n_goals, std::size_t n_params,
                       std::vector<double> features, double v_max)
    : kind_(kind),
      n_states_(n_states),
      n_goals_(n_goals),
      n_params_(n_params),
      features_(std::move(features)),
      v_max_(v_max) {
  require(n_states_ > 0 && n_goals_ > 0, "ValueClass: dimensions must be positive");
  require(v_max_ > 0.0 && std::isfinite(v_max_), "ValueClass: v_max must be positive and finite");
}

ValueClass ValueClass::tabular(std::size_t n_states, std::size_t n_goals, double v_max) {
  return ValueClass(Kind::tabular, n_states, n_goals, n_states * n_goals, {}, v_max);
}

ValueClass ValueClass::linear(std::size_t n_states, std::size_t n_goals, std::size_t n_features,
                              std::vector<double> features, double v_max) {
  require(n_features > 0, "ValueClass: need at least one feature");
  require(features.size() == n_states * n_goals * n_features, "ValueClass: feature table has wrong size");
  for (std::size_t row = 0; row < n_states * n_goals; ++row) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n_features; ++j) {
      const double x = features[row * n_features + j];
      require(x >= 0.0 && std::isfinite(x), "ValueClass: features must be nonnegative");
      sum += x;
    }
    require(sum <= 1.0 + 1e-12, "ValueClass: feature rows must sum to at most one");
  }
  return ValueClass(Kind::linear, n_states, n_goals, n_features, std::move(features), v_max);
}

ValueFn ValueClass::realize(std::span<const double> params) const {
  require(params.size() == n_params_, "ValueClass::realize: wrong parameter count");
  std::vector<double> v(n_states_ * n_goals_);
  if (kind_ == Kind::tabular) {
    v.assign(params.begin(), params.end());
  } else {
    for (std::size_t row = 0; row < v.size(); ++row) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n_params_; ++j) acc += features_[row * n_params_ + j] * params[j];
      v[row] = acc;
    }
  }
  // rounding in the feature sum can overshoot the box by an ulp
  for (double& x : v) x = std::clamp(x, 0.0, v_max_);
  return ValueFn(n_states_, n_goals_, std::move(v), v_max_);
}

void ValueClass::append_features(std::size_t s, std::size_t g, double scale, std::vector<std::size_t>& idx,
                                 std::vector<double>& coef) const {
  const std::size_t row = s * n_goals_ + g;
  if (kind_ == Kind::tabular) {
    idx.push_back(row);
    coef.push_back(scale);
    return;
  }
  for (std::size_t j = 0; j < n_params_; ++j) {
    const double phi = features_[row * n_params_ + j];
    if (phi == 0.0) continue;
    idx.push_back(j);
    coef.push_back(scale * phi);
  }
}

std::vector<double> ValueClass::pullback(std::span<const double> table_grad) const {
  require(table_grad.size() == n_states_ * n_goals_, "ValueClass::pullback: wrong gradient size");
  if (kind_ == Kind::tabular) return {table_grad.begin(), table_grad.end()};
  std::vector<double> out(n_params_, 0.0);
  for (std::size_t row = 0; row < table_grad.size(); ++row)
    for (std::size_t j = 0; j < n_params_; ++j) out[j] += features_[row * n_params_ + j] * table_grad[row];
  return out;
}

TransitionModel::TransitionModel(std::size_t n_states, std::size_t n_actions, std::vector<double> p_hat,
                                 std::vector<bool> visited)
    : n_states_(n_states), n_actions_(n_actions), p_(std::move(p_hat)), visited_(std::move(visited)) {
  require(p_.size() == n_states_ * n_actions_ * n_states_, "TransitionModel: table has wrong size");
  require(visited_.size() == n_states_ * n_actions_, "TransitionModel: visit mask has wrong size");
  for (std::size_t sa = 0; sa < n_states_ * n_actions_; ++sa) {
    double total = 0.0;
    for (std::size_t t = 0; t < n_states_; ++t) {
      const double x = p_[sa * n_states_ + t];
      require(x >= 0.0, "TransitionModel: negative probability");
      total += x;
    }
    require(std::abs(total - 1.0) <= 1e-12, "TransitionModel: row does not sum to one");
  }
}

TransitionModel TransitionModel::exact(const GoalMdp& mdp) {
  return TransitionModel(mdp.n_states(), mdp.n_actions(), mdp.tables().transition,
                         std::vector<bool>(mdp.n_states() * mdp.n_actions(), true));
}

TransitionModel fit_transition_mle(const OfflineDataset& data, std::size_t n_states, std::size_t n_actions) {
  require(data.shape().n_states == n_states && data.shape().n_actions == n_actions,
          "fit_transition_mle: dimensions do not match the dataset");
  const std::size_t S = n_states, A = n_actions;
  std::vector<double> counts(S * A * S, 0.0), totals(S * A, 0.0);
  for (const auto& t : data.records()) {
    counts[(t.s * A + t.a) * S + t.s_next] += t.weight;
    totals[t.s * A + t.a] += t.weight;
  }
  std::vector<bool> visited(S * A, false);
  for (std::size_t sa = 0; sa < S * A; ++sa) {
    double* row = counts.data() + sa * S;
    if (totals[sa] > 0.0) {
      visited[sa] = true;
      for (std::size_t t = 0; t < S; ++t) row[t] /= totals[sa];
    } else {
      std::fill(row, row + S, 1.0 / static_cast<double>(S));
    }
  }
  return TransitionModel(S, A, std::move(counts), std::move(visited));
}

double model_tv_squared_error(const TransitionModel& model, const GoalMdp& mdp, const OccupancyMeasure& mu) {
  require(model.n_states() == mdp.n_states() && model.n_actions() == mdp.n_actions(),
          "model_tv_squared_error: dimension mismatch");
  double acc = 0.0;
  for (std::size_t s = 0; s < mdp.n_states(); ++s)
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      double weight = 0.0;
      for (std::size_t g = 0; g < mdp.n_goals(); ++g) weight += mdp.goal_weight(g) * mu(s, a, g);
      if (weight == 0.0) continue;
      double tv = 0.0;
      for (std::size_t t = 0; t < mdp.n_states(); ++t) tv += std::abs(model(s, a, t) - mdp.transition(s, a, t));
      tv *= 0.5;
      acc += weight * tv * tv;
    }
  return acc;
}

std::vector<double> record_advantage(const OfflineDataset& data, const ValueFn& v, double alpha) {
  check_value(data, v);
  const double gamma = data.shape().discount;
  std::vector<double> u(data.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const auto& t = data.records()[i];
    u[i] = t.r + gamma * v(t.s_next, t.g) - v(t.s, t.g) + alpha;
  }
  return u;
}

std::vector<double> record_advantage(const OfflineDataset& data, const ValueFn& v, double alpha,
                                     const TransitionModel& model) {
  check_value(data, v);
  check_model(data, model);
  const double gamma = data.shape().discount;
  std::vector<double> u(data.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const auto& t = data.records()[i];
    u[i] = t.r + gamma * model_next_value(model, v, t.s, t.a, t.g) - v(t.s, t.g) + alpha;
  }
  return u;
}

DualTerms empirical_dual_terms_deterministic(const OfflineDataset& data, const InitDataset& init,
                                             double alpha, const ValueFn& v) {
  check_datasets(data, init, alpha);
  return terms_from_records(data, init, alpha, v, record_advantage(data, v, alpha));
}

DualTerms empirical_dual_terms_stochastic(const OfflineDataset& data, const InitDataset& init, double alpha,
                                          const TransitionModel& model, const ValueFn& v) {
  check_datasets(data, init, alpha);
  return terms_from_records(data, init, alpha, v, record_advantage(data, v, alpha, model));
}

double empirical_dual_deterministic(const OfflineDataset& data, const InitDataset& init, double alpha,
                                    const ValueFn& v) {
  return empirical_dual_terms_deterministic(data, init, alpha, v).total();
}

double empirical_dual_stochastic(const OfflineDataset& data, const InitDataset& init, double alpha,
                                 const TransitionModel& model, const ValueFn& v) {
  return empirical_dual_terms_stochastic(data, init, alpha, model, v).total();
}

std::vector<double> empirical_dual_gradient_deterministic(const OfflineDataset& data,
                                                          const InitDataset& init, double alpha,
                                                          const ValueFn& v) {
  check_datasets(data, init, alpha);
  const double gamma = data.shape().discount;
  const std::size_t G = data.shape().n_goals;
  std::vector<double> grad = init_gradient(init, alpha, gamma);
  const std::vector<double> u = record_advantage(data, v, alpha);
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] <= 0.0) continue;
    const auto& t = data.records()[i];
    const double w = t.weight * u[i] / data.total_weight();
    grad[t.s_next * G + t.g] += gamma * w;
    grad[t.s * G + t.g] -= w;
  }
  return grad;
}

std::vector<double> empirical_dual_gradient_stochastic(const OfflineDataset& data, const InitDataset& init,
                                                       double alpha, const TransitionModel& model,
                                                       const ValueFn& v) {
  check_datasets(data, init, alpha);
  const double gamma = data.shape().discount;
  const std::size_t G = data.shape().n_goals;
  std::vector<double> grad = init_gradient(init, alpha, gamma);
  const std::vector<double> u = record_advantage(data, v, alpha, model);
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] <= 0.0) continue;
    const auto& t = data.records()[i];
    const double w = t.weight * u[i] / data.total_weight();
    auto row = model.row(t.s, t.a);
    for (std::size_t next = 0; next < row.size(); ++next)
      if (row[next] != 0.0) grad[next * G + t.g] += gamma * w * row[next];
    grad[t.s * G + t.g] -= w;
  }
  return grad;
}

HingeQuadratic empirical_program_deterministic(const OfflineDataset& data, const InitDataset& init,
                                               double alpha, const ValueClass& cls) {
  check_datasets(data, init, alpha);
  check_class(data, cls);
  const double gamma = data.shape().discount;
  HingeQuadratic program(cls.n_params());
  add_init_terms(program, init, alpha, gamma, cls);

  // (s, s', g, r) determines the row
  std::map<std::tuple<std::size_t, std::size_t, std::size_t, double>, double> merged;
  for (const auto& t : data.records()) merged[{t.s, t.s_next, t.g, t.r}] += t.weight;
  std::vector<std::size_t> idx;
  std::vector<double> coef;
  for (const auto& [key, w] : merged) {
    const auto& [s, next, g, r] = key;
    idx.clear();
    coef.clear();
    cls.append_features(s, g, -1.0, idx, coef);
    cls.append_features(next, g, gamma, idx, coef);
    program.add_row(idx, coef, r + alpha, w / data.total_weight());
  }
  return program;
}

HingeQuadratic empirical_program_stochastic(const OfflineDataset& data, const InitDataset& init,
                                            double alpha, const ValueClass& cls, const TransitionModel& model) {
  check_datasets(data, init, alpha);
  check_class(data, cls);
  check_model(data, model);
  const double gamma = data.shape().discount;
  HingeQuadratic program(cls.n_params());
  add_init_terms(program, init, alpha, gamma, cls);

  // the model replaces s', so (s, a, g, r) determines the row
  std::map<std::tuple<std::size_t, std::size_t, std::size_t, double>, double> merged;
  for (const auto& t : data.records()) merged[{t.s, t.a, t.g, t.r}] += t.weight;
  std::vector<std::size_t> idx;
  std::vector<double> coef;
  for (const auto& [key, w] : merged) {
    const auto& [s, a, g, r] = key;
    idx.clear();
    coef.clear();
    cls.append_features(s, g, -1.0, idx, coef);
    auto row = model.row(s, a);
    for (std::size_t next = 0; next < row.size(); ++next)
      if (row[next] != 0.0) cls.append_features(next, g, gamma * row[next], idx, coef);
    program.add_row(idx, coef, r + alpha, w / data.total_weight());
  }
  return program;
}

VFit fit_v_deterministic(const OfflineDataset& data, const InitDataset& init, double alpha,
                         const ValueClass& cls, const BoxSolveOptions& options) {
  VFit fit = finish_fit(empirical_program_deterministic(data, init, alpha, cls), cls, options);
  fit.u_records = record_advantage(data, fit.v, alpha);
  return fit;
}

VFit fit_v_stochastic(const OfflineDataset& data, const InitDataset& init, double alpha,
                      const ValueClass& cls, const TransitionModel& model, const BoxSolveOptions& options) {
  VFit fit = finish_fit(empirical_program_stochastic(data, init, alpha, cls, model), cls, options);
  fit.u_records = record_advantage(data, fit.v, alpha, model);
  return fit;
}

}  // namespace vpflow
