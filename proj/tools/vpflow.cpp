// vpflow command-line driver.

#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <tuple>

#include "CLI11.hpp"
#include "vpflow/data.hpp"
#include "vpflow/error.hpp"
#include "vpflow/generators.hpp"
#include "vpflow/harness.hpp"
#include "vpflow/oracle.hpp"
#include "vpflow/plearn.hpp"
#include "vpflow/serialize.hpp"
#include "vpflow/vlearn.hpp"

using namespace vpflow;

namespace {

OccupancyMeasure load_mu(const GoalMdp& mdp, const std::string& mu_path, const std::string& behavior) {
  if (!mu_path.empty()) return occupancy_from_json(read_json(mu_path));
  return occupancy_of_policy(mdp, make_behavior(mdp, behavior));
}

void cmd_gen_mdp(const std::string& kind, std::size_t w, std::size_t h, double slip, std::size_t n,
                 const RandomMdpOptions& random, std::uint64_t seed, const std::string& out) {
  auto mdp = [&]() -> GoalMdp {
    if (kind == "gridworld") return gridworld(w, h, random.discount);
    if (kind == "noisy-gridworld") return noisy_gridworld(w, h, slip, random.discount);
    if (kind == "random-chain") return random_chain(n, random.discount, seed);
    if (kind == "random") return random_mdp(random, seed);
    throw InputError("gen-mdp: unknown kind " + kind);
  }();
  write_json(out, to_json(mdp));
}

void cmd_gen_data(const std::string& mdp_path, const std::string& behavior, std::size_t n, std::size_t n0,
                  std::uint64_t seed, bool population, const std::string& prefix) {
  const GoalMdp mdp = goal_mdp_from_json(read_json(mdp_path));
  const Policy pi = make_behavior(mdp, behavior);
  const GeneratedData gen = population ? population_dataset(mdp, pi) : generate_dataset(mdp, pi, n, n0, seed);
  save(prefix + ".d.jsonl", gen.data);
  save(prefix + ".d0.jsonl", gen.init);
  write_json(prefix + ".mu.json", to_json(gen.mu));
}

void cmd_solve_oracle(const std::string& mdp_path, const std::string& mu_path, const std::string& behavior,
                      double alpha, const std::string& out) {
  const GoalMdp mdp = goal_mdp_from_json(read_json(mdp_path));
  const OccupancyMeasure mu = load_mu(mdp, mu_path, behavior);
  const OracleResult res = solve_oracle(mdp, mu, alpha);
  const double j_opt = exact_optimal_policy(mdp).j;
  const RegularizationBias bias = regularization_bias(res.solution, j_opt);
  Json j = to_json(res.solution);
  j["j_opt"] = j_opt;
  j["regularization_bias"] = Json{{"gap", bias.gap}, {"bound", bias.bound}};
  j["primal_report"] = to_json(res.primal_report);
  j["dual_report"] = to_json(res.dual_report);
  write_json(out, j);
  if (!res.primal_report.converged || !res.dual_report.converged)
    std::cerr << "warning: oracle solve did not reach tolerance\n";
}

void cmd_train_v(const std::string& prefix, double alpha, const std::string& dynamics, const std::string& cls_spec,
                 std::uint64_t seed, bool split, const std::string& out) {
  require(dynamics == "det" || dynamics == "stoch", "train-v: dynamics must be det or stoch");
  const OfflineDataset all = load_offline(prefix + ".d.jsonl");
  const InitDataset init = load_init(prefix + ".d0.jsonl");
  const auto& shape = all.shape();
  const double v_max = 1.0 / (1.0 - shape.discount);

  std::vector<std::size_t> fit_idx, pi_idx;
  if (split) {
    std::tie(fit_idx, pi_idx) = split_indices(all.size(), seed);
  } else {
    fit_idx.resize(all.size());
    std::iota(fit_idx.begin(), fit_idx.end(), std::size_t{0});
    pi_idx = fit_idx;
  }
  const OfflineDataset fit_data = subset(all, fit_idx), pi_data = subset(all, pi_idx);

  const ValueClass cls = [&] {
    if (cls_spec == "tabular") return ValueClass::tabular(shape.n_states, shape.n_goals, v_max);
    require(cls_spec.rfind("linear:", 0) == 0, "train-v: class must be tabular or linear:<features-file>");
    return value_class_from_json(read_json(cls_spec.substr(7)), v_max);
  }();

  VFit fit = [&] {
    if (dynamics == "det") {
      VFit f = fit_v_deterministic(fit_data, init, alpha, cls);
      f.u_records = record_advantage(pi_data, f.v, alpha);
      return f;
    }
    const TransitionModel model = fit_transition_mle(fit_data, shape.n_states, shape.n_actions);
    VFit f = fit_v_stochastic(fit_data, init, alpha, cls, model);
    f.u_records = record_advantage(pi_data, f.v, alpha, model);
    return f;
  }();

  write_json(out, Json{{"format", "vpflow.train_v/1"},
                       {"alpha", alpha},
                       {"dynamics", dynamics},
                       {"class", cls_spec},
                       {"split", split},
                       {"seed", seed},
                       {"objective", fit.objective},
                       {"value", to_json(fit.v)},
                       {"params", fit.params},
                       {"report", to_json(fit.report)},
                       {"u_indices", pi_idx},
                       {"u", fit.u_records}});
  if (!fit.report.converged) std::cerr << "warning: V-learning did not reach tolerance\n";
}

void cmd_train_pi(const std::string& prefix, const std::string& u_path, double alpha, double epsilon,
                  const std::string& out) {
  const OfflineDataset all = load_offline(prefix + ".d.jsonl");
  const Json u = read_json(u_path);
  require(u.value("format", std::string{}) == "vpflow.train_v/1", "train-pi: --u must be train-v output");
  require(u.at("alpha").get<double>() == alpha, "train-pi: alpha differs from the one used in train-v");
  const auto idx = u.at("u_indices").get<std::vector<std::size_t>>();
  const auto values = u.at("u").get<std::vector<double>>();
  const OfflineDataset data = subset(all, idx);
  const auto& shape = all.shape();
  const PolicyClass cls(shape.n_states, shape.n_goals, shape.n_actions, epsilon);
  const PolicyFit fit = fit_policy(data, values, alpha, cls);
  write_json(out, Json{{"format", "vpflow.train_pi/1"},
                       {"alpha", alpha},
                       {"epsilon", epsilon},
                       {"degenerate", fit.degenerate},
                       {"report", to_json(fit.report)},
                       {"policy", to_json(fit.policy)}});
  if (fit.degenerate) std::cerr << "warning: every weight is zero; returning the uniform policy\n";
}

void cmd_evaluate(const std::string& mdp_path, const std::string& policy_path, const std::string& mu_path,
                  const std::string& behavior, double alpha, const std::string& out) {
  const GoalMdp mdp = goal_mdp_from_json(read_json(mdp_path));
  const OccupancyMeasure mu = load_mu(mdp, mu_path, behavior);
  Json pj = read_json(policy_path);
  if (pj.contains("policy")) pj = pj.at("policy");
  const Policy pi = policy_from_json(pj);
  const RegularizedSolution oracle = solve_oracle(mdp, mu, alpha).solution;
  const double j_opt = exact_optimal_policy(mdp).j;
  const Suboptimality s = evaluate_suboptimality(mdp, pi, oracle, j_opt);
  const Json j{{"alpha", alpha},
               {"j_opt", j_opt},
               {"j_reg_opt", oracle.j_reg_opt},
               {"j_hat", s.j_hat},
               {"subopt_vs_opt", s.subopt_vs_opt},
               {"subopt_vs_reg", s.subopt_vs_reg},
               {"tv_to_reg_opt", s.tv_to_reg_opt}};
  if (out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_json(out, j);
  }
}

void cmd_sweep(const std::string& config_path) {
  const ExperimentConfig config = load_config(config_path);
  const SweepResult res = run_sweep(config);
  write_summary(std::cout, res.summary);
  std::size_t failed = 0;
  for (const auto& r : res.rows) failed += r.status == "ok" ? 0 : 1;
  if (failed > 0) std::cerr << failed << " of " << res.rows.size() << " cells did not finish cleanly\n";
}

void cmd_plot(const std::string& results, const std::string& out) {
  std::ifstream is(results, std::ios::binary);
  require(static_cast<bool>(is), "cannot open " + results);
  const auto rows = read_results_csv(is);
  std::ofstream os(out, std::ios::binary);
  require(static_cast<bool>(os), "cannot write " + out);
  emit_plotdata(os, rows);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"offline goal-conditioned RL: oracle solver, VP-learning and experiment sweeps"};
  app.require_subcommand(1);

  std::string kind = "gridworld", out, mdp_path, behavior = "shortest-path:0.3", mu_path, prefix;
  std::size_t w = 4, h = 4, chain_n = 5, n = 1000, n0 = 0;
  double slip = 0.2, alpha = 0.0, epsilon = 1e-3;
  std::uint64_t seed = 0;
  bool population = false, no_split = false;
  RandomMdpOptions random;

  auto* gen_mdp = app.add_subcommand("gen-mdp", "write a built-in MDP instance");
  gen_mdp->set_help_flag("--help", "Print this help message and exit");  // frees -h for --h
  gen_mdp->add_option("--kind", kind, "gridworld | noisy-gridworld | random-chain | random")->capture_default_str();
  gen_mdp->add_option("--w", w, "grid width")->capture_default_str();
  gen_mdp->add_option("--h", h, "grid height")->capture_default_str();
  gen_mdp->add_option("--slip", slip, "slip probability (noisy-gridworld)")->capture_default_str();
  gen_mdp->add_option("--n", chain_n, "chain length (random-chain)")->capture_default_str();
  gen_mdp->add_option("--states", random.n_states, "states (random)")->capture_default_str();
  gen_mdp->add_option("--actions", random.n_actions, "actions (random)")->capture_default_str();
  gen_mdp->add_option("--goals", random.n_goals, "goals (random)")->capture_default_str();
  gen_mdp->add_flag("--deterministic", random.deterministic, "point-mass transitions (random)");
  gen_mdp->add_option("--gamma", random.discount, "discount")->capture_default_str();
  gen_mdp->add_option("--seed", seed, "seed (random kinds)")->capture_default_str();
  gen_mdp->add_option("--out", out, "output JSON")->required();

  auto* gen_behavior = app.add_subcommand("gen-behavior", "write a behavior policy");
  std::string behavior_kind = "shortest-path";
  double behavior_eps = 0.3;
  gen_behavior->add_option("--mdp", mdp_path)->required();
  gen_behavior->add_option("--kind", behavior_kind, "shortest-path | uniform | random")->capture_default_str();
  gen_behavior->add_option("--epsilon", behavior_eps, "uniform mixture weight")->capture_default_str();
  gen_behavior->add_option("--seed", seed)->capture_default_str();
  gen_behavior->add_option("--out", out)->required();

  auto* gen_data = app.add_subcommand("gen-data", "sample an offline dataset");
  gen_data->add_option("--mdp", mdp_path)->required();
  gen_data->add_option("--behavior", behavior, "policy JSON or shortest-path:<eps> | uniform | random:<eps>:<seed>")
      ->capture_default_str();
  gen_data->add_option("--n", n, "transition tuples")->capture_default_str();
  gen_data->add_option("--n0", n0, "initial pairs (default: n)");
  gen_data->add_option("--seed", seed)->capture_default_str();
  gen_data->add_flag("--population", population, "write the exhaustive probability-weighted dataset");
  gen_data->add_option("--out", prefix, "output prefix")->required();

  auto* solve = app.add_subcommand("solve-oracle", "solve the regularized program and its dual exactly");
  solve->add_option("--mdp", mdp_path)->required();
  solve->add_option("--alpha", alpha)->required();
  solve->add_option("--mu", mu_path, "behavior occupancy JSON (from gen-data)");
  solve->add_option("--behavior", behavior, "used when --mu is absent")->capture_default_str();
  solve->add_option("--out", out)->required();

  auto* train_v = app.add_subcommand("train-v", "V-learning");
  std::string dynamics = "det", cls_spec = "tabular";
  train_v->add_option("--data", prefix, "dataset prefix")->required();
  train_v->add_option("--alpha", alpha)->required();
  train_v->add_option("--dynamics", dynamics, "det | stoch")->capture_default_str();
  train_v->add_option("--class", cls_spec, "tabular | linear:<features-file>")->capture_default_str();
  train_v->add_option("--seed", seed, "split seed")->capture_default_str();
  train_v->add_flag("--no-split", no_split, "fit V and the policy on the same records");
  train_v->add_option("--out", out)->required();

  auto* train_pi = app.add_subcommand("train-pi", "policy learning from train-v output");
  train_pi->add_option("--data", prefix, "dataset prefix")->required();
  train_pi->add_option("--u", mu_path, "train-v output JSON")->required();
  train_pi->add_option("--alpha", alpha)->required();
  train_pi->add_option("--epsilon", epsilon, "uniform mixture weight of the policy class")->capture_default_str();
  train_pi->add_option("--out", out)->required();

  auto* evaluate = app.add_subcommand("evaluate", "exact suboptimality of a policy");
  std::string policy_path;
  evaluate->add_option("--mdp", mdp_path)->required();
  evaluate->add_option("--policy", policy_path, "policy JSON or train-pi output")->required();
  evaluate->add_option("--alpha", alpha)->required();
  evaluate->add_option("--mu", mu_path, "behavior occupancy JSON");
  evaluate->add_option("--behavior", behavior, "used when --mu is absent")->capture_default_str();
  evaluate->add_option("--out", out, "output JSON (default: stdout)");

  auto* sweep = app.add_subcommand("sweep", "run an alpha x N x seed grid");
  std::string config_path;
  sweep->add_option("--config", config_path)->required();

  auto* plot = app.add_subcommand("plot", "regenerate curve data from results.csv");
  std::string results;
  plot->add_option("--results", results)->required();
  plot->add_option("--out", out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen_mdp->parsed()) {
      cmd_gen_mdp(kind, w, h, slip, chain_n, random, seed, out);
    } else if (gen_behavior->parsed()) {
      const GoalMdp mdp = goal_mdp_from_json(read_json(mdp_path));
      const Policy pi = [&] {
        if (behavior_kind == "shortest-path") return shortest_path_behavior(mdp, behavior_eps);
        if (behavior_kind == "random") return random_behavior(mdp, behavior_eps, seed);
        require(behavior_kind == "uniform", "gen-behavior: unknown kind " + behavior_kind);
        return Policy::uniform(mdp.n_states(), mdp.n_goals(), mdp.n_actions());
      }();
      write_json(out, to_json(pi));
    } else if (gen_data->parsed()) {
      cmd_gen_data(mdp_path, behavior, n, n0 == 0 ? n : n0, seed, population, prefix);
    } else if (solve->parsed()) {
      cmd_solve_oracle(mdp_path, mu_path, behavior, alpha, out);
    } else if (train_v->parsed()) {
      cmd_train_v(prefix, alpha, dynamics, cls_spec, seed, !no_split, out);
    } else if (train_pi->parsed()) {
      cmd_train_pi(prefix, mu_path, alpha, epsilon, out);
    } else if (evaluate->parsed()) {
      cmd_evaluate(mdp_path, policy_path, mu_path, behavior, alpha, out);
    } else if (sweep->parsed()) {
      cmd_sweep(config_path);
    } else if (plot->parsed()) {
      cmd_plot(results, out);
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const vpflow::Json::exception& e) {
    std::cerr << "error: malformed input: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
