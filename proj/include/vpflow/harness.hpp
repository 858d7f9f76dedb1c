#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "vpflow/mdp.hpp"
#include "vpflow/oracle.hpp"

namespace vpflow {

enum class Dynamics { det, stoch };
enum class AlphaSchedule { grid, theory };

struct ExperimentConfig {
  std::string mdp_file;
  /// shortest-path:<eps> | uniform | random:<eps>:<seed> | path to a policy JSON
  std::string behavior = "shortest-path:0.3";
  std::vector<double> alpha_grid{0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1, 2};
  std::vector<std::size_t> n_grid{1000, 10000, 100000};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  Dynamics dynamics = Dynamics::det;
  double epsilon_floor = 1e-3;
  bool split = true;
  /// Replace sampled data by the exhaustive probability-weighted dataset.
  bool population = false;
  /// theory: alpha = alpha_ref * (n / 1e5)^(-1/12) per n, alpha_grid unused.
  AlphaSchedule schedule = AlphaSchedule::grid;
  double alpha_ref = 0.1;
  /// 0 means one thread per hardware core.
  std::size_t threads = 0;
  std::string out_dir = ".";
  bool oracle_cache = true;
  bool record_timing = false;
};

/// Flat "key = value" lines; '#' starts a comment. Relative paths resolve
/// against base_dir.
ExperimentConfig parse_config(std::istream& is, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);
void validate(const ExperimentConfig& config);

/// alpha_ref * (n / 1e5)^(-1/12)
double theory_alpha(double alpha_ref, std::size_t n);

Policy make_behavior(const GoalMdp& mdp, const std::string& spec);

/// Everything about an instance that does not depend on alpha or the data.
struct Environment {
  GoalMdp mdp;
  Policy behavior;
  OccupancyMeasure mu;
  double j_opt = 0.0;
};

Environment make_environment(GoalMdp mdp, Policy behavior);

struct Cell {
  double alpha = 0.0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
};

struct CellOptions {
  Dynamics dynamics = Dynamics::det;
  double epsilon_floor = 1e-3;
  bool split = true;
  bool population = false;
};

struct ResultRow {
  double alpha = 0.0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double j_opt = 0.0;
  double j_reg_opt = 0.0;
  double j_hat = 0.0;
  double subopt_vs_opt = 0.0;
  double subopt_vs_reg = 0.0;
  double c_star_alpha = 0.0;
  double tv_to_reg_opt = 0.0;
  double duality_gap = 0.0;
  bool v_converged = false;
  bool degenerate = false;
  /// "ok" or a description of what failed
  std::string status = "ok";
  double wall_ms = 0.0;
};

/// generate -> split -> fit V -> U-hat on the policy half -> fit policy ->
/// exact evaluation. Deterministic in (cell, options); the dataset depends on
/// (seed, n) only, so cells differing in alpha share their data.
ResultRow run_cell(const Environment& env, const RegularizedSolution& oracle, const Cell& cell,
                   const CellOptions& options);

/// Oracle solutions keyed by (mdp, mu, alpha), optionally persisted as JSON
/// files in a directory. Thread-safe.
class OracleCache {
 public:
  explicit OracleCache(std::string dir = {});
  std::shared_ptr<const RegularizedSolution> get(const Environment& env, double alpha);
  static std::string key(const Environment& env, double alpha);

 private:
  std::string dir_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const RegularizedSolution>> memo_;
};

struct SummaryRow {
  double alpha = 0.0;
  std::size_t n = 0;
  std::size_t count = 0;
  double median_subopt_vs_opt = 0.0;
  double iqr_subopt_vs_opt = 0.0;
  double median_subopt_vs_reg = 0.0;
  double median_tv_to_reg_opt = 0.0;
};

struct SweepResult {
  std::vector<ResultRow> rows;
  std::vector<SummaryRow> summary;
};

std::vector<Cell> sweep_cells(const ExperimentConfig& config);

/// Runs every cell, sorted by (alpha, n, seed).
SweepResult run_sweep(const ExperimentConfig& config, const Environment& env, OracleCache& cache);
/// Loads the MDP and behavior named in the config, runs the sweep and writes
/// results.csv, curves.tsv and summary.tsv into out_dir.
SweepResult run_sweep(const ExperimentConfig& config);

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows, bool with_timing);
std::vector<ResultRow> read_results_csv(std::istream& is);
void write_summary(std::ostream& os, const std::vector<SummaryRow>& summary);

/// One block per alpha: n, median subopt_vs_opt, lower and upper quartile, IQR.
void emit_plotdata(std::ostream& os, const std::vector<ResultRow>& rows);

/// Linear-interpolation quantile of an unsorted sample.
double quantile(std::vector<double> xs, double q);
double median(std::vector<double> xs);

}  // namespace vpflow
