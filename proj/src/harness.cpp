#include "vpflow/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "vpflow/data.hpp"
#include "vpflow/error.hpp"
#include "vpflow/generators.hpp"
#include "vpflow/plearn.hpp"
#include "vpflow/rng.hpp"
#include "vpflow/serialize.hpp"
#include "vpflow/vlearn.hpp"

namespace fs = std::filesystem;

namespace vpflow {

namespace {

constexpr std::uint64_t kSplitSalt = 0x73706c6974ULL;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& s) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used == s.size() && !s.empty(), "config: " + key + ": not a number: " + s);
  return x;
}

std::uint64_t parse_u64(const std::string& key, const std::string& s) {
  std::size_t used = 0;
  std::uint64_t x = 0;
  if (!s.empty() && s[0] != '-') {
    try {
      x = std::stoull(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
  }
  require(used == s.size() && !s.empty(), "config: " + key + ": not a nonnegative integer: " + s);
  return x;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw InputError("config: " + key + ": not a boolean: " + s);
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string csv_safe(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ' ';
  return s;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ResultRow failed_row(const Cell& cell, const std::string& what) {
  ResultRow row;
  row.alpha = cell.alpha;
  row.n = cell.n;
  row.seed = cell.seed;
  const double nan = std::nan("");
  row.j_opt = row.j_reg_opt = row.j_hat = row.subopt_vs_opt = row.subopt_vs_reg = nan;
  row.c_star_alpha = row.tv_to_reg_opt = row.duality_gap = nan;
  row.status = "error: " + csv_safe(what);
  return row;
}

template <class F>
void parallel_for(std::size_t count, std::size_t threads, F&& f) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) f(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

ExperimentConfig parse_config(std::istream& is, const std::string& base_dir) {
  ExperimentConfig c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, "config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key == "mdp") {
      c.mdp_file = resolve(base_dir, value);
    } else if (key == "behavior") {
      c.behavior = value.find(':') == std::string::npos && value != "uniform" ? resolve(base_dir, value) : value;
    } else if (key == "alphas") {
      c.alpha_grid.clear();
      for (const auto& x : split_list(value)) c.alpha_grid.push_back(parse_double(key, x));
    } else if (key == "ns") {
      c.n_grid.clear();
      for (const auto& x : split_list(value)) c.n_grid.push_back(parse_u64(key, x));
    } else if (key == "seeds") {
      c.seeds.clear();
      for (const auto& x : split_list(value)) c.seeds.push_back(parse_u64(key, x));
    } else if (key == "dynamics") {
      require(value == "det" || value == "stoch", "config: dynamics must be det or stoch");
      c.dynamics = value == "det" ? Dynamics::det : Dynamics::stoch;
    } else if (key == "epsilon") {
      c.epsilon_floor = parse_double(key, value);
    } else if (key == "split") {
      c.split = parse_bool(key, value);
    } else if (key == "population") {
      c.population = parse_bool(key, value);
    } else if (key == "alpha_schedule") {
      require(value == "grid" || value == "theory", "config: alpha_schedule must be grid or theory");
      c.schedule = value == "grid" ? AlphaSchedule::grid : AlphaSchedule::theory;
    } else if (key == "alpha_ref") {
      c.alpha_ref = parse_double(key, value);
    } else if (key == "threads") {
      c.threads = parse_u64(key, value);
    } else if (key == "out") {
      c.out_dir = resolve(base_dir, value);
    } else if (key == "oracle_cache") {
      c.oracle_cache = parse_bool(key, value);
    } else if (key == "record_timing") {
      c.record_timing = parse_bool(key, value);
    } else {
      throw InputError("config: unknown key " + key);
    }
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), "cannot open config " + path);
  const std::string base = fs::path(path).parent_path().string();
  return parse_config(is, base.empty() ? "." : base);
}

void validate(const ExperimentConfig& c) {
  require(!c.seeds.empty(), "config: seeds must not be empty");
  require(!c.n_grid.empty(), "config: ns must not be empty");
  for (auto n : c.n_grid) require(n >= 2, "config: every n must be at least 2");
  if (c.schedule == AlphaSchedule::grid) {
    require(!c.alpha_grid.empty(), "config: alphas must not be empty");
    for (double a : c.alpha_grid) require(a > 0.0 && std::isfinite(a), "config: alphas must be positive");
  } else {
    require(c.alpha_ref > 0.0 && std::isfinite(c.alpha_ref), "config: alpha_ref must be positive");
  }
  require(c.epsilon_floor > 0.0 && c.epsilon_floor < 1.0, "config: epsilon must lie in (0, 1)");
  std::set<std::uint64_t> unique(c.seeds.begin(), c.seeds.end());
  require(unique.size() == c.seeds.size(), "config: seeds must be distinct");
}

double theory_alpha(double alpha_ref, std::size_t n) {
  return alpha_ref * std::pow(static_cast<double>(n) / 1e5, -1.0 / 12.0);
}

Policy make_behavior(const GoalMdp& mdp, const std::string& spec) {
  if (spec == "uniform") return Policy::uniform(mdp.n_states(), mdp.n_goals(), mdp.n_actions());
  const auto parts = split_list(spec, ':');
  if (!parts.empty() && parts[0] == "shortest-path") {
    require(parts.size() == 2, "behavior: expected shortest-path:<epsilon>");
    return shortest_path_behavior(mdp, parse_double("behavior", parts[1]));
  }
  if (!parts.empty() && parts[0] == "random") {
    require(parts.size() == 3, "behavior: expected random:<epsilon>:<seed>");
    return random_behavior(mdp, parse_double("behavior", parts[1]), parse_u64("behavior", parts[2]));
  }
  Policy p = policy_from_json(read_json(spec));
  require(p.n_states() == mdp.n_states() && p.n_goals() == mdp.n_goals() && p.n_actions() == mdp.n_actions(),
          "behavior policy dimensions do not match the MDP");
  return p;
}

Environment make_environment(GoalMdp mdp, Policy behavior) {
  OccupancyMeasure mu = occupancy_of_policy(mdp, behavior);
  const double j_opt = exact_optimal_policy(mdp).j;
  return Environment{std::move(mdp), std::move(behavior), std::move(mu), j_opt};
}

ResultRow run_cell(const Environment& env, const RegularizedSolution& oracle, const Cell& cell,
                   const CellOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  try {
    require(oracle.alpha == cell.alpha, "run_cell: oracle solved for a different alpha");
    const GoalMdp& mdp = env.mdp;
    const std::uint64_t data_seed = derive_seed(cell.seed, cell.n);
    GeneratedData gen = options.population ? population_dataset(mdp, env.behavior)
                                           : generate_dataset(mdp, env.behavior, cell.n, cell.n, data_seed);

    const bool split = options.split && !options.population;
    std::optional<std::pair<OfflineDataset, OfflineDataset>> halves;
    if (split) halves = split_dataset(gen.data, derive_seed(data_seed, kSplitSalt));
    const OfflineDataset& v_data = split ? halves->first : gen.data;
    const OfflineDataset& pi_data = split ? halves->second : gen.data;

    const ValueClass cls = ValueClass::tabular(mdp.n_states(), mdp.n_goals(), mdp.v_max());
    VFit fit = [&] {
      if (options.dynamics == Dynamics::det) return fit_v_deterministic(v_data, gen.init, cell.alpha, cls);
      const TransitionModel model = fit_transition_mle(v_data, mdp.n_states(), mdp.n_actions());
      VFit f = fit_v_stochastic(v_data, gen.init, cell.alpha, cls, model);
      f.u_records = record_advantage(pi_data, f.v, cell.alpha, model);
      return f;
    }();
    if (options.dynamics == Dynamics::det) fit.u_records = record_advantage(pi_data, fit.v, cell.alpha);

    const PolicyClass pcls(mdp.n_states(), mdp.n_goals(), mdp.n_actions(), options.epsilon_floor);
    const PolicyFit pfit = fit_policy(pi_data, fit.u_records, cell.alpha, pcls);
    const Suboptimality sub = evaluate_suboptimality(mdp, pfit.policy, oracle, env.j_opt);

    ResultRow row;
    row.alpha = cell.alpha;
    row.n = cell.n;
    row.seed = cell.seed;
    row.j_opt = env.j_opt;
    row.j_reg_opt = oracle.j_reg_opt;
    row.j_hat = sub.j_hat;
    row.subopt_vs_opt = sub.subopt_vs_opt;
    row.subopt_vs_reg = sub.subopt_vs_reg;
    row.c_star_alpha = oracle.c_star_alpha;
    row.tv_to_reg_opt = sub.tv_to_reg_opt;
    row.duality_gap = oracle.duality_gap;
    row.v_converged = fit.report.converged;
    row.degenerate = pfit.degenerate;
    if (!fit.report.converged) row.status = "v-not-converged";
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return row;
  } catch (const std::exception& e) {
    return failed_row(cell, e.what());
  }
}

OracleCache::OracleCache(std::string dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) fs::create_directories(dir_);
}

std::string OracleCache::key(const Environment& env, double alpha) {
  const Json j{{"mdp", to_json(env.mdp)}, {"mu", env.mu.values()}, {"alpha", alpha}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

std::shared_ptr<const RegularizedSolution> OracleCache::get(const Environment& env, double alpha) {
  const std::string k = key(env, alpha);
  {
    std::lock_guard lock(mutex_);
    if (auto it = memo_.find(k); it != memo_.end()) return it->second;
  }
  std::shared_ptr<const RegularizedSolution> sol;
  const fs::path file = dir_.empty() ? fs::path{} : fs::path(dir_) / ("oracle-" + k + ".json");
  if (!dir_.empty() && fs::exists(file)) {
    sol = std::make_shared<const RegularizedSolution>(solution_from_json(read_json(file.string())));
    require(sol->alpha == alpha, "oracle cache entry " + file.string() + " has the wrong alpha");
  } else {
    sol = std::make_shared<const RegularizedSolution>(solve_oracle(env.mdp, env.mu, alpha).solution);
    if (!dir_.empty()) {
      const fs::path tmp = file.string() + ".tmp";
      write_json(tmp.string(), to_json(*sol));
      fs::rename(tmp, file);
    }
  }
  std::lock_guard lock(mutex_);
  return memo_.emplace(k, sol).first->second;
}

std::vector<Cell> sweep_cells(const ExperimentConfig& config) {
  validate(config);
  std::vector<Cell> cells;
  for (std::size_t n : config.n_grid)
    for (std::uint64_t seed : config.seeds) {
      if (config.schedule == AlphaSchedule::theory) {
        cells.push_back(Cell{theory_alpha(config.alpha_ref, n), n, seed});
      } else {
        for (double a : config.alpha_grid) cells.push_back(Cell{a, n, seed});
      }
    }
  std::sort(cells.begin(), cells.end(), [](const Cell& x, const Cell& y) {
    return std::tie(x.alpha, x.n, x.seed) < std::tie(y.alpha, y.n, y.seed);
  });
  for (std::size_t i = 1; i < cells.size(); ++i)
    require(std::tie(cells[i - 1].alpha, cells[i - 1].n, cells[i - 1].seed) !=
                std::tie(cells[i].alpha, cells[i].n, cells[i].seed),
            "config: duplicate (alpha, n, seed) cell");
  return cells;
}

SweepResult run_sweep(const ExperimentConfig& config, const Environment& env, OracleCache& cache) {
  const std::vector<Cell> cells = sweep_cells(config);
  std::vector<double> alphas;
  for (const auto& c : cells) alphas.push_back(c.alpha);
  alphas.erase(std::unique(alphas.begin(), alphas.end()), alphas.end());

  std::vector<std::shared_ptr<const RegularizedSolution>> oracles(alphas.size());
  std::vector<std::string> oracle_errors(alphas.size());
  parallel_for(alphas.size(), config.threads, [&](std::size_t i) {
    try {
      oracles[i] = cache.get(env, alphas[i]);
    } catch (const std::exception& e) {
      oracle_errors[i] = e.what();
    }
  });

  const CellOptions options{config.dynamics, config.epsilon_floor, config.split, config.population};
  SweepResult result;
  result.rows.resize(cells.size());
  parallel_for(cells.size(), config.threads, [&](std::size_t i) {
    const std::size_t k =
        static_cast<std::size_t>(std::lower_bound(alphas.begin(), alphas.end(), cells[i].alpha) - alphas.begin());
    if (!oracles[k]) {
      result.rows[i] = failed_row(cells[i], "oracle: " + oracle_errors[k]);
      return;
    }
    result.rows[i] = run_cell(env, *oracles[k], cells[i], options);
    if (!config.record_timing) result.rows[i].wall_ms = 0.0;
  });
  result.summary = summarize(result.rows);
  return result;
}

SweepResult run_sweep(const ExperimentConfig& config) {
  validate(config);
  require(!config.mdp_file.empty(), "config: mdp is required");
  GoalMdp mdp = goal_mdp_from_json(read_json(config.mdp_file));
  Policy behavior = make_behavior(mdp, config.behavior);
  const Environment env = make_environment(std::move(mdp), std::move(behavior));
  fs::create_directories(config.out_dir);
  OracleCache cache(config.oracle_cache ? (fs::path(config.out_dir) / "oracle-cache").string() : std::string{});
  SweepResult result = run_sweep(config, env, cache);

  auto open = [&](const char* name) {
    std::ofstream os(fs::path(config.out_dir) / name, std::ios::binary);
    require(static_cast<bool>(os), std::string("cannot write ") + name);
    return os;
  };
  {
    auto os = open("results.csv");
    write_results_csv(os, result.rows, config.record_timing);
  }
  {
    auto os = open("curves.tsv");
    emit_plotdata(os, result.rows);
  }
  {
    auto os = open("summary.tsv");
    write_summary(os, result.summary);
  }
  return result;
}

double quantile(std::vector<double> xs, double q) {
  require(!xs.empty(), "quantile: empty sample");
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

double median(std::vector<double> xs) { return quantile(std::move(xs), 0.5); }

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  std::map<std::pair<double, std::size_t>, std::vector<const ResultRow*>> groups;
  for (const auto& r : rows)
    if (r.status == "ok" || r.status == "v-not-converged") groups[{r.alpha, r.n}].push_back(&r);
  std::vector<SummaryRow> out;
  for (const auto& [key, group] : groups) {
    std::vector<double> opt, reg, tv;
    for (const auto* r : group) {
      opt.push_back(r->subopt_vs_opt);
      reg.push_back(r->subopt_vs_reg);
      tv.push_back(r->tv_to_reg_opt);
    }
    SummaryRow s;
    s.alpha = key.first;
    s.n = key.second;
    s.count = group.size();
    s.median_subopt_vs_opt = median(opt);
    s.iqr_subopt_vs_opt = quantile(opt, 0.75) - quantile(opt, 0.25);
    s.median_subopt_vs_reg = median(reg);
    s.median_tv_to_reg_opt = median(tv);
    out.push_back(s);
  }
  return out;
}

namespace {

constexpr const char* kCsvHeader =
    "alpha,n,seed,j_opt,j_reg_opt,j_hat,subopt_vs_opt,subopt_vs_reg,c_star_alpha,tv_to_reg_opt,"
    "duality_gap,v_converged,degenerate,status";

}  // namespace

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows, bool with_timing) {
  os << kCsvHeader << (with_timing ? ",wall_ms" : "") << '\n';
  for (const auto& r : rows) {
    os << fmt(r.alpha) << ',' << r.n << ',' << r.seed << ',' << fmt(r.j_opt) << ',' << fmt(r.j_reg_opt) << ','
       << fmt(r.j_hat) << ',' << fmt(r.subopt_vs_opt) << ',' << fmt(r.subopt_vs_reg) << ','
       << fmt(r.c_star_alpha) << ',' << fmt(r.tv_to_reg_opt) << ',' << fmt(r.duality_gap) << ','
       << (r.v_converged ? 1 : 0) << ',' << (r.degenerate ? 1 : 0) << ',' << csv_safe(r.status);
    if (with_timing) os << ',' << fmt(r.wall_ms);
    os << '\n';
  }
}

std::vector<ResultRow> read_results_csv(std::istream& is) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), "results: missing header");
  const bool timing = line == std::string(kCsvHeader) + ",wall_ms";
  require(timing || line == kCsvHeader, "results: unexpected header");
  std::vector<ResultRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    require(f.size() == (timing ? 15u : 14u), "results: wrong field count");
    auto num = [&](std::size_t i) { return std::strtod(f[i].c_str(), nullptr); };
    ResultRow r;
    r.alpha = num(0);
    r.n = parse_u64("n", f[1]);
    r.seed = parse_u64("seed", f[2]);
    r.j_opt = num(3);
    r.j_reg_opt = num(4);
    r.j_hat = num(5);
    r.subopt_vs_opt = num(6);
    r.subopt_vs_reg = num(7);
    r.c_star_alpha = num(8);
    r.tv_to_reg_opt = num(9);
    r.duality_gap = num(10);
    r.v_converged = f[11] == "1";
    r.degenerate = f[12] == "1";
    r.status = f[13];
    if (timing) r.wall_ms = num(14);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_summary(std::ostream& os, const std::vector<SummaryRow>& summary) {
  os << "alpha\tn\tcount\tmedian_subopt_vs_opt\tiqr_subopt_vs_opt\tmedian_subopt_vs_reg\tmedian_tv_to_reg_opt\n";
  for (const auto& s : summary)
    os << fmt(s.alpha) << '\t' << s.n << '\t' << s.count << '\t' << fmt(s.median_subopt_vs_opt) << '\t'
       << fmt(s.iqr_subopt_vs_opt) << '\t' << fmt(s.median_subopt_vs_reg) << '\t' << fmt(s.median_tv_to_reg_opt)
       << '\n';
}

void emit_plotdata(std::ostream& os, const std::vector<ResultRow>& rows) {
  require(!rows.empty(), "emit_plotdata: no rows");
  std::map<double, std::map<std::size_t, std::vector<double>>> curves;
  for (const auto& r : rows)
    if (std::isfinite(r.subopt_vs_opt)) curves[r.alpha][r.n].push_back(r.subopt_vs_opt);
  bool first = true;
  for (const auto& [alpha, points] : curves) {
    if (!first) os << "\n\n";
    first = false;
    os << "# alpha=" << fmt(alpha) << "\n# n\tmedian\tq25\tq75\tiqr\n";
    for (const auto& [n, xs] : points) {
      const double q25 = quantile(xs, 0.25), q75 = quantile(xs, 0.75);
      os << n << '\t' << fmt(median(xs)) << '\t' << fmt(q25) << '\t' << fmt(q75) << '\t' << fmt(q75 - q25) << '\n';
    }
  }
}

}  // namespace vpflow
