#include "vpflow/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "vpflow/error.hpp"
#include "vpflow/rng.hpp"

namespace vpflow {

using nlohmann::json;

namespace {

constexpr const char* kOfflineFormat = "vpflow.offline/1";
constexpr const char* kInitFormat = "vpflow.init/1";

constexpr std::uint64_t kTupleStream = 1;
constexpr std::uint64_t kInitStream = 2;
constexpr std::uint64_t kSplitStream = 3;

void check_shape(const DatasetShape& shape) {
  require(shape.n_states > 0 && shape.n_actions > 0 && shape.n_goals > 0,
          "dataset dimensions must be positive");
  require(shape.discount >= 0.0 && shape.discount < 1.0, "dataset discount must lie in [0, 1)");
}

void check_weight(double w) {
  require(w > 0.0 && std::isfinite(w), "dataset record weights must be positive and finite");
}

json header(const char* format, const DatasetShape& shape, std::size_t n) {
  return json{{"format", format},
              {"n_states", shape.n_states},
              {"n_actions", shape.n_actions},
              {"n_goals", shape.n_goals},
              {"discount", shape.discount},
              {"n", n}};
}

struct Header {
  DatasetShape shape;
  std::size_t n = 0;
};

Header read_header(std::istream& is, const char* format) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), "dataset: missing header line");
  const json h = json::parse(line);
  require(h.is_object() && h.value("format", std::string{}) == format,
          std::string("dataset: expected format ") + format);
  return Header{DatasetShape{h.at("n_states").get<std::size_t>(), h.at("n_actions").get<std::size_t>(),
                             h.at("n_goals").get<std::size_t>(), h.at("discount").get<double>()},
                h.at("n").get<std::size_t>()};
}

template <class F>
void for_each_record(std::istream& is, F&& f) {
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    f(json::parse(line));
  }
}

// Malformed JSON or missing fields are input errors like any other.
template <class F>
auto parsing(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw InputError(std::string("dataset: ") + e.what());
  }
}

}  // namespace

OfflineDataset::OfflineDataset(DatasetShape shape, std::vector<Transition> records)
    : shape_(shape), records_(std::move(records)) {
  check_shape(shape_);
  for (const auto& t : records_) {
    require(t.s < shape_.n_states && t.s_next < shape_.n_states && t.a < shape_.n_actions &&
                t.g < shape_.n_goals,
            "dataset record index out of range");
    require(t.r >= 0.0 && t.r <= 1.0, "dataset reward outside [0, 1]");
    check_weight(t.weight);
    total_weight_ += t.weight;
  }
}

InitDataset::InitDataset(DatasetShape shape, std::vector<InitPair> records)
    : shape_(shape), records_(std::move(records)) {
  check_shape(shape_);
  for (const auto& p : records_) {
    require(p.s < shape_.n_states && p.g < shape_.n_goals, "init record index out of range");
    check_weight(p.weight);
    total_weight_ += p.weight;
  }
}

DatasetShape shape_of(const GoalMdp& mdp) {
  return DatasetShape{mdp.n_states(), mdp.n_actions(), mdp.n_goals(), mdp.discount()};
}

GeneratedData generate_dataset(const GoalMdp& mdp, const Policy& behavior, std::size_t n,
                               std::size_t n0, std::uint64_t seed) {
  require(n > 0, "generate_dataset: n must be positive");
  require(n0 > 0, "generate_dataset: n0 must be positive");
  require(behavior.min_entry() > 0.0, "generate_dataset: behavior policy must be strictly positive");
  const std::size_t S = mdp.n_states(), A = mdp.n_actions(), G = mdp.n_goals();
  OccupancyMeasure mu = occupancy_of_policy(mdp, behavior);

  // joint weights over (g, s, a) in that order
  std::vector<double> joint(G * S * A);
  for (std::size_t g = 0; g < G; ++g)
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t a = 0; a < A; ++a) joint[(g * S + s) * A + a] = mdp.goal_weight(g) * mu(s, a, g);
  const CategoricalSampler draw_tuple(joint);
  std::vector<CategoricalSampler> draw_next;
  draw_next.reserve(S * A);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) draw_next.emplace_back(mdp.transition_row(s, a));

  Rng rng(derive_seed(seed, kTupleStream));
  std::vector<Transition> records(n);
  for (auto& t : records) {
    const std::size_t k = draw_tuple(rng);
    t.g = k / (S * A);
    t.s = (k / A) % S;
    t.a = k % A;
    t.s_next = mdp.deterministic() ? mdp.successor(t.s, t.a) : draw_next[t.s * A + t.a](rng);
    t.r = mdp.reward(t.s, t.g);
  }

  std::vector<double> init_joint(G * S);
  for (std::size_t g = 0; g < G; ++g)
    for (std::size_t s = 0; s < S; ++s) init_joint[g * S + s] = mdp.goal_weight(g) * mdp.init(s);
  const CategoricalSampler draw_init(init_joint);
  Rng init_rng(derive_seed(seed, kInitStream));
  std::vector<InitPair> init(n0);
  for (auto& p : init) {
    const std::size_t k = draw_init(init_rng);
    p.g = k / S;
    p.s = k % S;
  }

  const DatasetShape shape = shape_of(mdp);
  return GeneratedData{OfflineDataset(shape, std::move(records)), InitDataset(shape, std::move(init)),
                       std::move(mu)};
}

GeneratedData population_dataset(const GoalMdp& mdp, const Policy& behavior) {
  const std::size_t S = mdp.n_states(), A = mdp.n_actions(), G = mdp.n_goals();
  OccupancyMeasure mu = occupancy_of_policy(mdp, behavior);
  std::vector<Transition> records;
  for (std::size_t g = 0; g < G; ++g)
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t a = 0; a < A; ++a) {
        const double w = mdp.goal_weight(g) * mu(s, a, g);
        if (w <= 0.0) continue;
        auto row = mdp.transition_row(s, a);
        for (std::size_t t = 0; t < S; ++t)
          if (row[t] > 0.0) records.push_back(Transition{s, a, mdp.reward(s, g), t, g, w * row[t]});
      }
  std::vector<InitPair> init;
  for (std::size_t g = 0; g < G; ++g)
    for (std::size_t s = 0; s < S; ++s) {
      const double w = mdp.goal_weight(g) * mdp.init(s);
      if (w > 0.0) init.push_back(InitPair{s, g, w});
    }
  const DatasetShape shape = shape_of(mdp);
  return GeneratedData{OfflineDataset(shape, std::move(records)), InitDataset(shape, std::move(init)),
                       std::move(mu)};
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n,
                                                                            std::uint64_t seed) {
  require(n >= 2, "split_dataset: need at least two records");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(seed, kSplitStream));
  for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  std::vector<std::size_t> first(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n / 2));
  std::vector<std::size_t> second(perm.begin() + static_cast<std::ptrdiff_t>(n / 2), perm.end());
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());
  return {std::move(first), std::move(second)};
}

OfflineDataset subset(const OfflineDataset& data, const std::vector<std::size_t>& indices) {
  std::vector<Transition> records;
  records.reserve(indices.size());
  for (std::size_t i : indices) {
    require(i < data.size(), "subset: record index out of range");
    records.push_back(data.records()[i]);
  }
  return OfflineDataset(data.shape(), std::move(records));
}

std::pair<OfflineDataset, OfflineDataset> split_dataset(const OfflineDataset& data, std::uint64_t seed) {
  auto [first, second] = split_indices(data.size(), seed);
  return {subset(data, first), subset(data, second)};
}

void write_jsonl(std::ostream& os, const OfflineDataset& data) {
  os << header(kOfflineFormat, data.shape(), data.size()).dump() << '\n';
  for (const auto& t : data.records()) {
    json j{{"s", t.s}, {"a", t.a}, {"r", t.r}, {"s_next", t.s_next}, {"g", t.g}};
    if (t.weight != 1.0) j["w"] = t.weight;
    os << j.dump() << '\n';
  }
}

void write_jsonl(std::ostream& os, const InitDataset& data) {
  os << header(kInitFormat, data.shape(), data.size()).dump() << '\n';
  for (const auto& p : data.records()) {
    json j{{"s0", p.s}, {"g0", p.g}};
    if (p.weight != 1.0) j["w"] = p.weight;
    os << j.dump() << '\n';
  }
}

OfflineDataset read_offline_jsonl(std::istream& is) {
  return parsing([&] {
    const Header h = read_header(is, kOfflineFormat);
    std::vector<Transition> records;
    for_each_record(is, [&](const json& j) {
      records.push_back(Transition{j.at("s").get<std::size_t>(), j.at("a").get<std::size_t>(),
                                   j.at("r").get<double>(), j.at("s_next").get<std::size_t>(),
                                   j.at("g").get<std::size_t>(), j.value("w", 1.0)});
    });
    require(records.size() == h.n, "dataset: header count does not match the records");
    return OfflineDataset(h.shape, std::move(records));
  });
}

InitDataset read_init_jsonl(std::istream& is) {
  return parsing([&] {
    const Header h = read_header(is, kInitFormat);
    std::vector<InitPair> records;
    for_each_record(is, [&](const json& j) {
      records.push_back(
          InitPair{j.at("s0").get<std::size_t>(), j.at("g0").get<std::size_t>(), j.value("w", 1.0)});
    });
    require(records.size() == h.n, "dataset: header count does not match the records");
    return InitDataset(h.shape, std::move(records));
  });
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), "cannot open " + path + " for writing");
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), "cannot open " + path);
  return is;
}

}  // namespace

void save(const std::string& path, const OfflineDataset& data) {
  auto os = open_out(path);
  write_jsonl(os, data);
}

void save(const std::string& path, const InitDataset& data) {
  auto os = open_out(path);
  write_jsonl(os, data);
}

OfflineDataset load_offline(const std::string& path) {
  auto is = open_in(path);
  return read_offline_jsonl(is);
}

InitDataset load_init(const std::string& path) {
  auto is = open_in(path);
  return read_init_jsonl(is);
}

}  // namespace vpflow
