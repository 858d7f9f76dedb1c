#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "vpflow/mdp.hpp"

namespace vpflow {

/// Dimensions and discount of the MDP a dataset was drawn from. Learners need
/// gamma but never see the MDP itself.
struct DatasetShape {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::size_t n_goals = 0;
  double discount = 0.0;
};

/// One (s, a, r, s', g) tuple. Sampled datasets carry unit weights; the
/// exhaustive population dataset weights each tuple by its probability.
struct Transition {
  std::size_t s = 0;
  std::size_t a = 0;
  double r = 0.0;
  std::size_t s_next = 0;
  std::size_t g = 0;
  double weight = 1.0;
  bool operator==(const Transition&) const = default;
};

struct InitPair {
  std::size_t s = 0;
  std::size_t g = 0;
  double weight = 1.0;
  bool operator==(const InitPair&) const = default;
};

class OfflineDataset {
 public:
  OfflineDataset(DatasetShape shape, std::vector<Transition> records);

  const DatasetShape& shape() const { return shape_; }
  const std::vector<Transition>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  double total_weight() const { return total_weight_; }

 private:
  DatasetShape shape_;
  std::vector<Transition> records_;
  double total_weight_ = 0.0;
};

class InitDataset {
 public:
  InitDataset(DatasetShape shape, std::vector<InitPair> records);

  const DatasetShape& shape() const { return shape_; }
  const std::vector<InitPair>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  double total_weight() const { return total_weight_; }

 private:
  DatasetShape shape_;
  std::vector<InitPair> records_;
  double total_weight_ = 0.0;
};

struct GeneratedData {
  OfflineDataset data;
  InitDataset init;
  /// Exact behavior occupancy the tuples were drawn from.
  OccupancyMeasure mu;
};

DatasetShape shape_of(const GoalMdp& mdp);

/// Draws n tuples with g ~ p, (s,a) ~ d^behavior(.,.;g), s' ~ P(.|s,a), and an
/// independent set of n0 pairs (s0, g0) ~ rho x p. The behavior must be
/// strictly positive.
GeneratedData generate_dataset(const GoalMdp& mdp, const Policy& behavior, std::size_t n,
                               std::size_t n0, std::uint64_t seed);

/// Every tuple in the support of mu exactly once, weighted by p(g) mu(s,a;g)
/// P(s'|s,a); init pairs weighted by rho(s) p(g).
GeneratedData population_dataset(const GoalMdp& mdp, const Policy& behavior);

/// Uniform random partition into halves of sizes floor(n/2) and ceil(n/2).
/// Records keep their original relative order within each half.
std::pair<OfflineDataset, OfflineDataset> split_dataset(const OfflineDataset& data, std::uint64_t seed);

/// Record positions of the two halves, as used by split_dataset.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n,
                                                                            std::uint64_t seed);

OfflineDataset subset(const OfflineDataset& data, const std::vector<std::size_t>& indices);

void write_jsonl(std::ostream& os, const OfflineDataset& data);
void write_jsonl(std::ostream& os, const InitDataset& data);
OfflineDataset read_offline_jsonl(std::istream& is);
InitDataset read_init_jsonl(std::istream& is);

void save(const std::string& path, const OfflineDataset& data);
void save(const std::string& path, const InitDataset& data);
OfflineDataset load_offline(const std::string& path);
InitDataset load_init(const std::string& path);

}  // namespace vpflow
