#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "kdc/graph.hpp"

namespace kdc {

// One episode. observations[t] is obs_dim x N; actions[t] is action_dim x N
// and is the action applied between observations[t] and observations[t+1],
// so the history for transition t is observations[t] (h_t := o_{t-1}).
struct Trajectory {
  std::vector<Eigen::MatrixXd> observations;  // steps + 1 entries
  std::vector<Eigen::MatrixXd> actions;       // steps entries
  std::uint64_t seed = 0;

  int steps() const { return static_cast<int>(actions.size()); }
};

struct Dataset {
  Graph graph;
  int obs_dim = 0;
  int action_dim = 0;
  std::vector<Trajectory> trajectories;
  std::string env_fingerprint;  // canonical env-config JSON
  std::uint64_t master_seed = 0;

  int nodes() const { return graph.size(); }
  long long transitions() const;
  void validate() const;  // shared graph/dims across trajectories
};

// Directory layout: manifest.json + one CSV per trajectory with columns
// (t, node, obs..., action...). Row t carries o_t and the action that produced
// it; the t = 0 row has zero action columns.
void save_dataset(const std::string& dir, const Dataset& ds);
Dataset load_dataset(const std::string& dir);

// Checksum over the serialized form; stable across identical datasets.
std::uint64_t dataset_checksum(const Dataset& ds);

}  // namespace kdc
