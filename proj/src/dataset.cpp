#include "kdc/dataset.hpp"

#include <cinttypes>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <sstream>

#include "kdc/errors.hpp"
#include "kdc/io_util.hpp"

namespace kdc {

using nlohmann::json;

long long Dataset::transitions() const {
  long long t = 0;
  for (const auto& traj : trajectories) t += traj.steps();
  return t;
}

void Dataset::validate() const {
  const int n = graph.size();
  for (const auto& traj : trajectories) {
    if (traj.observations.size() != traj.actions.size() + 1)
      throw ConfigError("trajectory must have steps+1 observations");
    for (const auto& o : traj.observations)
      if (o.rows() != obs_dim || o.cols() != n)
        throw ConfigError("observation dims do not match dataset");
    for (const auto& a : traj.actions)
      if (a.rows() != action_dim || a.cols() != n)
        throw ConfigError("action dims do not match dataset");
  }
}

namespace {

std::string traj_filename(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "traj_%05d.csv", index);
  return buf;
}

std::string trajectory_csv(const Trajectory& traj, int obs_dim,
                           int action_dim) {
  std::ostringstream out;
  out << "t,node";
  for (int k = 0; k < obs_dim; ++k) out << ",obs_" << k;
  for (int k = 0; k < action_dim; ++k) out << ",act_" << k;
  out << "\n";
  const int n = static_cast<int>(traj.observations.front().cols());
  const int total = static_cast<int>(traj.observations.size());
  for (int t = 0; t < total; ++t) {
    for (int i = 0; i < n; ++i) {
      out << t << "," << i;
      for (int k = 0; k < obs_dim; ++k)
        out << "," << format_double(traj.observations[t](k, i));
      for (int k = 0; k < action_dim; ++k)
        out << "," << format_double(t == 0 ? 0.0 : traj.actions[t - 1](k, i));
      out << "\n";
    }
  }
  return out.str();
}

Trajectory trajectory_from_csv(const std::string& text, int obs_dim,
                               int action_dim, int n) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty trajectory file");
  std::vector<Eigen::MatrixXd> obs, act;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    auto next = [&]() -> double {
      if (!std::getline(row, cell, ',')) throw IoError("short trajectory row");
      return std::strtod(cell.c_str(), nullptr);
    };
    const int t = static_cast<int>(next());
    const int i = static_cast<int>(next());
    if (t == static_cast<int>(obs.size())) {
      obs.emplace_back(Eigen::MatrixXd::Zero(obs_dim, n));
      if (t > 0) act.emplace_back(Eigen::MatrixXd::Zero(action_dim, n));
    }
    for (int k = 0; k < obs_dim; ++k) obs[t](k, i) = next();
    for (int k = 0; k < action_dim; ++k) {
      double v = next();
      if (t > 0) act[t - 1](k, i) = v;
    }
  }
  Trajectory traj;
  traj.observations = std::move(obs);
  traj.actions = std::move(act);
  return traj;
}

}  // namespace

void save_dataset(const std::string& dir, const Dataset& ds) {
  ds.validate();
  ensure_directory(dir);
  json edges = json::array();
  for (auto [a, b] : ds.graph.edges()) edges.push_back({a, b});
  json manifest = {
      {"format", "kdc-dataset-v1"},
      {"nodes", ds.graph.size()},
      {"edges", edges},
      {"obs_dim", ds.obs_dim},
      {"action_dim", ds.action_dim},
      {"master_seed", ds.master_seed},
      {"env", ds.env_fingerprint},
      {"trajectories", json::array()},
  };
  for (int i = 0; i < static_cast<int>(ds.trajectories.size()); ++i) {
    const auto& traj = ds.trajectories[i];
    manifest["trajectories"].push_back({{"file", traj_filename(i)},
                                        {"steps", traj.steps()},
                                        {"seed", traj.seed}});
    write_text_file(dir + "/" + traj_filename(i),
                    trajectory_csv(traj, ds.obs_dim, ds.action_dim));
  }
  write_text_file(dir + "/manifest.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const std::string& dir) {
  json manifest;
  try {
    manifest = json::parse(read_text_file(dir + "/manifest.json"));
  } catch (const json::exception& e) {
    throw IoError(std::string("bad dataset manifest: ") + e.what());
  }
  Dataset ds;
  const int n = manifest.at("nodes").get<int>();
  std::vector<std::pair<int, int>> edges;
  for (const auto& e : manifest.at("edges"))
    edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
  ds.graph = Graph(n, edges);
  ds.obs_dim = manifest.at("obs_dim").get<int>();
  ds.action_dim = manifest.at("action_dim").get<int>();
  ds.master_seed = manifest.at("master_seed").get<std::uint64_t>();
  ds.env_fingerprint = manifest.at("env").get<std::string>();
  for (const auto& entry : manifest.at("trajectories")) {
    Trajectory traj = trajectory_from_csv(
        read_text_file(dir + "/" + entry.at("file").get<std::string>()),
        ds.obs_dim, ds.action_dim, n);
    traj.seed = entry.at("seed").get<std::uint64_t>();
    ds.trajectories.push_back(std::move(traj));
  }
  ds.validate();
  return ds;
}

std::uint64_t dataset_checksum(const Dataset& ds) {
  std::uint64_t h = fnv1a64(ds.env_fingerprint);
  char head[64];
  std::snprintf(head, sizeof(head), "%d|%d|%d|%" PRIu64, ds.graph.size(),
                ds.obs_dim, ds.action_dim, ds.master_seed);
  h = fnv1a64(head, std::strlen(head), h);
  for (const auto& traj : ds.trajectories) {
    std::string csv = trajectory_csv(traj, ds.obs_dim, ds.action_dim);
    h = fnv1a64(csv.data(), csv.size(), h);
  }
  return h;
}

}  // namespace kdc
