#include "kdc/simulators.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "kdc/errors.hpp"
#include "kdc/parallel.hpp"

namespace kdc {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Rope

RopeState rope_equilibrium(const RopeConfig& cfg, double top_x) {
  const int n = cfg.masses;
  RopeState s;
  s.pos.resize(2, n);
  s.vel = Eigen::MatrixXd::Zero(2, n);
  s.pos.col(0) << top_x, 0.0;
  for (int i = 0; i + 1 < n; ++i) {
    // link i carries the weight of masses i+1..n-1
    double tension = cfg.mass * cfg.gravity * (n - 1 - i);
    double len = cfg.rest_length + tension / cfg.stiffness;
    s.pos.col(i + 1) = s.pos.col(i) + Eigen::Vector2d(0.0, -len);
  }
  return s;
}

RopeState rope_initial_state(const RopeConfig& cfg, Rng& rng) {
  const int n = cfg.masses;
  RopeState s;
  s.pos.resize(2, n);
  s.vel = Eigen::MatrixXd::Zero(2, n);
  s.pos.col(0) << 0.0, 0.0;
  for (int i = 0; i + 1 < n; ++i) {
    double tension = cfg.mass * cfg.gravity * (n - 1 - i);
    double len = cfg.rest_length + tension / cfg.stiffness;
    double angle = rng.uniform(-cfg.init_angle, cfg.init_angle);
    s.pos.col(i + 1) =
        s.pos.col(i) +
        len * Eigen::Vector2d(std::sin(angle), -std::cos(angle));
  }
  return s;
}

RopeState rope_step(const RopeState& state, double u, const RopeConfig& cfg) {
  if (!state.pos.allFinite() || !state.vel.allFinite() || !std::isfinite(u))
    throw NumericalError("rope_step received non-finite input");
  const int n = static_cast<int>(state.pos.cols());
  Eigen::MatrixXd force = Eigen::MatrixXd::Zero(2, n);
  for (int i = 0; i + 1 < n; ++i) {
    Eigen::Vector2d delta = state.pos.col(i + 1) - state.pos.col(i);
    double len = delta.norm();
    if (len > 0.0) {
      Eigen::Vector2d pull =
          cfg.stiffness * (len - cfg.rest_length) * (delta / len);
      force.col(i) += pull;
      force.col(i + 1) -= pull;
    }
  }
  for (int i = 1; i < n; ++i) force(1, i) -= cfg.mass * cfg.gravity;
  force -= cfg.damping * state.vel;
  force(0, 0) += u;

  RopeState next;
  next.vel = state.vel + (cfg.dt / cfg.mass) * force;
  next.vel(1, 0) = 0.0;  // fixed-height top mass
  next.pos = state.pos + cfg.dt * next.vel;
  next.pos(1, 0) = state.pos(1, 0);
  return next;
}

Eigen::MatrixXd rope_observe(const RopeState& state) {
  const int n = static_cast<int>(state.pos.cols());
  Eigen::MatrixXd obs(4, n);
  obs.topRows(2) = state.pos;
  obs.bottomRows(2) = state.vel;
  return obs;
}

double rope_energy(const RopeState& state, const RopeConfig& cfg) {
  const int n = static_cast<int>(state.pos.cols());
  double e = 0.5 * cfg.mass * state.vel.squaredNorm();
  for (int i = 1; i < n; ++i) e += cfg.mass * cfg.gravity * state.pos(1, i);
  for (int i = 0; i + 1 < n; ++i) {
    double stretch =
        (state.pos.col(i + 1) - state.pos.col(i)).norm() - cfg.rest_length;
    e += 0.5 * cfg.stiffness * stretch * stretch;
  }
  return e;
}

Graph rope_graph(const RopeConfig& cfg) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i + 1 < cfg.masses; ++i) edges.emplace_back(i, i + 1);
  if (cfg.two_hop_edges)
    for (int i = 0; i + 2 < cfg.masses; ++i) edges.emplace_back(i, i + 2);
  return Graph(cfg.masses, edges);
}

// ---------------------------------------------------------------------------
// Grid

std::vector<bool> make_generator_mask(int n, const GridConfig& cfg, Rng& rng) {
  double ratio = rng.uniform(cfg.gen_ratio_lo, cfg.gen_ratio_hi);
  int count = std::clamp(static_cast<int>(std::lround(ratio * n)), 1, n);
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = 0; i < count; ++i) {
    int j = rng.uniform_int(i, n - 1);
    std::swap(idx[i], idx[j]);
  }
  std::vector<bool> mask(n, false);
  for (int i = 0; i < count; ++i) mask[idx[i]] = true;
  return mask;
}

GridState grid_step(const GridState& state, const Eigen::VectorXd& u,
                    const std::vector<bool>& generators, const Graph& g,
                    const GridConfig& cfg, double noise_std, Rng& rng) {
  const int n = g.size();
  if (!state.v.allFinite() || !state.vdot.allFinite() || !u.allFinite())
    throw NumericalError("grid_step received non-finite input");
  Eigen::VectorXd accel(n);
  for (int i = 0; i < n; ++i) {
    double coupling = 0.0;
    for (int j : g.inclusive_neighborhood(i)) {
      if (j == i) continue;
      coupling += state.v(i) - state.v(j);
    }
    double a = -cfg.damping * state.vdot(i) - cfg.coupling * coupling -
               cfg.restoring * (state.v(i) - cfg.v_ref);
    if (generators[i])
      a += u(i);
    else if (noise_std > 0.0)
      a += noise_std * rng.normal();
    accel(i) = a;
  }
  GridState next;
  next.vdot = state.vdot + cfg.dt * accel;
  next.v = state.v + cfg.dt * next.vdot;
  return next;
}

Eigen::MatrixXd grid_observe(const GridState& state) {
  Eigen::MatrixXd obs(2, state.v.size());
  obs.row(0) = state.v.transpose();
  obs.row(1) = state.vdot.transpose();
  return obs;
}

Eigen::MatrixXd grid_system_matrix(const Graph& g, const GridConfig& cfg) {
  const int n = g.size();
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j : g.inclusive_neighborhood(i)) {
      if (j == i) continue;
      lap(i, i) += 1.0;
      lap(i, j) -= 1.0;
    }
  }
  Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  sys.topRightCorner(n, n).setIdentity();
  sys.bottomLeftCorner(n, n) =
      -(cfg.coupling * lap +
        cfg.restoring * Eigen::MatrixXd::Identity(n, n));
  sys.bottomRightCorner(n, n) =
      -cfg.damping * Eigen::MatrixXd::Identity(n, n);
  return sys;
}

// ---------------------------------------------------------------------------
// Linear graph system

Eigen::MatrixXd LinearGraphSystem::aggregate(const Eigen::MatrixXd& x) const {
  const int n = graph.size();
  Eigen::MatrixXd agg = Eigen::MatrixXd::Zero(x.rows(), n);
  if (state_weights) {
    return gibbs_aggregate(graph, x, *state_weights);
  }
  for (int i = 0; i < n; ++i) {
    const auto& nbrs = graph.inclusive_neighborhood(i);
    for (std::size_t k = 0; k < nbrs.size(); ++k)
      agg.col(i) += weights[i](static_cast<int>(k)) * x.col(nbrs[k]);
  }
  return agg;
}

Eigen::MatrixXd LinearGraphSystem::step(const Eigen::MatrixXd& x,
                                        const Eigen::MatrixXd& u,
                                        Rng& rng) const {
  Eigen::MatrixXd next = A * aggregate(x) + B * u;
  if (noise_std > 0.0)
    for (int i = 0; i < next.cols(); ++i)
      for (int k = 0; k < next.rows(); ++k)
        next(k, i) += noise_std * rng.normal();
  return next;
}

LinearGraphSystem make_random_linear_graph_system(
    const Graph& g, int dx, int du, std::uint64_t seed, double noise_std,
    double spectral, bool uniform_weights,
    std::optional<GibbsPotential> state_weights) {
  Rng rng(seed);
  LinearGraphSystem sys;
  sys.graph = g;
  sys.noise_std = noise_std;
  sys.state_weights = std::move(state_weights);
  sys.A.resize(dx, dx);
  for (int r = 0; r < dx; ++r)
    for (int c = 0; c < dx; ++c) sys.A(r, c) = rng.normal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys.A);
  sys.A *= spectral / svd.singularValues()(0);
  sys.B.resize(dx, du);
  for (int r = 0; r < dx; ++r)
    for (int c = 0; c < du; ++c) sys.B(r, c) = rng.normal();
  sys.weights.resize(g.size());
  for (int i = 0; i < g.size(); ++i) {
    const auto& nbrs = g.inclusive_neighborhood(i);
    Eigen::VectorXd w(nbrs.size());
    for (int k = 0; k < w.size(); ++k)
      w(k) = uniform_weights ? 1.0 : rng.uniform(0.1, 1.0);
    sys.weights[i] = w / w.sum();
  }
  return sys;
}

double global_spectral_radius(const LinearGraphSystem& sys) {
  const int n = sys.graph.size();
  const int dx = sys.state_dim();
  Eigen::MatrixXd global = Eigen::MatrixXd::Zero(n * dx, n * dx);
  for (int i = 0; i < n; ++i) {
    const auto& nbrs = sys.graph.inclusive_neighborhood(i);
    for (std::size_t k = 0; k < nbrs.size(); ++k)
      global.block(i * dx, nbrs[k] * dx, dx, dx) =
          sys.weights[i](static_cast<int>(k)) * sys.A;
  }
  return global.eigenvalues().cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Environments

namespace {

class RopeEnv final : public Environment {
 public:
  RopeEnv(const RopeConfig& cfg) : cfg_(cfg), graph_(rope_graph(cfg)) {
    state_ = rope_equilibrium(cfg_);
  }
  const Graph& graph() const override { return graph_; }
  int obs_dim() const override { return 4; }
  int action_dim() const override { return 1; }
  Eigen::MatrixXd observe() const override { return rope_observe(state_); }
  void step(const Eigen::MatrixXd& actions) override {
    state_ = rope_step(state_, actions(0, 0), cfg_);
  }
  void reset(std::uint64_t seed) override {
    Rng rng = Rng::substream(seed, 0);
    state_ = rope_initial_state(cfg_, rng);
  }
  Eigen::MatrixXd sample_excitation(Rng& rng) const override {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(1, graph_.size());
    a(0, 0) = rng.uniform(-cfg_.u_max, cfg_.u_max);
    return a;
  }
  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<RopeEnv>(*this);
  }

 private:
  RopeConfig cfg_;
  Graph graph_;
  RopeState state_;
};

class GridEnv final : public Environment {
 public:
  GridEnv(const GridConfig& cfg, Graph graph, std::vector<bool> gens)
      : cfg_(cfg), graph_(std::move(graph)), gens_(std::move(gens)),
        noise_rng_(0) {
    state_.v = Eigen::VectorXd::Constant(graph_.size(), cfg_.v_ref);
    state_.vdot = Eigen::VectorXd::Zero(graph_.size());
  }
  const Graph& graph() const override { return graph_; }
  int obs_dim() const override { return 2; }
  int action_dim() const override { return 1; }
  Eigen::MatrixXd observe() const override { return grid_observe(state_); }
  void step(const Eigen::MatrixXd& actions) override {
    state_ = grid_step(state_, actions.row(0).transpose(), gens_, graph_, cfg_,
                       cfg_.noise_std, noise_rng_);
  }
  void reset(std::uint64_t seed) override {
    Rng init = Rng::substream(seed, 0);
    const int n = graph_.size();
    state_.v.resize(n);
    state_.vdot.resize(n);
    const double common =
        init.uniform(-cfg_.v_common_amp, cfg_.v_common_amp);
    for (int i = 0; i < n; ++i)
      state_.v(i) =
          cfg_.v_ref + common + init.uniform(-cfg_.v_init_amp, cfg_.v_init_amp);
    for (int i = 0; i < n; ++i)
      state_.vdot(i) = init.uniform(-cfg_.vdot_init_amp, cfg_.vdot_init_amp);
    noise_rng_ = Rng::substream(seed, 1);
  }
  Eigen::MatrixXd sample_excitation(Rng& rng) const override {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(1, graph_.size());
    for (int i = 0; i < graph_.size(); ++i)
      if (gens_[i]) a(0, i) = rng.uniform(-cfg_.u_max, cfg_.u_max);
    return a;
  }
  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<GridEnv>(*this);
  }
  const std::vector<bool>& generators() const { return gens_; }

 private:
  GridConfig cfg_;
  Graph graph_;
  std::vector<bool> gens_;
  GridState state_;
  Rng noise_rng_;
};

class LinearGraphEnv final : public Environment {
 public:
  LinearGraphEnv(LinearGraphSystem sys, double x_amp, double u_max)
      : sys_(std::move(sys)), x_amp_(x_amp), u_max_(u_max), noise_rng_(0) {
    x_ = Eigen::MatrixXd::Zero(sys_.state_dim(), sys_.graph.size());
  }
  const Graph& graph() const override { return sys_.graph; }
  int obs_dim() const override { return sys_.state_dim(); }
  int action_dim() const override { return sys_.control_dim(); }
  Eigen::MatrixXd observe() const override { return x_; }
  void step(const Eigen::MatrixXd& actions) override {
    x_ = sys_.step(x_, actions, noise_rng_);
  }
  void reset(std::uint64_t seed) override {
    Rng init = Rng::substream(seed, 0);
    for (int i = 0; i < x_.cols(); ++i)
      for (int k = 0; k < x_.rows(); ++k) x_(k, i) = x_amp_ * init.normal();
    noise_rng_ = Rng::substream(seed, 1);
  }
  Eigen::MatrixXd sample_excitation(Rng& rng) const override {
    Eigen::MatrixXd a(sys_.control_dim(), sys_.graph.size());
    for (int i = 0; i < a.cols(); ++i)
      for (int k = 0; k < a.rows(); ++k) a(k, i) = rng.uniform(-u_max_, u_max_);
    return a;
  }
  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<LinearGraphEnv>(*this);
  }
  const LinearGraphSystem& system() const { return sys_; }

 private:
  LinearGraphSystem sys_;
  double x_amp_;
  double u_max_;
  Eigen::MatrixXd x_;
  Rng noise_rng_;
};

}  // namespace

std::string to_string(EnvConfig::Kind k) {
  switch (k) {
    case EnvConfig::Kind::Rope: return "rope";
    case EnvConfig::Kind::Grid: return "grid";
    case EnvConfig::Kind::Linear: return "linear";
  }
  return "?";
}

EnvConfig::Kind env_kind_from_string(const std::string& s) {
  if (s == "rope") return EnvConfig::Kind::Rope;
  if (s == "grid") return EnvConfig::Kind::Grid;
  if (s == "linear") return EnvConfig::Kind::Linear;
  throw ConfigError("unknown environment kind: " + s);
}

json EnvConfig::to_json() const {
  json j;
  j["kind"] = kdc::to_string(kind);
  j["nodes_lo"] = nodes_lo;
  j["nodes_hi"] = nodes_hi;
  j["er_p"] = er_p;
  j["excitation_hold"] = excitation_hold;
  j["rope"] = {{"masses", rope.masses},       {"mass", rope.mass},
               {"stiffness", rope.stiffness}, {"rest_length", rope.rest_length},
               {"damping", rope.damping},     {"gravity", rope.gravity},
               {"dt", rope.dt},               {"init_angle", rope.init_angle},
               {"u_max", rope.u_max},         {"two_hop_edges", rope.two_hop_edges}};
  j["grid"] = {{"damping", grid.damping},
               {"coupling", grid.coupling},
               {"restoring", grid.restoring},
               {"dt", grid.dt},
               {"v_ref", grid.v_ref},
               {"gen_ratio_lo", grid.gen_ratio_lo},
               {"gen_ratio_hi", grid.gen_ratio_hi},
               {"noise_std", grid.noise_std},
               {"u_max", grid.u_max},
               {"v_init_amp", grid.v_init_amp},
               {"v_common_amp", grid.v_common_amp},
               {"vdot_init_amp", grid.vdot_init_amp}};
  j["linear"] = {{"state_dim", linear.state_dim},
                 {"control_dim", linear.control_dim},
                 {"noise_std", linear.noise_std},
                 {"spectral", linear.spectral},
                 {"uniform_weights", linear.uniform_weights},
                 {"gibbs_sigma", linear.gibbs_sigma},
                 {"x_init_amp", linear.x_init_amp},
                 {"u_max", linear.u_max},
                 {"er_p", linear.er_p}};
  return j;
}

EnvConfig EnvConfig::from_json(const json& j) {
  EnvConfig c;
  c.kind = env_kind_from_string(j.value("kind", "rope"));
  c.nodes_lo = j.value("nodes_lo", c.nodes_lo);
  c.nodes_hi = j.value("nodes_hi", c.nodes_hi);
  c.er_p = j.value("er_p", c.er_p);
  c.excitation_hold = j.value("excitation_hold", c.excitation_hold);
  if (j.contains("rope")) {
    const auto& r = j["rope"];
    c.rope.masses = r.value("masses", c.rope.masses);
    c.rope.mass = r.value("mass", c.rope.mass);
    c.rope.stiffness = r.value("stiffness", c.rope.stiffness);
    c.rope.rest_length = r.value("rest_length", c.rope.rest_length);
    c.rope.damping = r.value("damping", c.rope.damping);
    c.rope.gravity = r.value("gravity", c.rope.gravity);
    c.rope.dt = r.value("dt", c.rope.dt);
    c.rope.init_angle = r.value("init_angle", c.rope.init_angle);
    c.rope.u_max = r.value("u_max", c.rope.u_max);
    c.rope.two_hop_edges = r.value("two_hop_edges", c.rope.two_hop_edges);
  }
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    c.grid.damping = g.value("damping", c.grid.damping);
    c.grid.coupling = g.value("coupling", c.grid.coupling);
    c.grid.restoring = g.value("restoring", c.grid.restoring);
    c.grid.dt = g.value("dt", c.grid.dt);
    c.grid.v_ref = g.value("v_ref", c.grid.v_ref);
    c.grid.gen_ratio_lo = g.value("gen_ratio_lo", c.grid.gen_ratio_lo);
    c.grid.gen_ratio_hi = g.value("gen_ratio_hi", c.grid.gen_ratio_hi);
    c.grid.noise_std = g.value("noise_std", c.grid.noise_std);
    c.grid.u_max = g.value("u_max", c.grid.u_max);
    c.grid.v_init_amp = g.value("v_init_amp", c.grid.v_init_amp);
    c.grid.v_common_amp = g.value("v_common_amp", c.grid.v_common_amp);
    c.grid.vdot_init_amp = g.value("vdot_init_amp", c.grid.vdot_init_amp);
  }
  if (j.contains("linear")) {
    const auto& l = j["linear"];
    c.linear.state_dim = l.value("state_dim", c.linear.state_dim);
    c.linear.control_dim = l.value("control_dim", c.linear.control_dim);
    c.linear.noise_std = l.value("noise_std", c.linear.noise_std);
    c.linear.spectral = l.value("spectral", c.linear.spectral);
    c.linear.uniform_weights = l.value("uniform_weights", c.linear.uniform_weights);
    c.linear.gibbs_sigma = l.value("gibbs_sigma", c.linear.gibbs_sigma);
    c.linear.x_init_amp = l.value("x_init_amp", c.linear.x_init_amp);
    c.linear.u_max = l.value("u_max", c.linear.u_max);
    c.linear.er_p = l.value("er_p", c.linear.er_p);
  }
  return c;
}

std::string EnvConfig::fingerprint() const { return to_json().dump(); }

std::unique_ptr<Environment> make_env(const EnvConfig& cfg,
                                      std::uint64_t instance_seed) {
  Rng topo = Rng::substream(instance_seed, 0);
  const int n = cfg.nodes_lo >= cfg.nodes_hi
                    ? cfg.nodes_lo
                    : topo.uniform_int(cfg.nodes_lo, cfg.nodes_hi);
  switch (cfg.kind) {
    case EnvConfig::Kind::Rope: {
      RopeConfig rc = cfg.rope;
      rc.masses = n;
      return std::make_unique<RopeEnv>(rc);
    }
    case EnvConfig::Kind::Grid: {
      Graph g = n == 1 ? Graph(1, {})
                       : Graph::erdos_renyi(n, cfg.er_p, topo.next_u64());
      Rng mask_rng = Rng::substream(instance_seed, 1);
      auto gens = make_generator_mask(n, cfg.grid, mask_rng);
      return std::make_unique<GridEnv>(cfg.grid, std::move(g), std::move(gens));
    }
    case EnvConfig::Kind::Linear: {
      Graph g = n == 1 ? Graph(1, {})
                       : Graph::erdos_renyi(n, cfg.linear.er_p, topo.next_u64());
      std::optional<GibbsPotential> sw;
      if (cfg.linear.gibbs_sigma > 0.0)
        sw = GibbsPotential::gaussian(cfg.linear.gibbs_sigma);
      LinearGraphSystem sys = make_random_linear_graph_system(
          g, cfg.linear.state_dim, cfg.linear.control_dim,
          Rng::substream(instance_seed, 2).next_u64(), cfg.linear.noise_std,
          cfg.linear.spectral, cfg.linear.uniform_weights, sw);
      return std::make_unique<LinearGraphEnv>(std::move(sys),
                                              cfg.linear.x_init_amp,
                                              cfg.linear.u_max);
    }
  }
  throw ConfigError("bad environment kind");
}

std::unique_ptr<Environment> make_linear_env(LinearGraphSystem sys,
                                             double x_init_amp, double u_max) {
  return std::make_unique<LinearGraphEnv>(std::move(sys), x_init_amp, u_max);
}

Dataset generate_dataset(const EnvConfig& cfg, int episodes, int steps,
                         ActionPolicy policy, std::uint64_t master_seed,
                         int episode_offset) {
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
  if (steps < 1) throw ConfigError("steps must be >= 1");
  auto proto = make_env(cfg, Rng::substream(master_seed, 0x5EED).next_u64());
  Dataset ds;
  ds.graph = proto->graph();
  ds.obs_dim = proto->obs_dim();
  ds.action_dim = proto->action_dim();
  ds.env_fingerprint = cfg.fingerprint();
  ds.master_seed = master_seed;
  ds.trajectories.resize(episodes);
  parallel_for(0, episodes, [&](int e) {
    auto env = proto->clone();
    const std::uint64_t ep_seed =
        Rng::substream(master_seed,
                       1000 + static_cast<std::uint64_t>(episode_offset) +
                           static_cast<std::uint64_t>(e))
            .next_u64();
    env->reset(ep_seed);
    Rng action_rng = Rng::substream(ep_seed, 2);
    Trajectory traj;
    traj.seed = ep_seed;
    traj.observations.reserve(steps + 1);
    traj.actions.reserve(steps);
    traj.observations.push_back(env->observe());
    const int hold = std::max(1, cfg.excitation_hold);
    Eigen::MatrixXd held;
    for (int t = 0; t < steps; ++t) {
      if (policy == ActionPolicy::Zero) {
        held = Eigen::MatrixXd::Zero(ds.action_dim, ds.graph.size());
      } else if (t % hold == 0) {
        held = env->sample_excitation(action_rng);
      }
      Eigen::MatrixXd a = held;
      env->step(a);
      traj.actions.push_back(std::move(a));
      traj.observations.push_back(env->observe());
    }
    ds.trajectories[e] = std::move(traj);
  });
  return ds;
}

Dataset inject_noise(const Dataset& ds, double fraction, std::uint64_t seed) {
  if (fraction < 0.0) throw ConfigError("noise fraction must be >= 0");
  Dataset out = ds;
  if (fraction == 0.0) return out;
  const int od = ds.obs_dim;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(od);
  Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(od);
  long long count = 0;
  for (const auto& traj : ds.trajectories)
    for (const auto& o : traj.observations) {
      sum += o.rowwise().sum();
      sumsq += o.array().square().matrix().rowwise().sum();
      count += o.cols();
    }
  Eigen::VectorXd mean = sum / static_cast<double>(count);
  Eigen::VectorXd sigma =
      (sumsq / static_cast<double>(count) - mean.array().square().matrix())
          .cwiseMax(0.0)
          .cwiseSqrt();
  Rng rng = Rng::substream(seed, 0);
  for (auto& traj : out.trajectories)
    for (auto& o : traj.observations)
      for (int i = 0; i < o.cols(); ++i)
        for (int k = 0; k < od; ++k)
          o(k, i) += fraction * sigma(k) * rng.normal();
  return out;
}

}  // namespace kdc
