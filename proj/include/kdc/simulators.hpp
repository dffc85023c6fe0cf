#pragma once

#include <Eigen/Dense>
#include <memory>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <string>
#include <vector>

#include "kdc/dataset.hpp"
#include "kdc/graph.hpp"
#include "kdc/mean_field.hpp"
#include "kdc/rng.hpp"

namespace kdc {

// ---------------------------------------------------------------------------
// Rope: chain of masses under gravity, springs between adjacent masses, top
// mass at fixed height driven horizontally.

struct RopeConfig {
  int masses = 5;
  double mass = 1.0;        // kg
  double stiffness = 500.0; // N/m
  double rest_length = 0.1; // m
  double damping = 0.5;     // N s/m
  double gravity = 9.81;
  double dt = 0.01;
  double init_angle = 0.3;  // max link angle from vertical at reset, rad
  double u_max = 5.0;       // excitation force bound, N
  bool two_hop_edges = false;
};

struct RopeState {
  Eigen::MatrixXd pos;  // 2 x N, columns (x, y)
  Eigen::MatrixXd vel;  // 2 x N
};

// Vertical static equilibrium: per-link stretch balances the weight hanging
// below the link.
RopeState rope_equilibrium(const RopeConfig& cfg, double top_x = 0.0);
RopeState rope_initial_state(const RopeConfig& cfg, Rng& rng);

// Semi-implicit Euler; u is the horizontal force on the top mass. The top
// mass keeps its height (y and vy clamped).
RopeState rope_step(const RopeState& state, double u, const RopeConfig& cfg);

Eigen::MatrixXd rope_observe(const RopeState& state);  // 4 x N: x, y, vx, vy
double rope_energy(const RopeState& state, const RopeConfig& cfg);
Graph rope_graph(const RopeConfig& cfg);

// ---------------------------------------------------------------------------
// Voltage network: second-order damped consensus toward the reference voltage;
// control enters as acceleration at generator nodes, load nodes carry process
// noise.

struct GridConfig {
  double damping = 1.0;    // a
  double coupling = 2.0;   // b
  double restoring = 0.5;  // c_r
  double dt = 0.05;
  double v_ref = 1.0;
  double gen_ratio_lo = 0.2;
  double gen_ratio_hi = 0.5;
  double noise_std = 0.0;      // load disturbance per step
  double u_max = 1.0;          // excitation bound
  double v_init_amp = 0.15;    // per-node initial deviation
  double v_common_amp = 0.0;   // network-wide initial offset (sag/swell)
  double vdot_init_amp = 0.05;
};

struct GridState {
  Eigen::VectorXd v;
  Eigen::VectorXd vdot;
};

// Ratio drawn from [lo, hi]; at least one generator.
std::vector<bool> make_generator_mask(int n, const GridConfig& cfg, Rng& rng);

GridState grid_step(const GridState& state, const Eigen::VectorXd& u,
                    const std::vector<bool>& generators, const Graph& g,
                    const GridConfig& cfg, double noise_std, Rng& rng);

Eigen::MatrixXd grid_observe(const GridState& state);  // 2 x N: V, Vdot

// Continuous-time system matrix [[0, I], [-(bL + c_r I), -a I]]; Hurwitz for
// the default parameters.
Eigen::MatrixXd grid_system_matrix(const Graph& g, const GridConfig& cfg);

// ---------------------------------------------------------------------------
// Linear graph system: oracle testbed with known operators.
// x_{t+1}^i = A sum_j w_ij x_t^j + B u_t^i + noise. When a Gibbs potential is
// set the weights are recomputed from the current state, otherwise the fixed
// per-edge simplex weights apply.

struct LinearGraphSystem {
  Graph graph;
  std::vector<Eigen::VectorXd> weights;  // per node over inclusive nbrs
  Eigen::MatrixXd A;                     // dx x dx
  Eigen::MatrixXd B;                     // dx x du
  double noise_std = 0.0;
  std::optional<GibbsPotential> state_weights;

  int state_dim() const { return static_cast<int>(A.rows()); }
  int control_dim() const { return static_cast<int>(B.cols()); }

  Eigen::MatrixXd aggregate(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd step(const Eigen::MatrixXd& x, const Eigen::MatrixXd& u,
                       Rng& rng) const;
};

// A scaled to the requested largest singular value (< 1 keeps the global
// transition stable for any simplex weights); weights drawn non-uniform unless
// requested otherwise.
LinearGraphSystem make_random_linear_graph_system(
    const Graph& g, int dx, int du, std::uint64_t seed, double noise_std,
    double spectral = 0.9, bool uniform_weights = false,
    std::optional<GibbsPotential> state_weights = std::nullopt);

// Spectral radius of the fixed-weight global transition (W kron A).
double global_spectral_radius(const LinearGraphSystem& sys);

// ---------------------------------------------------------------------------
// Environment wrapper and dataset generation.

class Environment {
 public:
  virtual ~Environment() = default;
  virtual const Graph& graph() const = 0;
  virtual int obs_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual Eigen::MatrixXd observe() const = 0;
  virtual void step(const Eigen::MatrixXd& actions) = 0;
  virtual void reset(std::uint64_t seed) = 0;
  // Random identification action; zero wherever control has no authority.
  virtual Eigen::MatrixXd sample_excitation(Rng& rng) const = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;
};

struct LinearConfig {
  int state_dim = 2;
  int control_dim = 1;
  double noise_std = 0.05;
  double spectral = 0.9;
  bool uniform_weights = false;
  double gibbs_sigma = 0.0;  // > 0: state-dependent true weights
  double x_init_amp = 1.0;
  double u_max = 1.0;
  double er_p = 0.5;
};

struct EnvConfig {
  enum class Kind { Rope, Grid, Linear };
  Kind kind = Kind::Rope;
  int nodes_lo = 5;
  int nodes_hi = 9;
  double er_p = 0.15;  // grid topology
  // steps an excitation draw is held for; > 1 concentrates identification
  // energy in the low-frequency band
  int excitation_hold = 1;
  RopeConfig rope;
  GridConfig grid;
  LinearConfig linear;

  nlohmann::json to_json() const;
  static EnvConfig from_json(const nlohmann::json& j);
  std::string fingerprint() const;  // canonical JSON dump
};

std::string to_string(EnvConfig::Kind k);
EnvConfig::Kind env_kind_from_string(const std::string& s);

// Topology, masks and system parameters derive from instance_seed; episode
// randomness comes later through reset().
std::unique_ptr<Environment> make_env(const EnvConfig& cfg,
                                      std::uint64_t instance_seed);

// Environment around an explicitly constructed system (oracle tests).
std::unique_ptr<Environment> make_linear_env(LinearGraphSystem sys,
                                             double x_init_amp = 1.0,
                                             double u_max = 1.0);

enum class ActionPolicy { Zero, RandomExcitation };

// Episodes run on per-episode substreams of master_seed and may generate in
// parallel; the result is byte-identical for any thread count. episode_offset
// shifts the substream indices so held-out sets share the environment instance
// without sharing episode randomness.
Dataset generate_dataset(const EnvConfig& cfg, int episodes, int steps,
                         ActionPolicy policy, std::uint64_t master_seed,
                         int episode_offset = 0);

// Adds zero-mean Gaussian noise to observations, per-coordinate std equal to
// fraction x the clean dataset's std. Actions untouched.
Dataset inject_noise(const Dataset& ds, double fraction, std::uint64_t seed);

}  // namespace kdc
