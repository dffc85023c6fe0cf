#pragma once

#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <string>
#include <vector>

#include "kdc/control.hpp"
#include "kdc/embedding.hpp"
#include "kdc/serialize.hpp"
#include "kdc/simulators.hpp"

namespace kdc {

struct FeatureConfig {
  FeatureKind kind = FeatureKind::RandomFourier;
  int dim = 64;        // random-fourier width
  double gamma = 0.0;  // <= 0: median heuristic on the training inputs
  int degree = 2;      // polynomial
  bool augment = true;
  std::uint64_t seed = 1;
  int action_feature_dim = 0;  // 0: identity projection
  double decoder_rho = 0.0;    // <= 0: 1e-8 x mean gram diagonal
};

struct ControlSettings {
  int horizon = 40;
  int feedback_step = 0;  // 0: open loop
  double q1 = 1.0;
  double q2 = 1e-3;
  int episodes = 200;
};

struct ExperimentConfig {
  EnvConfig env;
  FeatureConfig features;
  EmbedForm form = EmbedForm::HomMean;
  GibbsPotential potential = GibbsPotential::gaussian(2.0);
  double lambda = 0.0;  // <= 0: scaled default
  int fitting_number = 8;
  int episode_steps = 100;
  double noise = 0.0;
  ControlSettings control;
  int eval_episodes = 16;
  int eval_horizon = 100;
  int sweep_repeats = 10;
  bool sweep_with_control = false;
  std::uint64_t master_seed = 12345;
  double rope_target_shift = 0.2;
  double linear_target = 1.0;

  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  std::string config_hash() const;
};

// Named protocol presets; horizons and feedback points follow the evaluation
// protocols the environments are used with.
ExperimentConfig preset_config(const std::string& name);

// Feature maps + decoder construction shared by fit and the sweeps.
FeatureMaps build_feature_maps(const FeatureConfig& fc, const Dataset& train);
Decoder build_decoder(const FeatureConfig& fc, const Dataset& train,
                      const FeatureMaps& maps, double* residual_out = nullptr);

// Target observation per environment kind (rope: shifted hanging equilibrium;
// grid: reference voltage at rest; linear: constant state).
Eigen::MatrixXd control_target(const ExperimentConfig& cfg,
                               const Environment& env);

// Subcommand bodies. All emit deterministic artifacts for a fixed seed.
void cmd_generate(const ExperimentConfig& cfg, int episodes, int steps,
                  ActionPolicy policy, int episode_offset,
                  const std::string& out_dir);
void cmd_fit(const ExperimentConfig& cfg, const std::string& dataset_dir,
             const std::string& model_dir);
void cmd_eval_predict(const ExperimentConfig& cfg, const std::string& model_dir,
                      const std::string& test_dataset_dir,
                      const std::string& out_csv);
void cmd_control(const ExperimentConfig& cfg, const std::string& model_dir,
                 const std::string& out_csv);
void cmd_sweep(const ExperimentConfig& cfg, const std::string& axis,
               const std::string& out_csv);

// Dataset generation honoring the configured observation-noise fraction.
Dataset generate_for_config(const ExperimentConfig& cfg, int episodes,
                            int steps, ActionPolicy policy,
                            int episode_offset = 0);

ModelArtifact fit_artifact(const ExperimentConfig& cfg, const Dataset& train);

}  // namespace kdc
