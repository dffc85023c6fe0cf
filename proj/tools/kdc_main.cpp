// kdc command line: identify multi-object dynamics as linear operators on
// kernel feature spaces and synthesize control in that space.

#include <CLI11.hpp>
#include <iostream>
#include <nlohmann/json.hpp>

#include "kdc/errors.hpp"
#include "kdc/experiment.hpp"
#include "kdc/io_util.hpp"
#include "kdc/version.hpp"

namespace {

struct CommonFlags {
  std::string config_file;
  std::string preset;
  std::string env_kind;
  std::string form;
  std::string feature_kind;
  std::string potential_kind;
  double potential_param = -1.0;
  double lambda = -1.0;
  int fitting_number = -1;
  int episode_steps = -1;
  double noise = -1.0;
  int feature_dim = -1;
  double gamma = -1.0;
  int degree = -1;
  int augment = -1;
  long long master_seed = -1;
  int horizon = -1;
  int feedback_step = -1;
  double q2 = -1.0;
  int control_episodes = -1;
  int eval_episodes = -1;
  int eval_horizon = -1;
  int sweep_repeats = -1;
  bool sweep_control = false;
  int nodes_lo = -1, nodes_hi = -1;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_file, "JSON config file");
  cmd->add_option("--preset", f.preset, "preset: rope | grid | linear");
  cmd->add_option("--env", f.env_kind, "environment kind override");
  cmd->add_option("--form", f.form, "tensor | dense | hom | hom_mean");
  cmd->add_option("--features", f.feature_kind,
                  "identity | rff | polynomial");
  cmd->add_option("--potential", f.potential_kind,
                  "gaussian | laplace | vmf");
  cmd->add_option("--potential-param", f.potential_param,
                  "potential hyperparameter");
  cmd->add_option("--lambda", f.lambda, "ridge strength (0 = auto)");
  cmd->add_option("--fitting-number", f.fitting_number,
                  "identification trajectories");
  cmd->add_option("--steps", f.episode_steps, "steps per episode");
  cmd->add_option("--noise", f.noise, "observation noise fraction");
  cmd->add_option("--feature-dim", f.feature_dim, "random-fourier width");
  cmd->add_option("--gamma", f.gamma, "kernel bandwidth (0 = median)");
  cmd->add_option("--degree", f.degree, "polynomial degree");
  cmd->add_option("--augment", f.augment,
                  "1: concatenate the neighborhood mean");
  cmd->add_option("--seed", f.master_seed, "master seed");
  cmd->add_option("--horizon", f.horizon, "control horizon");
  cmd->add_option("--feedback", f.feedback_step,
                  "feedback step (0 = open loop)");
  cmd->add_option("--q2", f.q2, "action cost weight");
  cmd->add_option("--control-episodes", f.control_episodes,
                  "control evaluation episodes");
  cmd->add_option("--eval-episodes", f.eval_episodes, "test trajectories");
  cmd->add_option("--eval-horizon", f.eval_horizon, "prediction horizon");
  cmd->add_option("--sweep-repeats", f.sweep_repeats, "repeats per cell");
  cmd->add_flag("--sweep-control", f.sweep_control,
                "include control metrics in sweeps");
  cmd->add_option("--nodes-lo", f.nodes_lo, "node count lower bound");
  cmd->add_option("--nodes-hi", f.nodes_hi, "node count upper bound");
}

kdc::ExperimentConfig resolve_config(const CommonFlags& f) {
  kdc::ExperimentConfig cfg;
  if (!f.preset.empty()) cfg = kdc::preset_config(f.preset);
  if (!f.config_file.empty()) {
    auto j = nlohmann::json::parse(kdc::read_text_file(f.config_file));
    cfg = kdc::ExperimentConfig::from_json(j);
  }
  if (!f.env_kind.empty()) cfg.env.kind = kdc::env_kind_from_string(f.env_kind);
  if (!f.form.empty()) cfg.form = kdc::embed_form_from_string(f.form);
  if (!f.feature_kind.empty())
    cfg.features.kind = kdc::feature_kind_from_string(f.feature_kind);
  if (!f.potential_kind.empty()) {
    double p = f.potential_param > 0 ? f.potential_param : cfg.potential.param;
    nlohmann::json pj = {{"kind", f.potential_kind}, {"param", p}};
    cfg.potential = kdc::GibbsPotential::from_json(pj);
  } else if (f.potential_param > 0) {
    cfg.potential.param = f.potential_param;
  }
  if (f.lambda >= 0) cfg.lambda = f.lambda;
  if (f.fitting_number > 0) cfg.fitting_number = f.fitting_number;
  if (f.episode_steps > 0) cfg.episode_steps = f.episode_steps;
  if (f.noise >= 0) cfg.noise = f.noise;
  if (f.feature_dim > 0) cfg.features.dim = f.feature_dim;
  if (f.gamma >= 0) cfg.features.gamma = f.gamma;
  if (f.degree > 0) cfg.features.degree = f.degree;
  if (f.augment >= 0) cfg.features.augment = f.augment != 0;
  if (f.master_seed >= 0)
    cfg.master_seed = static_cast<std::uint64_t>(f.master_seed);
  if (f.horizon > 0) cfg.control.horizon = f.horizon;
  if (f.feedback_step >= 0) cfg.control.feedback_step = f.feedback_step;
  if (f.q2 > 0) cfg.control.q2 = f.q2;
  if (f.control_episodes > 0) cfg.control.episodes = f.control_episodes;
  if (f.eval_episodes > 0) cfg.eval_episodes = f.eval_episodes;
  if (f.eval_horizon > 0) cfg.eval_horizon = f.eval_horizon;
  if (f.sweep_repeats > 0) cfg.sweep_repeats = f.sweep_repeats;
  if (f.sweep_control) cfg.sweep_with_control = true;
  if (f.nodes_lo > 0) cfg.env.nodes_lo = f.nodes_lo;
  if (f.nodes_hi > 0) cfg.env.nodes_hi = f.nodes_hi;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kernel-feature dynamics identification and control"};
  app.set_version_flag("--version", kdc::kVersion);
  app.require_subcommand(1);

  CommonFlags f;
  std::string out = "out";
  std::string dataset_dir, model_dir, test_dir, axis = "fitting_number";
  int episodes = 8;
  std::string policy = "random";
  int episode_offset = 0;

  auto* gen = app.add_subcommand("generate", "simulate a dataset to disk");
  add_common(gen, f);
  gen->add_option("--episodes", episodes, "episode count");
  gen->add_option("--policy", policy, "zero | random");
  gen->add_option("--episode-offset", episode_offset,
                  "substream offset (held-out sets)");
  gen->add_option("--out", out, "output dataset directory")->required();

  auto* fit = app.add_subcommand("fit", "fit maps, decoder and operators");
  add_common(fit, f);
  fit->add_option("--dataset", dataset_dir, "training dataset directory")
      ->required();
  fit->add_option("--out", out, "output model directory")->required();

  auto* evalp = app.add_subcommand("eval-predict", "rollout NRMSE curve CSV");
  add_common(evalp, f);
  evalp->add_option("--model", model_dir, "model directory")->required();
  evalp->add_option("--dataset", test_dir, "test dataset directory")
      ->required();
  evalp->add_option("--out", out, "output CSV path")->required();

  auto* ctrl = app.add_subcommand("control", "closed-loop control episodes CSV");
  add_common(ctrl, f);
  ctrl->add_option("--model", model_dir, "model directory")->required();
  ctrl->add_option("--out", out, "output CSV path")->required();

  auto* sweep = app.add_subcommand("sweep", "one-axis sweep, long-format CSV");
  add_common(sweep, f);
  sweep->add_option("--axis", axis,
                    "fitting_number | noise | bandwidth | feature_dim | form");
  sweep->add_option("--out", out, "output CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    kdc::ExperimentConfig cfg = resolve_config(f);
    if (gen->parsed()) {
      kdc::ActionPolicy p;
      if (policy == "zero") p = kdc::ActionPolicy::Zero;
      else if (policy == "random") p = kdc::ActionPolicy::RandomExcitation;
      else throw kdc::ConfigError("unknown policy: " + policy);
      kdc::cmd_generate(cfg, episodes, cfg.episode_steps, p, episode_offset,
                        out);
    } else if (fit->parsed()) {
      kdc::cmd_fit(cfg, dataset_dir, out);
    } else if (evalp->parsed()) {
      kdc::cmd_eval_predict(cfg, model_dir, test_dir, out);
    } else if (ctrl->parsed()) {
      kdc::cmd_control(cfg, model_dir, out);
    } else if (sweep->parsed()) {
      kdc::cmd_sweep(cfg, axis, out);
    }
  } catch (const kdc::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const kdc::IoError& e) {
    std::cerr << "io failure: " << e.what() << "\n";
    return 4;
  } catch (const kdc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
