#include "kdc/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>

#include "kdc/errors.hpp"
#include "kdc/io_util.hpp"
#include "kdc/parallel.hpp"
#include "kdc/version.hpp"

namespace kdc {

using nlohmann::json;

void ExperimentConfig::validate() const {
  if (fitting_number < 1) throw ConfigError("fitting number must be >= 1");
  if (episode_steps < 1) throw ConfigError("episode steps must be >= 1");
  if (noise < 0.0) throw ConfigError("noise fraction must be >= 0");
  if (eval_episodes < 1) throw ConfigError("eval episodes must be >= 1");
  if (control.horizon < 1) throw ConfigError("control horizon must be >= 1");
  if (control.episodes < 1) throw ConfigError("control episodes must be >= 1");
  if (lambda > 0.0 && !std::isfinite(lambda))
    throw ConfigError("lambda must be finite");
  potential.validate();
  if (features.kind == FeatureKind::RandomFourier && features.dim < 1)
    throw ConfigError("feature dim must be >= 1");
  if (features.kind == FeatureKind::Polynomial &&
      (features.degree < 1 || features.degree > 2))
    throw ConfigError("polynomial degree must be 1 or 2");
}

json ExperimentConfig::to_json() const {
  return {{"env", env.to_json()},
          {"features",
           {{"kind", to_string(features.kind)},
            {"dim", features.dim},
            {"gamma", features.gamma},
            {"degree", features.degree},
            {"augment", features.augment},
            {"seed", features.seed},
            {"action_feature_dim", features.action_feature_dim},
            {"decoder_rho", features.decoder_rho}}},
          {"form", to_string(form)},
          {"potential", potential.to_json()},
          {"lambda", lambda},
          {"fitting_number", fitting_number},
          {"episode_steps", episode_steps},
          {"noise", noise},
          {"control",
           {{"horizon", control.horizon},
            {"feedback_step", control.feedback_step},
            {"q1", control.q1},
            {"q2", control.q2},
            {"episodes", control.episodes}}},
          {"eval_episodes", eval_episodes},
          {"eval_horizon", eval_horizon},
          {"sweep_repeats", sweep_repeats},
          {"sweep_with_control", sweep_with_control},
          {"master_seed", master_seed},
          {"rope_target_shift", rope_target_shift},
          {"linear_target", linear_target}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  if (j.contains("env")) c.env = EnvConfig::from_json(j["env"]);
  if (j.contains("features")) {
    const auto& f = j["features"];
    if (f.contains("kind"))
      c.features.kind = feature_kind_from_string(f["kind"].get<std::string>());
    c.features.dim = f.value("dim", c.features.dim);
    c.features.gamma = f.value("gamma", c.features.gamma);
    c.features.degree = f.value("degree", c.features.degree);
    c.features.augment = f.value("augment", c.features.augment);
    c.features.seed = f.value("seed", c.features.seed);
    c.features.action_feature_dim =
        f.value("action_feature_dim", c.features.action_feature_dim);
    c.features.decoder_rho = f.value("decoder_rho", c.features.decoder_rho);
  }
  if (j.contains("form"))
    c.form = embed_form_from_string(j["form"].get<std::string>());
  if (j.contains("potential"))
    c.potential = GibbsPotential::from_json(j["potential"]);
  c.lambda = j.value("lambda", c.lambda);
  c.fitting_number = j.value("fitting_number", c.fitting_number);
  c.episode_steps = j.value("episode_steps", c.episode_steps);
  c.noise = j.value("noise", c.noise);
  if (j.contains("control")) {
    const auto& k = j["control"];
    c.control.horizon = k.value("horizon", c.control.horizon);
    c.control.feedback_step = k.value("feedback_step", c.control.feedback_step);
    c.control.q1 = k.value("q1", c.control.q1);
    c.control.q2 = k.value("q2", c.control.q2);
    c.control.episodes = k.value("episodes", c.control.episodes);
  }
  c.eval_episodes = j.value("eval_episodes", c.eval_episodes);
  c.eval_horizon = j.value("eval_horizon", c.eval_horizon);
  c.sweep_repeats = j.value("sweep_repeats", c.sweep_repeats);
  c.sweep_with_control = j.value("sweep_with_control", c.sweep_with_control);
  c.master_seed = j.value("master_seed", c.master_seed);
  c.rope_target_shift = j.value("rope_target_shift", c.rope_target_shift);
  c.linear_target = j.value("linear_target", c.linear_target);
  return c;
}

std::string ExperimentConfig::config_hash() const {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(to_json().dump())));
  return buf;
}

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;
  if (name == "rope") {
    c.env.kind = EnvConfig::Kind::Rope;
    c.env.nodes_lo = 5;
    c.env.nodes_hi = 9;
    c.control.horizon = 40;  // open-loop protocol
    c.control.feedback_step = 0;
    c.features.kind = FeatureKind::RandomFourier;
    c.features.dim = 64;
  } else if (name == "grid") {
    c.env.kind = EnvConfig::Kind::Grid;
    c.env.nodes_lo = 100;
    c.env.nodes_hi = 150;
    c.env.er_p = 0.15;
    // stabilization scenario: a network-wide sag/swell on top of per-node
    // spread; identification uses hard excitation so the per-pair action
    // blocks rise well above their sampling noise
    c.env.grid.v_common_amp = 0.12;
    c.env.grid.v_init_amp = 0.05;
    c.env.grid.u_max = 10.0;
    c.control.horizon = 100;  // feedback at mid-horizon protocol
    c.control.feedback_step = 50;
    c.control.episodes = 50;
    c.features.kind = FeatureKind::Polynomial;
    c.features.degree = 1;
    c.features.augment = true;
    c.potential = GibbsPotential::gaussian(0.05);
    c.fitting_number = 12;
    c.eval_episodes = 8;
  } else if (name == "linear") {
    c.env.kind = EnvConfig::Kind::Linear;
    c.env.nodes_lo = 10;
    c.env.nodes_hi = 10;
    c.features.kind = FeatureKind::Identity;
    c.features.augment = false;
    c.control.horizon = 40;
    c.eval_horizon = 40;
  } else {
    throw ConfigError("unknown preset: " + name);
  }
  return c;
}

FeatureMaps build_feature_maps(const FeatureConfig& fc, const Dataset& train) {
  FeatureMaps maps;
  switch (fc.kind) {
    case FeatureKind::Identity:
      maps.obs = FeatureMap::identity(train.obs_dim, fc.augment);
      break;
    case FeatureKind::Polynomial:
      maps.obs = FeatureMap::polynomial(train.obs_dim, fc.degree, fc.augment);
      break;
    case FeatureKind::RandomFourier: {
      double gamma = fc.gamma;
      if (gamma <= 0.0) {
        // median heuristic over a deterministic subsample of encoder inputs
        FeatureMap probe = FeatureMap::identity(train.obs_dim, fc.augment);
        std::vector<Eigen::VectorXd> inputs;
        const long long total =
            train.transitions() + static_cast<long long>(train.trajectories.size());
        const long long stride =
            std::max<long long>(1, total * train.nodes() / 1000);
        long long tick = 0;
        for (const auto& traj : train.trajectories)
          for (const auto& o : traj.observations)
            for (int i = 0; i < o.cols(); ++i)
              if (tick++ % stride == 0)
                inputs.push_back(probe.encode_node(train.graph, o, i));
        Eigen::MatrixXd m(probe.dim(), inputs.size());
        for (std::size_t i = 0; i < inputs.size(); ++i) m.col(i) = inputs[i];
        gamma = median_heuristic_gamma(m);
      }
      maps.obs = FeatureMap::random_fourier(train.obs_dim, fc.dim, gamma,
                                            fc.seed, fc.augment);
      break;
    }
  }
  if (fc.action_feature_dim > 0 && fc.action_feature_dim != train.action_dim)
    maps.action =
        ActionProjection::random(train.action_dim, fc.action_feature_dim,
                                 fc.seed + 0x9E37);
  else
    maps.action = ActionProjection::identity(train.action_dim);
  return maps;
}

Decoder build_decoder(const FeatureConfig& fc, const Dataset& train,
                      const FeatureMaps& maps, double* residual_out) {
  long long samples = 0;
  for (const auto& traj : train.trajectories)
    samples += static_cast<long long>(traj.observations.size()) * train.nodes();
  Eigen::MatrixXd feats(maps.obs.dim(), samples);
  Eigen::MatrixXd targets(train.obs_dim, samples);
  long long c = 0;
  for (const auto& traj : train.trajectories)
    for (const auto& o : traj.observations) {
      feats.middleCols(c, o.cols()) = maps.obs.encode_all(train.graph, o);
      targets.middleCols(c, o.cols()) = o;
      c += o.cols();
    }
  double rho = fc.decoder_rho;
  if (rho <= 0.0) {
    double mean_diag = feats.squaredNorm() / maps.obs.dim();
    rho = std::max(1e-8 * mean_diag / static_cast<double>(samples), 1e-12) *
          static_cast<double>(samples);
  }
  Decoder dec = fit_decoder(feats, targets, rho);
  if (residual_out) *residual_out = decoder_residual(dec, feats, targets);
  return dec;
}

Eigen::MatrixXd control_target(const ExperimentConfig& cfg,
                               const Environment& env) {
  const int n = env.graph().size();
  switch (cfg.env.kind) {
    case EnvConfig::Kind::Rope: {
      RopeConfig rc = cfg.env.rope;
      rc.masses = n;
      return rope_observe(rope_equilibrium(rc, cfg.rope_target_shift));
    }
    case EnvConfig::Kind::Grid: {
      Eigen::MatrixXd target = Eigen::MatrixXd::Zero(2, n);
      target.row(0).setConstant(cfg.env.grid.v_ref);
      return target;
    }
    case EnvConfig::Kind::Linear:
      return Eigen::MatrixXd::Constant(env.obs_dim(), n, cfg.linear_target);
  }
  throw ConfigError("bad environment kind");
}

Dataset generate_for_config(const ExperimentConfig& cfg, int episodes,
                            int steps, ActionPolicy policy,
                            int episode_offset) {
  Dataset ds = generate_dataset(cfg.env, episodes, steps, policy,
                                cfg.master_seed, episode_offset);
  if (cfg.noise > 0.0)
    ds = inject_noise(ds, cfg.noise,
                      Rng::substream(cfg.master_seed, 0xA0 + episode_offset)
                          .next_u64());
  return ds;
}

namespace {

std::string csv_meta(const ExperimentConfig& cfg) {
  return "# kdc_version=" + std::string(kVersion) +
         " config_hash=" + cfg.config_hash() + "\n";
}

double condition_number(const Eigen::MatrixXd& m, double lambda) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  double lo = es.eigenvalues().minCoeff() + lambda;
  double hi = es.eigenvalues().maxCoeff() + lambda;
  return lo > 0 ? hi / lo : std::numeric_limits<double>::infinity();
}

}  // namespace

ModelArtifact fit_artifact(const ExperimentConfig& cfg, const Dataset& train) {
  ModelArtifact a;
  a.maps = build_feature_maps(cfg.features, train);
  a.decoder =
      build_decoder(cfg.features, train, a.maps, &a.report.decoder_residual);
  EncodedDataset enc = encode_dataset(train, a.maps);
  FitConfig fit;
  fit.form = cfg.form;
  fit.lambda = cfg.lambda;
  fit.potential = cfg.potential;
  Moments m = accumulate_moments(enc, fit);
  a.model = fit_embedding(enc, fit);
  a.report.max_normal_eq_residual = verify_normal_equations(a.model, m);
  a.report.sample_count = m.count;
  a.report.lambda_configured = cfg.lambda;
  double worst = 0.0;
  if (cfg.form == EmbedForm::HomMean)
    worst = condition_number(m.c_hbarbar, a.model.lambda_pool_used);
  for (int j = 0; j < train.nodes(); ++j) {
    if (cfg.form == EmbedForm::Dense || cfg.form == EmbedForm::Hom)
      worst = std::max(worst,
                       condition_number(m.c_hh[j], a.model.lambda_h_used[j]));
    if (cfg.form == EmbedForm::Tensor)
      worst = std::max(worst,
                       condition_number(m.c_zz[j], a.model.lambda_z_used[j]));
    if (cfg.form != EmbedForm::Tensor)
      worst = std::max(worst,
                       condition_number(m.c_aa[j], a.model.lambda_a_used[j]));
  }
  a.report.worst_condition = worst;
  return a;
}

void cmd_generate(const ExperimentConfig& cfg, int episodes, int steps,
                  ActionPolicy policy, int episode_offset,
                  const std::string& out_dir) {
  cfg.validate();
  Dataset ds = generate_for_config(cfg, episodes, steps, policy, episode_offset);
  save_dataset(out_dir, ds);
}

void cmd_fit(const ExperimentConfig& cfg, const std::string& dataset_dir,
             const std::string& model_dir) {
  cfg.validate();
  Dataset train = load_dataset(dataset_dir);
  ModelArtifact artifact = fit_artifact(cfg, train);
  save_model(model_dir, artifact);
}

void cmd_eval_predict(const ExperimentConfig& cfg, const std::string& model_dir,
                      const std::string& test_dataset_dir,
                      const std::string& out_csv) {
  cfg.validate();
  ModelArtifact artifact = load_model(model_dir);
  Dataset test = load_dataset(test_dataset_dir);
  int horizon = cfg.eval_horizon;
  for (const auto& traj : test.trajectories)
    horizon = std::min(horizon, traj.steps());
  if (horizon < cfg.eval_horizon)
    throw ConfigError("eval horizon exceeds test trajectory length");
  NrmseCurve curve = prediction_nrmse(artifact.model, artifact.maps,
                                      artifact.decoder, test, horizon);
  std::ostringstream out;
  out << csv_meta(cfg) << "step,nrmse_mean,nrmse_std\n";
  for (int t = 0; t < horizon; ++t)
    out << (t + 1) << "," << format_double(curve.mean(t)) << ","
        << format_double(curve.stddev(t)) << "\n";
  write_text_file(out_csv, out.str());
}

void cmd_control(const ExperimentConfig& cfg, const std::string& model_dir,
                 const std::string& out_csv) {
  cfg.validate();
  ModelArtifact artifact = load_model(model_dir);
  auto proto = make_env(cfg.env, Rng::substream(cfg.master_seed, 0x5EED).next_u64());
  if (proto->graph().edges() != artifact.model.graph.edges() ||
      proto->graph().size() != artifact.model.graph.size())
    throw ConfigError("model was fitted on a different environment instance");
  Eigen::MatrixXd target = control_target(cfg, *proto);
  std::optional<int> feedback;
  if (cfg.control.feedback_step > 0) feedback = cfg.control.feedback_step;
  ControlProblem problem =
      make_control_problem(target, proto->graph(), artifact.maps,
                           cfg.control.horizon, cfg.control.q1, cfg.control.q2,
                           feedback);
  const int episodes = cfg.control.episodes;
  std::vector<double> costs(episodes), errors(episodes);
  parallel_for(0, episodes, [&](int e) {
    auto env = proto->clone();
    env->reset(Rng::substream(cfg.master_seed, 5000 + e).next_u64());
    ControlResult r =
        receding_horizon_control(*env, artifact.model, artifact.maps, problem);
    costs[e] = r.cost;
    errors[e] = r.error;
  });
  auto mean_std = [](const std::vector<double>& v) {
    double mu = 0.0;
    for (double x : v) mu += x;
    mu /= v.size();
    double var = 0.0;
    for (double x : v) var += (x - mu) * (x - mu);
    var = v.size() > 1 ? var / (v.size() - 1) : 0.0;
    return std::pair<double, double>(mu, std::sqrt(var));
  };
  std::ostringstream out;
  out << csv_meta(cfg) << "episode,cost,error\n";
  for (int e = 0; e < episodes; ++e)
    out << e << "," << format_double(costs[e]) << ","
        << format_double(errors[e]) << "\n";
  auto [cm, cs] = mean_std(costs);
  auto [em, es] = mean_std(errors);
  out << "mean," << format_double(cm) << "," << format_double(em) << "\n";
  out << "std," << format_double(cs) << "," << format_double(es) << "\n";
  write_text_file(out_csv, out.str());
}

namespace {

struct SweepCell {
  double axis_value = 0.0;
  EmbedForm form = EmbedForm::HomMean;
};

struct CellMetrics {
  std::vector<std::pair<std::string, double>> values;
};

CellMetrics run_sweep_cell(const ExperimentConfig& cell_cfg, int repeat) {
  ExperimentConfig cfg = cell_cfg;
  cfg.master_seed = Rng::substream(cell_cfg.master_seed, 3000 + repeat).next_u64();
  Dataset train = generate_for_config(cfg, cfg.fitting_number,
                                      cfg.episode_steps,
                                      ActionPolicy::RandomExcitation, 0);
  Dataset test = generate_for_config(cfg, cfg.eval_episodes, cfg.episode_steps,
                                     ActionPolicy::RandomExcitation, 500000);
  ModelArtifact artifact = fit_artifact(cfg, train);
  const int horizon = std::min(cfg.eval_horizon, cfg.episode_steps);
  NrmseCurve curve = prediction_nrmse(artifact.model, artifact.maps,
                                      artifact.decoder, test, horizon);
  CellMetrics out;
  out.values.emplace_back("nrmse_step1", curve.mean(0));
  out.values.emplace_back("nrmse_step" + std::to_string(horizon),
                          curve.mean(horizon - 1));
  if (cfg.sweep_with_control && cfg.form != EmbedForm::Tensor) {
    auto proto = make_env(cfg.env, Rng::substream(cfg.master_seed, 0x5EED).next_u64());
    Eigen::MatrixXd target = control_target(cfg, *proto);
    std::optional<int> feedback;
    if (cfg.control.feedback_step > 0) feedback = cfg.control.feedback_step;
    ControlProblem problem = make_control_problem(
        target, proto->graph(), artifact.maps, cfg.control.horizon,
        cfg.control.q1, cfg.control.q2, feedback);
    double cost = 0.0, err = 0.0;
    const int eps = std::max(1, cfg.control.episodes);
    for (int e = 0; e < eps; ++e) {
      auto env = proto->clone();
      env->reset(Rng::substream(cfg.master_seed, 5000 + e).next_u64());
      ControlResult r = receding_horizon_control(*env, artifact.model,
                                                 artifact.maps, problem);
      cost += r.cost;
      err += r.error;
    }
    out.values.emplace_back("control_cost", cost / eps);
    out.values.emplace_back("control_error", err / eps);
  }
  return out;
}

}  // namespace

void cmd_sweep(const ExperimentConfig& cfg, const std::string& axis,
               const std::string& out_csv) {
  cfg.validate();
  std::vector<double> axis_values;
  std::vector<EmbedForm> forms = {EmbedForm::Dense, EmbedForm::Hom,
                                  EmbedForm::HomMean};
  if (axis == "fitting_number") {
    axis_values = {1, 4, 8, 16, 32};
  } else if (axis == "noise") {
    axis_values = {0.0, 0.02, 0.05, 0.10, 0.20};
  } else if (axis == "bandwidth") {
    axis_values = {0.1, 0.5, 1, 2, 3, 4, 5, 10};
    forms = {EmbedForm::HomMean};
  } else if (axis == "feature_dim") {
    axis_values = {8, 16, 32, 64};
  } else if (axis == "form") {
    axis_values = {0};
    forms = {EmbedForm::Tensor, EmbedForm::Dense, EmbedForm::Hom,
             EmbedForm::HomMean};
    if (cfg.sweep_with_control)
      forms = {EmbedForm::Dense, EmbedForm::Hom, EmbedForm::HomMean};
  } else {
    throw ConfigError("unknown sweep axis: " + axis);
  }

  struct Row {
    double axis_value;
    EmbedForm form;
    std::string metric;
    double mean, std;
  };
  std::vector<Row> rows;
  for (double value : axis_values) {
    for (EmbedForm form : forms) {
      ExperimentConfig cell = cfg;
      cell.form = form;
      if (form == EmbedForm::HomMean && !cell.potential.param)
        cell.potential = GibbsPotential::gaussian(2.0);
      if (axis == "fitting_number") cell.fitting_number = static_cast<int>(value);
      if (axis == "noise") cell.noise = value;
      if (axis == "bandwidth") cell.potential = GibbsPotential::gaussian(value);
      if (axis == "feature_dim") cell.features.dim = static_cast<int>(value);
      // repeats share seeds across cells for paired comparisons
      std::vector<CellMetrics> reps(cfg.sweep_repeats);
      parallel_for(0, cfg.sweep_repeats,
                   [&](int r) { reps[r] = run_sweep_cell(cell, r); });
      for (std::size_t k = 0; k < reps.front().values.size(); ++k) {
        double mu = 0.0;
        for (const auto& rep : reps) mu += rep.values[k].second;
        mu /= reps.size();
        double var = 0.0;
        for (const auto& rep : reps)
          var += (rep.values[k].second - mu) * (rep.values[k].second - mu);
        var = reps.size() > 1 ? var / (reps.size() - 1) : 0.0;
        rows.push_back({value, form, reps.front().values[k].first, mu,
                        std::sqrt(var)});
      }
    }
  }
  std::ostringstream out;
  out << csv_meta(cfg) << "axis,axis_value,form,metric,mean,std\n";
  for (const auto& r : rows) {
    char axis_label[32];
    std::snprintf(axis_label, sizeof(axis_label), "%g", r.axis_value);
    out << axis << "," << axis_label << "," << to_string(r.form) << ","
        << r.metric << "," << format_double(r.mean) << ","
        << format_double(r.std) << "\n";
  }
  write_text_file(out_csv, out.str());
}

}  // namespace kdc
