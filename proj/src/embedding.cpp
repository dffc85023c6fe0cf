#include "kdc/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kdc/errors.hpp"
#include "kdc/parallel.hpp"

namespace kdc {

std::string to_string(EmbedForm f) {
  switch (f) {
    case EmbedForm::Tensor: return "tensor";
    case EmbedForm::Dense: return "dense";
    case EmbedForm::Hom: return "hom";
    case EmbedForm::HomMean: return "hom_mean";
  }
  return "?";
}

EmbedForm embed_form_from_string(const std::string& s) {
  if (s == "tensor") return EmbedForm::Tensor;
  if (s == "dense") return EmbedForm::Dense;
  if (s == "hom") return EmbedForm::Hom;
  if (s == "hom_mean" || s == "hom+mean" || s == "hommean")
    return EmbedForm::HomMean;
  throw ConfigError("unknown embedding form: " + s);
}

void FitConfig::validate() const {
  if (lambda > 0.0 && !std::isfinite(lambda))
    throw ConfigError("ridge strength must be finite");
  if (form == EmbedForm::HomMean) {
    if (!potential) throw ConfigError("hom_mean requires a Gibbs potential");
    potential->validate();
  }
}

long long EncodedDataset::transitions() const {
  long long t = 0;
  for (const auto& traj : trajs) t += traj.steps();
  return t;
}

EncodedDataset encode_dataset(const Dataset& ds, const FeatureMaps& maps) {
  ds.validate();
  if (maps.obs.input_dim() != ds.obs_dim)
    throw std::invalid_argument("feature map does not match observation dim");
  if (maps.action.action_dim() != ds.action_dim)
    throw std::invalid_argument("action projection does not match action dim");
  EncodedDataset enc;
  enc.graph = ds.graph;
  enc.d = maps.obs.dim();
  enc.d_a = maps.action.dim();
  enc.trajs.resize(ds.trajectories.size());
  parallel_for(0, static_cast<int>(ds.trajectories.size()), [&](int t) {
    const auto& traj = ds.trajectories[t];
    EncodedTrajectory out;
    out.psi_obs.reserve(traj.observations.size());
    out.psi_act.reserve(traj.actions.size());
    for (const auto& o : traj.observations)
      out.psi_obs.push_back(maps.obs.encode_all(ds.graph, o));
    for (const auto& a : traj.actions)
      out.psi_act.push_back(maps.action.encode_all(a));
    enc.trajs[t] = std::move(out);
  });
  return enc;
}

Eigen::VectorXd tensorize(const Eigen::VectorXd& psi_h,
                          const Eigen::VectorXd& psi_a) {
  Eigen::VectorXd z(psi_h.size() * psi_a.size());
  for (int p = 0; p < psi_h.size(); ++p)
    z.segment(p * psi_a.size(), psi_a.size()) = psi_h(p) * psi_a;
  return z;
}

namespace {

void check_encoded(const EncodedDataset& ds) {
  if (ds.trajs.empty()) throw ConfigError("dataset has no trajectories");
  const int n = ds.graph.size();
  for (const auto& traj : ds.trajs) {
    if (traj.psi_obs.size() != traj.psi_act.size() + 1)
      throw ConfigError("encoded trajectory needs steps+1 observations");
    for (const auto& m : traj.psi_obs)
      if (m.rows() != ds.d || m.cols() != n)
        throw std::invalid_argument("encoded observation dims mismatch");
    for (const auto& m : traj.psi_act)
      if (m.rows() != ds.d_a || m.cols() != n)
        throw std::invalid_argument("encoded action dims mismatch");
  }
}

}  // namespace

Moments accumulate_moments(const EncodedDataset& ds, const FitConfig& cfg) {
  cfg.validate();
  check_encoded(ds);
  const Graph& g = ds.graph;
  const int n = g.size();
  const int d = ds.d, d_a = ds.d_a;
  const bool want_pairs_h = cfg.form == EmbedForm::Dense;
  const bool want_src_h =
      cfg.form == EmbedForm::Dense || cfg.form == EmbedForm::Hom;
  const bool want_recv_mean = cfg.form == EmbedForm::Hom;
  const bool want_pool = cfg.form == EmbedForm::HomMean;
  const bool want_tensor = cfg.form == EmbedForm::Tensor;
  const bool want_actions = !want_tensor;

  if (want_tensor && static_cast<long long>(d) * d_a > cfg.tensor_dim_guard)
    throw ConfigError("tensor feature dimension d*d_a exceeds the guard");

  Moments m;
  m.form = cfg.form;
  m.d = d;
  m.d_a = d_a;
  m.count = ds.transitions();
  if (m.count == 0) throw ConfigError("dataset has no transitions");

  auto zero_pairs = [&](int rows, int cols) {
    std::vector<std::vector<Eigen::MatrixXd>> v(n);
    for (int i = 0; i < n; ++i)
      v[i].assign(g.inclusive_neighborhood(i).size(),
                  Eigen::MatrixXd::Zero(rows, cols));
    return v;
  };
  auto zero_srcs = [&](int rows, int cols) {
    return std::vector<Eigen::MatrixXd>(n, Eigen::MatrixXd::Zero(rows, cols));
  };

  if (want_pairs_h) m.c_oh = zero_pairs(d, d);
  if (want_src_h) m.c_hh = zero_srcs(d, d);
  if (want_recv_mean) m.c_oh_recv_mean = zero_srcs(d, d);
  if (want_actions) {
    m.c_oa = zero_pairs(d, d_a);
    m.c_aa = zero_srcs(d_a, d_a);
  }
  if (want_tensor) {
    m.c_oz = zero_pairs(d, d * d_a);
    m.c_zz = zero_srcs(d * d_a, d * d_a);
  }

  // Mean observation feature per transition, shared by the Hom accumulation.
  std::vector<std::vector<Eigen::VectorXd>> obar;
  if (want_recv_mean) {
    obar.resize(ds.trajs.size());
    parallel_for(0, static_cast<int>(ds.trajs.size()), [&](int t) {
      const auto& traj = ds.trajs[t];
      obar[t].resize(traj.steps());
      for (int s = 0; s < traj.steps(); ++s)
        obar[t][s] = traj.psi_obs[s + 1].rowwise().mean();
    });
  }

  // Each node owns its per-source and per-receiver slots; accumulation runs in
  // (trajectory, step) order inside every slot regardless of thread count.
  parallel_for(0, n, [&](int u) {
    const auto& nbrs = g.inclusive_neighborhood(u);
    for (std::size_t ti = 0; ti < ds.trajs.size(); ++ti) {
      const auto& traj = ds.trajs[ti];
      for (int s = 0; s < traj.steps(); ++s) {
        const auto& ph = traj.psi_obs[s];
        const auto& po = traj.psi_obs[s + 1];
        const auto& pa = traj.psi_act[s];
        if (want_src_h) m.c_hh[u] += ph.col(u) * ph.col(u).transpose();
        if (want_recv_mean)
          m.c_oh_recv_mean[u] += obar[ti][s] * ph.col(u).transpose();
        if (want_actions) m.c_aa[u] += pa.col(u) * pa.col(u).transpose();
        if (want_tensor) {
          Eigen::VectorXd zu = tensorize(ph.col(u), pa.col(u));
          m.c_zz[u] += zu * zu.transpose();
          for (std::size_t k = 0; k < nbrs.size(); ++k) {
            Eigen::VectorXd zj = tensorize(ph.col(nbrs[k]), pa.col(nbrs[k]));
            m.c_oz[u][k] += po.col(u) * zj.transpose();
          }
        }
        for (std::size_t k = 0; k < nbrs.size(); ++k) {
          if (want_pairs_h)
            m.c_oh[u][k] += po.col(u) * ph.col(nbrs[k]).transpose();
          if (want_actions)
            m.c_oa[u][k] += po.col(u) * pa.col(nbrs[k]).transpose();
        }
      }
    }
  });

  if (want_pool) {
    // Per-trajectory partials, combined in trajectory order.
    std::vector<Eigen::MatrixXd> p_ohbar(ds.trajs.size()),
        p_hbar(ds.trajs.size());
    parallel_for(0, static_cast<int>(ds.trajs.size()), [&](int t) {
      const auto& traj = ds.trajs[t];
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
      Eigen::MatrixXd b = Eigen::MatrixXd::Zero(d, d);
      for (int s = 0; s < traj.steps(); ++s) {
        Eigen::MatrixXd hbar =
            gibbs_aggregate(g, traj.psi_obs[s], *cfg.potential);
        for (int i = 0; i < n; ++i) {
          a += traj.psi_obs[s + 1].col(i) * hbar.col(i).transpose();
          b += hbar.col(i) * hbar.col(i).transpose();
        }
      }
      p_ohbar[t] = std::move(a);
      p_hbar[t] = std::move(b);
    });
    m.c_ohbar = Eigen::MatrixXd::Zero(d, d);
    m.c_hbarbar = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t t = 0; t < ds.trajs.size(); ++t) {
      m.c_ohbar += p_ohbar[t];
      m.c_hbarbar += p_hbar[t];
    }
  }

  const double inv = 1.0 / static_cast<double>(m.count);
  auto scale_pairs = [&](std::vector<std::vector<Eigen::MatrixXd>>& v) {
    for (auto& row : v)
      for (auto& b : row) b *= inv;
  };
  auto scale_srcs = [&](std::vector<Eigen::MatrixXd>& v) {
    for (auto& b : v) b *= inv;
  };
  scale_pairs(m.c_oh);
  scale_pairs(m.c_oa);
  scale_pairs(m.c_oz);
  scale_srcs(m.c_hh);
  scale_srcs(m.c_aa);
  scale_srcs(m.c_zz);
  scale_srcs(m.c_oh_recv_mean);
  if (want_pool) {
    const double invp = 1.0 / (static_cast<double>(m.count) * n);
    m.c_ohbar *= invp;
    m.c_hbarbar *= invp;
  }
  if (want_recv_mean) obar.clear();
  return m;
}

namespace {

double effective_lambda(double configured, const Eigen::MatrixXd& c_xx) {
  if (configured > 0.0) return configured;
  const double mean_diag = c_xx.diagonal().mean();
  return std::max(1e-6 * mean_diag, 1e-12);
}

// C solving C (C_xx + lambda I) = C_yx via an SPD factorization with one
// refinement pass.
Eigen::MatrixXd ridge_solve(const Eigen::MatrixXd& c_yx,
                            const Eigen::MatrixXd& c_xx, double lambda) {
  if (!c_yx.allFinite() || !c_xx.allFinite())
    throw NumericalError("non-finite moments");
  const int p = static_cast<int>(c_xx.rows());
  Eigen::MatrixXd a = c_xx + lambda * Eigen::MatrixXd::Identity(p, p);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("ridge system could not be factorized");
  Eigen::MatrixXd ct = ldlt.solve(c_yx.transpose());
  ct += ldlt.solve(c_yx.transpose() - a * ct);
  if (!ct.allFinite()) throw NumericalError("ridge solve diverged");
  return ct.transpose();
}

void fit_action_blocks(const Moments& m, const Graph& g, double lambda_cfg,
                       EmbeddingModel& model) {
  const int n = g.size();
  model.a_blocks.resize(n);
  model.lambda_a_used.resize(n);
  for (int j = 0; j < n; ++j)
    model.lambda_a_used[j] = effective_lambda(lambda_cfg, m.c_aa[j]);
  parallel_for(0, n, [&](int i) {
    const auto& nbrs = g.inclusive_neighborhood(i);
    model.a_blocks[i].resize(nbrs.size());
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      const int j = nbrs[k];
      model.a_blocks[i][k] =
          ridge_solve(m.c_oa[i][k], m.c_aa[j], model.lambda_a_used[j]);
    }
  });
}

}  // namespace

EmbeddingModel fit_dense(const EncodedDataset& ds, const FitConfig& cfg) {
  FitConfig c = cfg;
  c.form = EmbedForm::Dense;
  Moments m = accumulate_moments(ds, c);
  EmbeddingModel model;
  model.form = EmbedForm::Dense;
  model.graph = ds.graph;
  model.d = ds.d;
  model.d_a = ds.d_a;
  const int n = ds.graph.size();
  model.h_blocks.resize(n);
  model.lambda_h_used.resize(n);
  for (int j = 0; j < n; ++j)
    model.lambda_h_used[j] = effective_lambda(cfg.lambda, m.c_hh[j]);
  parallel_for(0, n, [&](int i) {
    const auto& nbrs = ds.graph.inclusive_neighborhood(i);
    model.h_blocks[i].resize(nbrs.size());
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      const int j = nbrs[k];
      model.h_blocks[i][k] =
          ridge_solve(m.c_oh[i][k], m.c_hh[j], model.lambda_h_used[j]);
    }
  });
  fit_action_blocks(m, ds.graph, cfg.lambda, model);
  return model;
}

EmbeddingModel fit_hom(const EncodedDataset& ds, const FitConfig& cfg) {
  FitConfig c = cfg;
  c.form = EmbedForm::Hom;
  Moments m = accumulate_moments(ds, c);
  EmbeddingModel model;
  model.form = EmbedForm::Hom;
  model.graph = ds.graph;
  model.d = ds.d;
  model.d_a = ds.d_a;
  const int n = ds.graph.size();
  model.h_src.resize(n);
  model.lambda_h_used.resize(n);
  parallel_for(0, n, [&](int j) {
    model.lambda_h_used[j] = effective_lambda(cfg.lambda, m.c_hh[j]);
    // mean over receivers of the per-receiver ridge solutions; they share the
    // source Gram, so this equals one solve against the averaged cross moment
    model.h_src[j] =
        ridge_solve(m.c_oh_recv_mean[j], m.c_hh[j], model.lambda_h_used[j]);
  });
  fit_action_blocks(m, ds.graph, cfg.lambda, model);
  return model;
}

EmbeddingModel fit_hom_mean(const EncodedDataset& ds, const FitConfig& cfg) {
  FitConfig c = cfg;
  c.form = EmbedForm::HomMean;
  c.validate();
  Moments m = accumulate_moments(ds, c);
  EmbeddingModel model;
  model.form = EmbedForm::HomMean;
  model.graph = ds.graph;
  model.d = ds.d;
  model.d_a = ds.d_a;
  model.potential = *c.potential;
  model.lambda_pool_used = effective_lambda(cfg.lambda, m.c_hbarbar);
  model.h_shared = ridge_solve(m.c_ohbar, m.c_hbarbar, model.lambda_pool_used);
  fit_action_blocks(m, ds.graph, cfg.lambda, model);
  return model;
}

EmbeddingModel fit_tensor(const EncodedDataset& ds, const FitConfig& cfg) {
  FitConfig c = cfg;
  c.form = EmbedForm::Tensor;
  Moments m = accumulate_moments(ds, c);
  EmbeddingModel model;
  model.form = EmbedForm::Tensor;
  model.graph = ds.graph;
  model.d = ds.d;
  model.d_a = ds.d_a;
  const int n = ds.graph.size();
  model.t_blocks.resize(n);
  model.lambda_z_used.resize(n);
  for (int j = 0; j < n; ++j)
    model.lambda_z_used[j] = effective_lambda(cfg.lambda, m.c_zz[j]);
  parallel_for(0, n, [&](int i) {
    const auto& nbrs = ds.graph.inclusive_neighborhood(i);
    model.t_blocks[i].resize(nbrs.size());
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      const int j = nbrs[k];
      model.t_blocks[i][k] =
          ridge_solve(m.c_oz[i][k], m.c_zz[j], model.lambda_z_used[j]);
    }
  });
  return model;
}

EmbeddingModel fit_embedding(const EncodedDataset& ds, const FitConfig& cfg) {
  switch (cfg.form) {
    case EmbedForm::Tensor: return fit_tensor(ds, cfg);
    case EmbedForm::Dense: return fit_dense(ds, cfg);
    case EmbedForm::Hom: return fit_hom(ds, cfg);
    case EmbedForm::HomMean: return fit_hom_mean(ds, cfg);
  }
  throw ConfigError("bad embedding form");
}

namespace {

int neighbor_slot(const Graph& g, int i, int j) {
  const auto& nbrs = g.inclusive_neighborhood(i);
  auto it = std::lower_bound(nbrs.begin(), nbrs.end(), j);
  if (it == nbrs.end() || *it != j) return -1;
  return static_cast<int>(it - nbrs.begin());
}

}  // namespace

Eigen::MatrixXd EmbeddingModel::history_block(int i, int j) const {
  const int k = neighbor_slot(graph, i, j);
  if (k < 0) return Eigen::MatrixXd::Zero(d, d);
  switch (form) {
    case EmbedForm::Dense: return h_blocks[i][k];
    case EmbedForm::Hom: return h_src[j];
    default:
      throw std::invalid_argument("history_block applies to dense/hom only");
  }
}

Eigen::MatrixXd EmbeddingModel::action_block(int i, int j) const {
  if (form == EmbedForm::Tensor)
    throw std::invalid_argument("tensor form has no separate action blocks");
  const int k = neighbor_slot(graph, i, j);
  if (k < 0) return Eigen::MatrixXd::Zero(d, d_a);
  return a_blocks[i][k];
}

Eigen::MatrixXd EmbeddingModel::tensor_block(int i, int j) const {
  if (form != EmbedForm::Tensor)
    throw std::invalid_argument("tensor_block applies to the tensor form");
  const int k = neighbor_slot(graph, i, j);
  if (k < 0) return Eigen::MatrixXd::Zero(d, d * d_a);
  return t_blocks[i][k];
}

double verify_normal_equations(const EmbeddingModel& model, const Moments& m) {
  const double eps = std::numeric_limits<double>::min();
  double worst = 0.0;
  auto check = [&](const Eigen::MatrixXd& c, const Eigen::MatrixXd& c_xx,
                   double lambda, const Eigen::MatrixXd& c_yx) {
    const int p = static_cast<int>(c_xx.rows());
    double num =
        (c * (c_xx + lambda * Eigen::MatrixXd::Identity(p, p)) - c_yx).norm();
    double rel = num / (c_yx.norm() + eps);
    worst = std::max(worst, rel);
  };
  const Graph& g = model.graph;
  for (int i = 0; i < g.size(); ++i) {
    const auto& nbrs = g.inclusive_neighborhood(i);
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      const int j = nbrs[k];
      switch (model.form) {
        case EmbedForm::Dense:
          check(model.h_blocks[i][k], m.c_hh[j], model.lambda_h_used[j],
                m.c_oh[i][k]);
          check(model.a_blocks[i][k], m.c_aa[j], model.lambda_a_used[j],
                m.c_oa[i][k]);
          break;
        case EmbedForm::Hom:
          check(model.a_blocks[i][k], m.c_aa[j], model.lambda_a_used[j],
                m.c_oa[i][k]);
          break;
        case EmbedForm::HomMean:
          check(model.a_blocks[i][k], m.c_aa[j], model.lambda_a_used[j],
                m.c_oa[i][k]);
          break;
        case EmbedForm::Tensor:
          check(model.t_blocks[i][k], m.c_zz[j], model.lambda_z_used[j],
                m.c_oz[i][k]);
          break;
      }
    }
  }
  if (model.form == EmbedForm::Hom)
    for (int j = 0; j < g.size(); ++j)
      check(model.h_src[j], m.c_hh[j], model.lambda_h_used[j],
            m.c_oh_recv_mean[j]);
  if (model.form == EmbedForm::HomMean)
    check(model.h_shared, m.c_hbarbar, model.lambda_pool_used, m.c_ohbar);
  return worst;
}

Eigen::MatrixXd predict_one_step(const EmbeddingModel& model,
                                 const Eigen::MatrixXd& psi_hist,
                                 const Eigen::MatrixXd& psi_act) {
  const Graph& g = model.graph;
  const int n = g.size();
  if (psi_hist.rows() != model.d || psi_hist.cols() != n)
    throw std::invalid_argument("history feature dims mismatch");
  if (psi_act.rows() != model.d_a || psi_act.cols() != n)
    throw std::invalid_argument("action feature dims mismatch");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(model.d, n);
  switch (model.form) {
    case EmbedForm::Dense:
      for (int i = 0; i < n; ++i) {
        const auto& nbrs = g.inclusive_neighborhood(i);
        for (std::size_t k = 0; k < nbrs.size(); ++k)
          out.col(i) += model.h_blocks[i][k] * psi_hist.col(nbrs[k]) +
                        model.a_blocks[i][k] * psi_act.col(nbrs[k]);
      }
      break;
    case EmbedForm::Hom:
      for (int i = 0; i < n; ++i) {
        const auto& nbrs = g.inclusive_neighborhood(i);
        for (std::size_t k = 0; k < nbrs.size(); ++k)
          out.col(i) += model.h_src[nbrs[k]] * psi_hist.col(nbrs[k]) +
                        model.a_blocks[i][k] * psi_act.col(nbrs[k]);
      }
      break;
    case EmbedForm::HomMean: {
      Eigen::MatrixXd hbar = gibbs_aggregate(g, psi_hist, model.potential);
      out = model.h_shared * hbar;
      for (int i = 0; i < n; ++i) {
        const auto& nbrs = g.inclusive_neighborhood(i);
        for (std::size_t k = 0; k < nbrs.size(); ++k)
          out.col(i) += model.a_blocks[i][k] * psi_act.col(nbrs[k]);
      }
      break;
    }
    case EmbedForm::Tensor:
      for (int i = 0; i < n; ++i) {
        const auto& nbrs = g.inclusive_neighborhood(i);
        for (std::size_t k = 0; k < nbrs.size(); ++k)
          out.col(i) += model.t_blocks[i][k] *
                        tensorize(psi_hist.col(nbrs[k]), psi_act.col(nbrs[k]));
      }
      break;
  }
  return out;
}

std::vector<Eigen::MatrixXd> rollout(const EmbeddingModel& model,
                                     const Eigen::MatrixXd& psi_init,
                                     const std::vector<Eigen::MatrixXd>& psi_actions,
                                     const RolloutOptions& opts) {
  if (psi_actions.empty()) throw std::invalid_argument("rollout needs M >= 1");
  if (opts.decode_reencode && (!opts.decoder || !opts.obs_map))
    throw std::invalid_argument("decode_reencode needs a decoder and a map");
  std::vector<Eigen::MatrixXd> traj;
  traj.reserve(psi_actions.size());
  Eigen::MatrixXd hist = psi_init;
  for (const auto& act : psi_actions) {
    Eigen::MatrixXd pred = predict_one_step(model, hist, act);
    traj.push_back(pred);
    if (opts.decode_reencode)
      hist = opts.obs_map->encode_all(model.graph,
                                      opts.decoder->decode_all(pred));
    else
      hist = pred;
  }
  return traj;
}

NrmseCurve prediction_nrmse(const EmbeddingModel& model,
                            const FeatureMaps& maps, const Decoder& decoder,
                            const Dataset& test, int horizon) {
  test.validate();
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  for (const auto& traj : test.trajectories)
    if (traj.steps() < horizon)
      throw std::invalid_argument("horizon exceeds a test trajectory length");
  const int n = test.nodes();
  const int od = test.obs_dim;
  const int ntraj = static_cast<int>(test.trajectories.size());

  // pooled per-coordinate std over the compared steps
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(od);
  Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(od);
  long long count = 0;
  for (const auto& traj : test.trajectories)
    for (int t = 1; t <= horizon; ++t) {
      sum += traj.observations[t].rowwise().sum();
      sumsq += traj.observations[t].array().square().matrix().rowwise().sum();
      count += n;
    }
  Eigen::VectorXd var =
      (sumsq / count - (sum / count).array().square().matrix()).cwiseMax(0.0);
  if ((var.array() <= 0.0).any())
    throw NumericalError("zero-variance ground truth; NRMSE is undefined");
  Eigen::VectorXd inv_sigma = var.array().rsqrt();

  NrmseCurve curve;
  curve.per_traj.resize(ntraj, horizon);
  parallel_for(0, ntraj, [&](int ti) {
    const auto& traj = test.trajectories[ti];
    Eigen::MatrixXd psi0 = maps.obs.encode_all(test.graph, traj.observations[0]);
    std::vector<Eigen::MatrixXd> acts(horizon);
    for (int t = 0; t < horizon; ++t)
      acts[t] = maps.action.encode_all(traj.actions[t]);
    std::vector<Eigen::MatrixXd> feats = rollout(model, psi0, acts);
    for (int t = 0; t < horizon; ++t) {
      Eigen::MatrixXd pred = decoder.decode_all(feats[t]);
      Eigen::MatrixXd err = pred - traj.observations[t + 1];
      double ss = (inv_sigma.asDiagonal() * err).squaredNorm();
      curve.per_traj(ti, t) = std::sqrt(ss / (n * od));
    }
  });
  curve.mean = curve.per_traj.colwise().mean();
  curve.stddev.resize(horizon);
  curve.pooled.resize(horizon);
  for (int t = 0; t < horizon; ++t) {
    double mu = curve.mean(t);
    curve.stddev(t) = ntraj > 1
        ? std::sqrt((curve.per_traj.col(t).array() - mu).square().sum() /
                    (ntraj - 1))
        : 0.0;
    curve.pooled(t) =
        std::sqrt(curve.per_traj.col(t).array().square().mean());
  }
  return curve;
}

}  // namespace kdc
