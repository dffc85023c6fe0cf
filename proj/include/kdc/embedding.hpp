#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "kdc/dataset.hpp"
#include "kdc/features.hpp"
#include "kdc/graph.hpp"
#include "kdc/mean_field.hpp"

namespace kdc {

enum class EmbedForm { Tensor, Dense, Hom, HomMean };

std::string to_string(EmbedForm f);
EmbedForm embed_form_from_string(const std::string& s);

struct FitConfig {
  EmbedForm form = EmbedForm::HomMean;
  // Ridge strength. <= 0 selects 1e-6 x mean diagonal of the covariance being
  // inverted (floored at 1e-12); an explicit value must be positive.
  double lambda = 0.0;
  std::optional<GibbsPotential> potential;  // required for HomMean
  int tensor_dim_guard = 4096;              // cap on d * d_a for Tensor

  void validate() const;
};

// Feature-space view of a dataset; transition t maps (psi_obs[t], psi_act[t])
// to psi_obs[t+1]. Tests may construct this directly.
struct EncodedTrajectory {
  std::vector<Eigen::MatrixXd> psi_obs;  // steps + 1 entries, d x N
  std::vector<Eigen::MatrixXd> psi_act;  // steps entries, d_a x N

  int steps() const { return static_cast<int>(psi_act.size()); }
};

struct EncodedDataset {
  Graph graph;
  int d = 0;
  int d_a = 0;
  std::vector<EncodedTrajectory> trajs;

  long long transitions() const;
};

EncodedDataset encode_dataset(const Dataset& ds, const FeatureMaps& maps);

// vec(psi_h (x) psi_a): z[p * d_a + q] = h(p) * a(q).
Eigen::VectorXd tensorize(const Eigen::VectorXd& psi_h,
                          const Eigen::VectorXd& psi_a);

// Sample-averaged covariance / cross-covariance operators, accumulated in
// fixed (trajectory, step) order. Per-pair storage is indexed [i][k] where k
// follows Graph::inclusive_neighborhood(i).
struct Moments {
  EmbedForm form = EmbedForm::Dense;
  int d = 0;
  int d_a = 0;
  long long count = 0;

  std::vector<std::vector<Eigen::MatrixXd>> c_oh;  // Dense pairs, d x d
  std::vector<Eigen::MatrixXd> c_hh;               // per source, d x d
  std::vector<Eigen::MatrixXd> c_oh_recv_mean;     // Hom per source, d x d
  std::vector<std::vector<Eigen::MatrixXd>> c_oa;  // pairs, d x d_a
  std::vector<Eigen::MatrixXd> c_aa;               // per source, d_a x d_a
  Eigen::MatrixXd c_ohbar;                         // HomMean pooled, d x d
  Eigen::MatrixXd c_hbarbar;                       // HomMean pooled, d x d
  std::vector<std::vector<Eigen::MatrixXd>> c_oz;  // Tensor pairs, d x d*d_a
  std::vector<Eigen::MatrixXd> c_zz;               // per source, d*d_a square
};

Moments accumulate_moments(const EncodedDataset& ds, const FitConfig& cfg);

// Conditional operator blocks for one embedding form. Blocks for j outside the
// inclusive neighborhood are identically zero and never stored.
struct EmbeddingModel {
  EmbedForm form = EmbedForm::Dense;
  Graph graph;
  int d = 0;
  int d_a = 0;

  std::vector<std::vector<Eigen::MatrixXd>> h_blocks;  // Dense [i][k], d x d
  std::vector<Eigen::MatrixXd> h_src;                  // Hom per source
  Eigen::MatrixXd h_shared;                            // HomMean, d x d
  GibbsPotential potential;                            // HomMean
  std::vector<std::vector<Eigen::MatrixXd>> a_blocks;  // [i][k], d x d_a
  std::vector<std::vector<Eigen::MatrixXd>> t_blocks;  // Tensor [i][k]

  std::vector<double> lambda_h_used;  // per source (Dense/Hom)
  std::vector<double> lambda_a_used;  // per source
  std::vector<double> lambda_z_used;  // per source (Tensor)
  double lambda_pool_used = 0.0;      // HomMean

  // Zero matrix when j is not an inclusive neighbor of i.
  Eigen::MatrixXd history_block(int i, int j) const;
  Eigen::MatrixXd action_block(int i, int j) const;
  Eigen::MatrixXd tensor_block(int i, int j) const;
};

EmbeddingModel fit_dense(const EncodedDataset& ds, const FitConfig& cfg);
EmbeddingModel fit_hom(const EncodedDataset& ds, const FitConfig& cfg);
EmbeddingModel fit_hom_mean(const EncodedDataset& ds, const FitConfig& cfg);
EmbeddingModel fit_tensor(const EncodedDataset& ds, const FitConfig& cfg);
EmbeddingModel fit_embedding(const EncodedDataset& ds, const FitConfig& cfg);

// Max relative residual ||C (C_xx + lambda I) - C_yx||_F / (||C_yx||_F + eps)
// over every fitted block, using the lambdas recorded in the model.
double verify_normal_equations(const EmbeddingModel& model, const Moments& m);

// One-step conditional mean in feature space. psi_hist is d x N, psi_act is
// d_a x N; HomMean recomputes Gibbs weights from psi_hist.
Eigen::MatrixXd predict_one_step(const EmbeddingModel& model,
                                 const Eigen::MatrixXd& psi_hist,
                                 const Eigen::MatrixXd& psi_act);

struct RolloutOptions {
  // Diagnostics path: decode each prediction and re-encode it as the next
  // history instead of feeding features straight through.
  bool decode_reencode = false;
  const Decoder* decoder = nullptr;
  const FeatureMap* obs_map = nullptr;
};

// Autoregressive multi-step prediction; step t+1 uses step t's predicted
// observation features as history (d_h = d_o by construction).
std::vector<Eigen::MatrixXd> rollout(const EmbeddingModel& model,
                                     const Eigen::MatrixXd& psi_init,
                                     const std::vector<Eigen::MatrixXd>& psi_actions,
                                     const RolloutOptions& opts = {});

struct NrmseCurve {
  Eigen::MatrixXd per_traj;  // trajectories x horizon
  Eigen::VectorXd mean;      // across trajectories
  Eigen::VectorXd stddev;
  Eigen::VectorXd pooled;    // RMSE pooled over trajectories and nodes
};

// Decoded rollout error normalized by the per-coordinate standard deviation of
// the ground truth pooled over the compared steps of the test set.
NrmseCurve prediction_nrmse(const EmbeddingModel& model, const FeatureMaps& maps,
                            const Decoder& decoder, const Dataset& test,
                            int horizon);

}  // namespace kdc
