#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "kdc/embedding.hpp"
#include "kdc/features.hpp"
#include "kdc/simulators.hpp"

namespace kdc {

// Finite-horizon quadratic tracking problem in feature space. Q1 acts per node
// on observation features (PSD), Q2 on action features (PD).
struct ControlProblem {
  int horizon = 1;
  Eigen::MatrixXd target_features;      // d x N
  Eigen::MatrixXd target_observations;  // obs_dim x N, for the error metric
  Eigen::MatrixXd Q1;                   // d x d
  Eigen::MatrixXd Q2;                   // d_a x d_a
  std::optional<int> feedback_step;     // absent: open loop
  // HomMean only: re-freeze weights along the planned trajectory and re-solve
  // up to this many extra passes.
  int refreeze_passes = 0;

  void validate(int d, int d_a) const;
};

ControlProblem make_control_problem(const Eigen::MatrixXd& target_obs,
                                    const Graph& g, const FeatureMaps& maps,
                                    int horizon, double q1 = 1.0,
                                    double q2 = 1e-3,
                                    std::optional<int> feedback_step = {});

// Affine map from stacked action features to the M-step feature trajectory.
// For HomMean the Gibbs weights are frozen along a zero-action nominal (or a
// supplied nominal), which makes the rollout exactly affine in the actions.
class LinearizedRollout {
 public:
  LinearizedRollout(const EmbeddingModel& model, const Eigen::MatrixXd& psi0,
                    int horizon,
                    const std::vector<Eigen::MatrixXd>* nominal = nullptr);

  int horizon() const { return horizon_; }
  const std::vector<Eigen::MatrixXd>& free_response() const { return free_; }
  const std::vector<std::vector<WeightVector>>& frozen_weights() const {
    return weights_;
  }

  // Linear part only: features(U) - free_response().
  std::vector<Eigen::MatrixXd> apply(const std::vector<Eigen::MatrixXd>& U) const;
  // Adjoint of apply against per-step feature gradients.
  std::vector<Eigen::MatrixXd> apply_adjoint(
      const std::vector<Eigen::MatrixXd>& R) const;

  // One transition of the linear part (history deviation -> next deviation).
  Eigen::MatrixXd step_linear(int t, const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd step_linear_adjoint(int t, const Eigen::MatrixXd& y) const;
  Eigen::MatrixXd action_map(const Eigen::MatrixXd& u) const;
  Eigen::MatrixXd action_map_adjoint(const Eigen::MatrixXd& y) const;

 private:
  const EmbeddingModel* model_;
  int horizon_;
  std::vector<Eigen::MatrixXd> free_;                 // M entries, d x N
  std::vector<std::vector<WeightVector>> weights_;    // HomMean only, per step
};

struct LqrSolution {
  std::vector<Eigen::MatrixXd> action_features;      // M entries, d_a x N
  std::vector<Eigen::MatrixXd> actions;              // decoded, action_dim x N
  std::vector<Eigen::MatrixXd> predicted_features;   // M entries, d x N
  double objective = 0.0;
  double gradient_residual = 0.0;  // relative first-order optimality
  int iterations = 0;              // 0 for the direct solve
};

// Minimizes sum_t ||psi_t - psi*||^2_Q1 + ||psi^a_t||^2_Q2 subject to the
// linearized rollout, through the normal equations of the induced ridge
// problem (direct for small instances, matrix-free CG otherwise).
LqrSolution solve_lqr(const ControlProblem& problem, const EmbeddingModel& model,
                      const Eigen::MatrixXd& psi_init,
                      const ActionProjection& action_proj);

struct ControlResult {
  std::vector<Eigen::MatrixXd> observations;  // M + 1 entries
  std::vector<Eigen::MatrixXd> actions;       // M entries
  double cost = 0.0;   // realized feature-space cost
  double error = 0.0;  // ||final - target|| / ||target||
};

// Plan over the full horizon, apply until the feedback step, re-encode the
// observed state, re-freeze and re-solve the remainder. Open loop when no
// feedback step is set.
ControlResult receding_horizon_control(Environment& env,
                                       const EmbeddingModel& model,
                                       const FeatureMaps& maps,
                                       const ControlProblem& problem);

// error from the stacked final observation; cost as realized along the run.
std::pair<double, double> control_metrics(const ControlResult& result,
                                          const Eigen::MatrixXd& target_obs);

}  // namespace kdc
