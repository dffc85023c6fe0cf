#include "kdc/control.hpp"

#include <algorithm>
#include <cmath>

#include "kdc/errors.hpp"

namespace kdc {

namespace {

constexpr int kDirectSolveLimit = 2048;  // stacked unknowns for the dense path

double sym_min_eig(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double stacked_dot(const std::vector<Eigen::MatrixXd>& a,
                   const std::vector<Eigen::MatrixXd>& b) {
  double s = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t)
    s += a[t].cwiseProduct(b[t]).sum();
  return s;
}

}  // namespace

void ControlProblem::validate(int d, int d_a) const {
  if (horizon < 1) throw ConfigError("control horizon must be >= 1");
  if (target_features.rows() != d)
    throw std::invalid_argument("target feature dim does not match model");
  if (Q1.rows() != d || Q1.cols() != d)
    throw std::invalid_argument("Q1 must act on observation features");
  if (Q2.rows() != d_a || Q2.cols() != d_a)
    throw std::invalid_argument("Q2 must act on action features");
  const double s1 = Q1.norm(), s2 = Q2.norm();
  if (sym_min_eig(Q1) < -1e-12 * (s1 > 0 ? s1 : 1.0))
    throw ConfigError("Q1 must be positive semi-definite");
  if (sym_min_eig(Q2) <= 0.0 || s2 == 0.0)
    throw ConfigError("Q2 must be positive definite");
}

ControlProblem make_control_problem(const Eigen::MatrixXd& target_obs,
                                    const Graph& g, const FeatureMaps& maps,
                                    int horizon, double q1, double q2,
                                    std::optional<int> feedback_step) {
  ControlProblem p;
  p.horizon = horizon;
  p.target_observations = target_obs;
  p.target_features = maps.obs.encode_all(g, target_obs);
  p.Q1 = q1 * Eigen::MatrixXd::Identity(maps.obs.dim(), maps.obs.dim());
  p.Q2 = q2 * Eigen::MatrixXd::Identity(maps.action.dim(), maps.action.dim());
  p.feedback_step = feedback_step;
  return p;
}

LinearizedRollout::LinearizedRollout(const EmbeddingModel& model,
                                     const Eigen::MatrixXd& psi0, int horizon,
                                     const std::vector<Eigen::MatrixXd>* nominal)
    : model_(&model), horizon_(horizon) {
  if (horizon < 1) throw ConfigError("linearized rollout needs M >= 1");
  if (model.form == EmbedForm::Tensor)
    throw ConfigError(
        "tensor form entangles history and action features and is not affine "
        "in actions; control supports dense/hom/hom_mean");
  const Graph& g = model.graph;
  const int n = g.size();
  if (psi0.rows() != model.d || psi0.cols() != n)
    throw std::invalid_argument("initial feature dims mismatch");
  if (nominal && static_cast<int>(nominal->size()) < horizon - 1)
    throw std::invalid_argument("nominal trajectory too short to freeze");

  free_.reserve(horizon);
  const bool mean_field = model.form == EmbedForm::HomMean;
  if (mean_field) weights_.resize(horizon);
  Eigen::MatrixXd x = psi0;
  const Eigen::MatrixXd zero_act = Eigen::MatrixXd::Zero(model.d_a, n);
  for (int t = 0; t < horizon; ++t) {
    if (mean_field) {
      const Eigen::MatrixXd& hist =
          (nominal && t > 0) ? (*nominal)[t - 1] : x;
      Eigen::MatrixXd hbar =
          gibbs_aggregate(g, hist, model.potential, &weights_[t]);
      x = model.h_shared * hbar;
      // weights were frozen from hist; recompute aggregate of x's own history
      // is intentionally avoided
    } else {
      x = predict_one_step(*model_, x, zero_act);
    }
    free_.push_back(x);
  }
}

Eigen::MatrixXd LinearizedRollout::step_linear(int t,
                                               const Eigen::MatrixXd& x) const {
  const Graph& g = model_->graph;
  const int n = g.size();
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(model_->d, n);
  switch (model_->form) {
    case EmbedForm::Dense:
      for (int i = 0; i < n; ++i) {
        const auto& nbrs = g.inclusive_neighborhood(i);
        for (std::size_t k = 0; k < nbrs.size(); ++k)
          y.col(i) += model_->h_blocks[i][k] * x.col(nbrs[k]);
      }
      break;
    case EmbedForm::Hom:
      for (int i = 0; i < n; ++i) {
        const auto& nbrs = g.inclusive_neighborhood(i);
        for (std::size_t k = 0; k < nbrs.size(); ++k)
          y.col(i) += model_->h_src[nbrs[k]] * x.col(nbrs[k]);
      }
      break;
    case EmbedForm::HomMean: {
      const auto& w = weights_[t];
      Eigen::MatrixXd hbar = Eigen::MatrixXd::Zero(model_->d, n);
      for (int i = 0; i < n; ++i)
        for (std::size_t k = 0; k < w[i].neighbors.size(); ++k)
          hbar.col(i) +=
              w[i].weights(static_cast<int>(k)) * x.col(w[i].neighbors[k]);
      y = model_->h_shared * hbar;
      break;
    }
    case EmbedForm::Tensor:
      throw ConfigError("tensor form unsupported in control");
  }
  return y;
}

Eigen::MatrixXd LinearizedRollout::step_linear_adjoint(
    int t, const Eigen::MatrixXd& y) const {
  const Graph& g = model_->graph;
  const int n = g.size();
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(model_->d, n);
  switch (model_->form) {
    case EmbedForm::Dense:
      for (int i = 0; i < n; ++i) {
        const auto& nbrs = g.inclusive_neighborhood(i);
        for (std::size_t k = 0; k < nbrs.size(); ++k)
          z.col(nbrs[k]) += model_->h_blocks[i][k].transpose() * y.col(i);
      }
      break;
    case EmbedForm::Hom:
      for (int i = 0; i < n; ++i) {
        const auto& nbrs = g.inclusive_neighborhood(i);
        for (std::size_t k = 0; k < nbrs.size(); ++k)
          z.col(nbrs[k]) += model_->h_src[nbrs[k]].transpose() * y.col(i);
      }
      break;
    case EmbedForm::HomMean: {
      const auto& w = weights_[t];
      Eigen::MatrixXd v = model_->h_shared.transpose() * y;
      for (int i = 0; i < n; ++i)
        for (std::size_t k = 0; k < w[i].neighbors.size(); ++k)
          z.col(w[i].neighbors[k]) +=
              w[i].weights(static_cast<int>(k)) * v.col(i);
      break;
    }
    case EmbedForm::Tensor:
      throw ConfigError("tensor form unsupported in control");
  }
  return z;
}

Eigen::MatrixXd LinearizedRollout::action_map(const Eigen::MatrixXd& u) const {
  const Graph& g = model_->graph;
  const int n = g.size();
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(model_->d, n);
  for (int i = 0; i < n; ++i) {
    const auto& nbrs = g.inclusive_neighborhood(i);
    for (std::size_t k = 0; k < nbrs.size(); ++k)
      y.col(i) += model_->a_blocks[i][k] * u.col(nbrs[k]);
  }
  return y;
}

Eigen::MatrixXd LinearizedRollout::action_map_adjoint(
    const Eigen::MatrixXd& y) const {
  const Graph& g = model_->graph;
  const int n = g.size();
  Eigen::MatrixXd gout = Eigen::MatrixXd::Zero(model_->d_a, n);
  for (int i = 0; i < n; ++i) {
    const auto& nbrs = g.inclusive_neighborhood(i);
    for (std::size_t k = 0; k < nbrs.size(); ++k)
      gout.col(nbrs[k]) += model_->a_blocks[i][k].transpose() * y.col(i);
  }
  return gout;
}

std::vector<Eigen::MatrixXd> LinearizedRollout::apply(
    const std::vector<Eigen::MatrixXd>& U) const {
  if (static_cast<int>(U.size()) != horizon_)
    throw std::invalid_argument("need one action per step");
  std::vector<Eigen::MatrixXd> out(horizon_);
  Eigen::MatrixXd x =
      Eigen::MatrixXd::Zero(model_->d, model_->graph.size());
  for (int t = 0; t < horizon_; ++t) {
    x = step_linear(t, x) + action_map(U[t]);
    out[t] = x;
  }
  return out;
}

std::vector<Eigen::MatrixXd> LinearizedRollout::apply_adjoint(
    const std::vector<Eigen::MatrixXd>& R) const {
  if (static_cast<int>(R.size()) != horizon_)
    throw std::invalid_argument("need one gradient per step");
  std::vector<Eigen::MatrixXd> out(horizon_);
  Eigen::MatrixXd q = R[horizon_ - 1];
  out[horizon_ - 1] = action_map_adjoint(q);
  for (int t = horizon_ - 2; t >= 0; --t) {
    q = R[t] + step_linear_adjoint(t + 1, q);
    out[t] = action_map_adjoint(q);
  }
  return out;
}

namespace {

struct NormalEquations {
  const LinearizedRollout& lin;
  const ControlProblem& prob;
  int n = 0, d = 0, d_a = 0, M = 0;

  std::vector<Eigen::MatrixXd> rhs() const {
    std::vector<Eigen::MatrixXd> r(M);
    for (int t = 0; t < M; ++t) {
      Eigen::MatrixXd resid =
          prob.target_features - lin.free_response()[t];
      r[t] = prob.Q1 * resid;
    }
    return lin.apply_adjoint(r);
  }

  std::vector<Eigen::MatrixXd> apply(const std::vector<Eigen::MatrixXd>& U) const {
    std::vector<Eigen::MatrixXd> f = lin.apply(U);
    for (auto& m : f) m = prob.Q1 * m;
    std::vector<Eigen::MatrixXd> h = lin.apply_adjoint(f);
    for (int t = 0; t < M; ++t) h[t] += prob.Q2 * U[t];
    return h;
  }
};

LqrSolution solve_direct(const NormalEquations& ne,
                         const LinearizedRollout& lin,
                         const ControlProblem& prob) {
  const int M = ne.M, n = ne.n, d = ne.d, d_a = ne.d_a;
  const int cols = M * n * d_a;
  const long long rows = static_cast<long long>(M) * n * d;
  Eigen::MatrixXd G(rows, cols);
  std::vector<Eigen::MatrixXd> unit(M, Eigen::MatrixXd::Zero(d_a, n));
  for (int t = 0; t < M; ++t)
    for (int i = 0; i < n; ++i)
      for (int q = 0; q < d_a; ++q) {
        unit[t](q, i) = 1.0;
        // impulse response: zero before step t
        Eigen::MatrixXd x = lin.action_map(unit[t]);
        const int c = (t * n + i) * d_a + q;
        for (int s = 0; s < M; ++s) {
          if (s < t) {
            G.block(static_cast<long long>(s) * n * d, c, n * d, 1).setZero();
            continue;
          }
          if (s > t) x = lin.step_linear(s, x);
          G.block(static_cast<long long>(s) * n * d, c, n * d, 1) =
              Eigen::Map<const Eigen::VectorXd>(x.data(), n * d);
        }
        unit[t](q, i) = 0.0;
      }
  // residual target stacked
  Eigen::VectorXd resid(rows);
  for (int s = 0; s < M; ++s) {
    Eigen::MatrixXd r = prob.target_features - lin.free_response()[s];
    resid.segment(static_cast<long long>(s) * n * d, n * d) =
        Eigen::Map<const Eigen::VectorXd>(r.data(), n * d);
  }
  // apply Q1 per node block
  Eigen::MatrixXd q1g = G;
  Eigen::VectorXd q1r = resid;
  for (long long b = 0; b < rows / d; ++b) {
    q1g.middleRows(b * d, d) = prob.Q1 * G.middleRows(b * d, d);
    q1r.segment(b * d, d) = prob.Q1 * resid.segment(b * d, d);
  }
  Eigen::MatrixXd H = G.transpose() * q1g;
  for (int t = 0; t < M; ++t)
    for (int i = 0; i < n; ++i)
      H.block((t * n + i) * d_a, (t * n + i) * d_a, d_a, d_a) += prob.Q2;
  Eigen::VectorXd g = G.transpose() * q1r;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("control normal equations could not be factorized");
  Eigen::VectorXd u = ldlt.solve(g);
  u += ldlt.solve(g - H * u);
  if (!u.allFinite()) throw NumericalError("control solve diverged");

  LqrSolution sol;
  sol.action_features.resize(M);
  for (int t = 0; t < M; ++t)
    sol.action_features[t] = Eigen::Map<const Eigen::MatrixXd>(
        u.data() + static_cast<long long>(t) * n * d_a, d_a, n);
  double rnorm = (H * u - g).norm();
  sol.gradient_residual = 2.0 * rnorm / (1.0 + 2.0 * g.norm());
  sol.iterations = 0;
  return sol;
}

// Jacobi preconditioner: per-unknown diagonal of H from impulse-response
// column norms. Step maps are treated as stationary (exact for dense/hom;
// the mean-field weights drift little along the nominal), which only affects
// the preconditioner quality, never the solution.
std::vector<Eigen::MatrixXd> jacobi_diagonal(const NormalEquations& ne,
                                             const LinearizedRollout& lin) {
  const int M = ne.M, n = ne.n, d = ne.d, d_a = ne.d_a;
  // running responses of every (node, action coordinate) impulse
  std::vector<Eigen::MatrixXd> resp(n * d_a);
  Eigen::MatrixXd unit = Eigen::MatrixXd::Zero(d_a, n);
  for (int j = 0; j < n; ++j)
    for (int q = 0; q < d_a; ++q) {
      unit(q, j) = 1.0;
      resp[j * d_a + q] = lin.action_map(unit);
      unit(q, j) = 0.0;
    }
  // cumulative weighted norms per horizon offset
  Eigen::MatrixXd norms(M, n * d_a);
  for (int k = 0; k < M; ++k) {
    for (int c = 0; c < n * d_a; ++c) {
      norms(k, c) = (ne.prob.Q1 * resp[c]).cwiseProduct(resp[c]).sum();
      if (k + 1 < M) resp[c] = lin.step_linear(std::min(k + 1, M - 1), resp[c]);
    }
  }
  std::vector<Eigen::MatrixXd> diag(M, Eigen::MatrixXd::Zero(d_a, n));
  Eigen::VectorXd tail = Eigen::VectorXd::Zero(n * d_a);
  for (int t = M - 1; t >= 0; --t) {
    tail += norms.row(M - 1 - t).transpose();
    for (int j = 0; j < n; ++j)
      for (int q = 0; q < d_a; ++q)
        diag[t](q, j) = tail(j * d_a + q) + ne.prob.Q2(q, q);
  }
  for (auto& m : diag) m = m.cwiseMax(1e-300);
  return diag;
}

LqrSolution solve_cg(const NormalEquations& ne, const LinearizedRollout& lin) {
  const int M = ne.M, n = ne.n, d_a = ne.d_a;
  std::vector<Eigen::MatrixXd> U(M, Eigen::MatrixXd::Zero(d_a, n));
  std::vector<Eigen::MatrixXd> r = ne.rhs();
  const double gnorm = std::sqrt(stacked_dot(r, r));
  const double tol = 2.5e-7 * (1.0 + 2.0 * gnorm);
  const std::vector<Eigen::MatrixXd> diag = jacobi_diagonal(ne, lin);
  auto precondition = [&](const std::vector<Eigen::MatrixXd>& v) {
    std::vector<Eigen::MatrixXd> z(M);
    for (int t = 0; t < M; ++t) z[t] = v[t].cwiseQuotient(diag[t]);
    return z;
  };
  std::vector<Eigen::MatrixXd> z = precondition(r);
  std::vector<Eigen::MatrixXd> p = z;
  double rz = stacked_dot(r, z);
  double rnorm2 = stacked_dot(r, r);
  LqrSolution sol;
  const int max_iters = std::max(1000, 2 * M * n * d_a);
  int it = 0;
  while (std::sqrt(rnorm2) > tol) {
    if (it++ >= max_iters)
      throw NumericalError("control CG did not reach the optimality tolerance");
    std::vector<Eigen::MatrixXd> hp = ne.apply(p);
    double php = stacked_dot(p, hp);
    if (!(php > 0.0) || !std::isfinite(php))
      throw NumericalError("control CG lost positive definiteness");
    double alpha = rz / php;
    for (int t = 0; t < M; ++t) {
      U[t] += alpha * p[t];
      r[t] -= alpha * hp[t];
    }
    z = precondition(r);
    double rz_next = stacked_dot(r, z);
    double beta = rz_next / rz;
    rz = rz_next;
    rnorm2 = stacked_dot(r, r);
    for (int t = 0; t < M; ++t) p[t] = z[t] + beta * p[t];
  }
  sol.action_features = std::move(U);
  sol.gradient_residual = 2.0 * std::sqrt(rnorm2) / (1.0 + 2.0 * gnorm);
  sol.iterations = it;
  return sol;
}

double objective_value(const ControlProblem& prob,
                       const std::vector<Eigen::MatrixXd>& features,
                       const std::vector<Eigen::MatrixXd>& U) {
  double j = 0.0;
  for (std::size_t t = 0; t < features.size(); ++t) {
    Eigen::MatrixXd e = features[t] - prob.target_features;
    j += (e.transpose() * prob.Q1 * e).trace();
    j += (U[t].transpose() * prob.Q2 * U[t]).trace();
  }
  return j;
}

LqrSolution solve_once(const ControlProblem& problem,
                       const EmbeddingModel& model,
                       const LinearizedRollout& lin,
                       const ActionProjection& action_proj) {
  NormalEquations ne{lin, problem, model.graph.size(), model.d, model.d_a,
                     problem.horizon};
  const long long unknowns =
      static_cast<long long>(problem.horizon) * model.graph.size() * model.d_a;
  LqrSolution sol = unknowns <= kDirectSolveLimit ? solve_direct(ne, lin, problem)
                                                  : solve_cg(ne, lin);
  std::vector<Eigen::MatrixXd> delta = lin.apply(sol.action_features);
  sol.predicted_features.resize(problem.horizon);
  for (int t = 0; t < problem.horizon; ++t)
    sol.predicted_features[t] = lin.free_response()[t] + delta[t];
  sol.actions.resize(problem.horizon);
  for (int t = 0; t < problem.horizon; ++t)
    sol.actions[t] = action_proj.decode_all(sol.action_features[t]);
  sol.objective = objective_value(problem, sol.predicted_features,
                                  sol.action_features);
  return sol;
}

}  // namespace

LqrSolution solve_lqr(const ControlProblem& problem, const EmbeddingModel& model,
                      const Eigen::MatrixXd& psi_init,
                      const ActionProjection& action_proj) {
  problem.validate(model.d, model.d_a);
  LinearizedRollout lin(model, psi_init, problem.horizon);
  LqrSolution sol = solve_once(problem, model, lin, action_proj);
  for (int pass = 0;
       pass < std::min(problem.refreeze_passes, 3) &&
       model.form == EmbedForm::HomMean;
       ++pass) {
    LinearizedRollout refrozen(model, psi_init, problem.horizon,
                               &sol.predicted_features);
    LqrSolution next = solve_once(problem, model, refrozen, action_proj);
    if (next.objective >= sol.objective) break;
    sol = std::move(next);
  }
  return sol;
}

ControlResult receding_horizon_control(Environment& env,
                                       const EmbeddingModel& model,
                                       const FeatureMaps& maps,
                                       const ControlProblem& problem) {
  const Graph& g = env.graph();
  const int M = problem.horizon;
  ControlResult result;
  result.observations.reserve(M + 1);
  result.actions.reserve(M);
  result.observations.push_back(env.observe());

  Eigen::MatrixXd psi0 = maps.obs.encode_all(g, result.observations.front());
  LqrSolution sol = solve_lqr(problem, model, psi0, maps.action);
  const int fb = problem.feedback_step
                     ? std::clamp(*problem.feedback_step, 1, M)
                     : M;
  for (int t = 0; t < fb; ++t) {
    env.step(sol.actions[t]);
    result.actions.push_back(sol.actions[t]);
    result.observations.push_back(env.observe());
  }
  if (fb < M) {
    ControlProblem tail = problem;
    tail.horizon = M - fb;
    tail.feedback_step.reset();
    Eigen::MatrixXd psi_fb = maps.obs.encode_all(g, result.observations.back());
    LqrSolution sol2 = solve_lqr(tail, model, psi_fb, maps.action);
    for (int t = 0; t < M - fb; ++t) {
      env.step(sol2.actions[t]);
      result.actions.push_back(sol2.actions[t]);
      result.observations.push_back(env.observe());
    }
  }

  double cost = 0.0;
  for (int t = 1; t <= M; ++t) {
    Eigen::MatrixXd psi = maps.obs.encode_all(g, result.observations[t]);
    Eigen::MatrixXd e = psi - problem.target_features;
    cost += (e.transpose() * problem.Q1 * e).trace();
    Eigen::MatrixXd ua = maps.action.encode_all(result.actions[t - 1]);
    cost += (ua.transpose() * problem.Q2 * ua).trace();
  }
  result.cost = cost;
  result.error =
      control_metrics(result, problem.target_observations).second;
  return result;
}

std::pair<double, double> control_metrics(const ControlResult& result,
                                          const Eigen::MatrixXd& target_obs) {
  double target_norm = target_obs.norm();
  if (target_norm == 0.0)
    throw NumericalError("control error is undefined for a zero-norm target");
  double err = (result.observations.back() - target_obs).norm() / target_norm;
  return {result.cost, err};
}

}  // namespace kdc
