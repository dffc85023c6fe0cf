#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <nlohmann/json_fwd.hpp>
#include <string>

#include "kdc/graph.hpp"

namespace kdc {

enum class FeatureKind { Identity, RandomFourier, Polynomial };

std::string to_string(FeatureKind k);
FeatureKind feature_kind_from_string(const std::string& s);

// Explicit finite-dimensional feature map for observations/history. The same
// map serves both (history is last step's observation), so d_h = d_o.
// With the neighborhood flag set, the encoder input is [o_i || mean of o_j
// over non-self neighbors]; frequencies are re-derived from the seed and never
// stored.
class FeatureMap {
 public:
  FeatureMap() = default;

  static FeatureMap identity(int input_dim, bool augment = false);
  // W rows i.i.d. Gaussian with per-coordinate std 1/gamma, b uniform [0, 2pi).
  static FeatureMap random_fourier(int input_dim, int d, double gamma,
                                   std::uint64_t seed, bool augment = false);
  // All monomials up to degree (with constant), lexicographic; degree in {1,2}.
  static FeatureMap polynomial(int input_dim, int degree, bool augment = false);

  FeatureKind kind() const { return kind_; }
  int input_dim() const { return input_dim_; }          // raw observation dim
  int encoder_input_dim() const;                        // doubled if augmented
  int dim() const { return d_; }
  bool augmented() const { return augment_; }
  double gamma() const { return gamma_; }
  int degree() const { return degree_; }
  std::uint64_t seed() const { return seed_; }

  // x must have encoder_input_dim() entries.
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;

  // obs is obs_dim x N, one column per node.
  Eigen::VectorXd encode_node(const Graph& g, const Eigen::MatrixXd& obs,
                              int node) const;
  Eigen::MatrixXd encode_all(const Graph& g, const Eigen::MatrixXd& obs) const;

  nlohmann::json to_json() const;
  static FeatureMap from_json(const nlohmann::json& j);

 private:
  FeatureKind kind_ = FeatureKind::Identity;
  int input_dim_ = 0;
  int d_ = 0;
  bool augment_ = false;
  double gamma_ = 0.0;
  int degree_ = 0;
  std::uint64_t seed_ = 0;
  Eigen::MatrixXd W_;  // d x encoder_input_dim
  Eigen::VectorXd b_;  // d
};

// Median pairwise distance over at most max_samples columns; used as the
// default random-Fourier bandwidth when none is configured.
double median_heuristic_gamma(const Eigen::MatrixXd& samples,
                              int max_samples = 1000);

// Fixed linear action featurization psi = P a with orthonormal columns, so
// decode is the exact left inverse P^T.
class ActionProjection {
 public:
  ActionProjection() = default;

  static ActionProjection identity(int dim);
  // d_a >= dim; columns from a seeded QR factorization.
  static ActionProjection random(int dim, int d_a, std::uint64_t seed);

  int action_dim() const { return static_cast<int>(P_.cols()); }
  int dim() const { return static_cast<int>(P_.rows()); }

  Eigen::VectorXd encode(const Eigen::VectorXd& a) const;
  Eigen::VectorXd decode(const Eigen::VectorXd& psi) const;
  Eigen::MatrixXd encode_all(const Eigen::MatrixXd& actions) const;
  Eigen::MatrixXd decode_all(const Eigen::MatrixXd& psis) const;
  const Eigen::MatrixXd& matrix() const { return P_; }

  nlohmann::json to_json() const;
  static ActionProjection from_json(const nlohmann::json& j);

 private:
  bool is_identity_ = true;
  std::uint64_t seed_ = 0;
  Eigen::MatrixXd P_;
};

struct FeatureMaps {
  FeatureMap obs;
  ActionProjection action;
};

// Linear pull-back from feature space to observation space, fitted by ridge
// least squares.
struct Decoder {
  Eigen::MatrixXd D;  // obs_dim x d
  double rho = 0.0;

  Eigen::VectorXd decode(const Eigen::VectorXd& psi) const { return D * psi; }
  Eigen::MatrixXd decode_all(const Eigen::MatrixXd& psis) const {
    return D * psis;
  }
};

// Solves D (sum psi psi^T + rho I) = sum o psi^T. features is d x S, targets
// obs_dim x S with matching columns.
Decoder fit_decoder(const Eigen::MatrixXd& features,
                    const Eigen::MatrixXd& targets, double rho);

// Relative normal-equation residual of a fitted decoder on its training data.
double decoder_residual(const Decoder& dec, const Eigen::MatrixXd& features,
                        const Eigen::MatrixXd& targets);

}  // namespace kdc
