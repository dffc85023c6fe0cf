#pragma once

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "kdc/graph.hpp"

namespace kdc {

// Pairwise negative potential over history features. The neural variant is
// deliberately absent.
struct GibbsPotential {
  enum class Kind { Gaussian, Laplace, VonMisesFisher };

  Kind kind = Kind::Gaussian;
  double param = 1.0;  // sigma / laplace scale / kappa

  void validate() const;
  double operator()(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;

  static GibbsPotential gaussian(double sigma) {
    return {Kind::Gaussian, sigma};
  }
  static GibbsPotential laplace(double scale) { return {Kind::Laplace, scale}; }
  static GibbsPotential vmf(double kappa) {
    return {Kind::VonMisesFisher, kappa};
  }

  nlohmann::json to_json() const;
  static GibbsPotential from_json(const nlohmann::json& j);
};

std::string to_string(GibbsPotential::Kind k);

// Softmax weights over the inclusive neighborhood of one node, aligned with
// Graph::inclusive_neighborhood order.
struct WeightVector {
  int node = 0;
  std::vector<int> neighbors;
  Eigen::VectorXd weights;
};

// exp(f(psi_i, psi_j) - max_k f) normalized over the inclusive neighborhood;
// the shift makes small-bandwidth potentials representable.
WeightVector gibbs_weights(const Graph& g, const Eigen::MatrixXd& features,
                           const GibbsPotential& p, int node);
std::vector<WeightVector> gibbs_weights_all(const Graph& g,
                                            const Eigen::MatrixXd& features,
                                            const GibbsPotential& p);

// h_bar per node: the convex combination of neighbor features under the given
// weights, summed in ascending neighbor order. Returns d x N.
Eigen::MatrixXd aggregate_history(const Graph& g,
                                  const Eigen::MatrixXd& features,
                                  const std::vector<WeightVector>& weights);

// Fused weights+aggregation used in hot paths; exactly matches the two-step
// form. Optionally records the weights.
Eigen::MatrixXd gibbs_aggregate(const Graph& g,
                                const Eigen::MatrixXd& features,
                                const GibbsPotential& p,
                                std::vector<WeightVector>* weights_out = nullptr);

}  // namespace kdc
