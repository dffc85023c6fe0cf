#include "kdc/mean_field.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "kdc/errors.hpp"

namespace kdc {

using nlohmann::json;

std::string to_string(GibbsPotential::Kind k) {
  switch (k) {
    case GibbsPotential::Kind::Gaussian: return "gaussian";
    case GibbsPotential::Kind::Laplace: return "laplace";
    case GibbsPotential::Kind::VonMisesFisher: return "vmf";
  }
  return "?";
}

void GibbsPotential::validate() const {
  if (kind == Kind::VonMisesFisher) {
    if (param < 0.0) throw ConfigError("vmf concentration must be >= 0");
  } else if (!(param > 0.0)) {
    throw ConfigError("potential hyperparameter must be > 0");
  }
}

double GibbsPotential::operator()(const Eigen::VectorXd& a,
                                  const Eigen::VectorXd& b) const {
  if (a.size() != b.size())
    throw std::invalid_argument("potential features must share a dimension");
  switch (kind) {
    case Kind::Gaussian:
      return -(a - b).squaredNorm() / (2.0 * param * param);
    case Kind::Laplace:
      return -(a - b).lpNorm<1>() / param;
    case Kind::VonMisesFisher: {
      double na = a.norm(), nb = b.norm();
      if (na == 0.0 || nb == 0.0)
        throw NumericalError("vmf potential is undefined on a zero vector");
      return param * a.dot(b) / (na * nb);
    }
  }
  throw NumericalError("unreachable potential kind");
}

WeightVector gibbs_weights(const Graph& g, const Eigen::MatrixXd& features,
                           const GibbsPotential& p, int node) {
  const auto& nbrs = g.inclusive_neighborhood(node);
  WeightVector w;
  w.node = node;
  w.neighbors = nbrs;
  const int k = static_cast<int>(nbrs.size());
  Eigen::VectorXd f(k);
  for (int idx = 0; idx < k; ++idx)
    f(idx) = p(features.col(node), features.col(nbrs[idx]));
  const double m = f.maxCoeff();
  Eigen::VectorXd e = (f.array() - m).exp();
  w.weights = e / e.sum();
  return w;
}

std::vector<WeightVector> gibbs_weights_all(const Graph& g,
                                            const Eigen::MatrixXd& features,
                                            const GibbsPotential& p) {
  std::vector<WeightVector> out;
  out.reserve(g.size());
  for (int i = 0; i < g.size(); ++i)
    out.push_back(gibbs_weights(g, features, p, i));
  return out;
}

Eigen::MatrixXd aggregate_history(const Graph& g,
                                  const Eigen::MatrixXd& features,
                                  const std::vector<WeightVector>& weights) {
  if (static_cast<int>(weights.size()) != g.size())
    throw std::invalid_argument("need one weight vector per node");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(features.rows(), g.size());
  for (int i = 0; i < g.size(); ++i) {
    const auto& w = weights[i];
    for (int idx = 0; idx < static_cast<int>(w.neighbors.size()); ++idx)
      out.col(i) += w.weights(idx) * features.col(w.neighbors[idx]);
  }
  return out;
}

Eigen::MatrixXd gibbs_aggregate(const Graph& g, const Eigen::MatrixXd& features,
                                const GibbsPotential& p,
                                std::vector<WeightVector>* weights_out) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(features.rows(), g.size());
  if (weights_out) {
    weights_out->clear();
    weights_out->reserve(g.size());
  }
  for (int i = 0; i < g.size(); ++i) {
    WeightVector w = gibbs_weights(g, features, p, i);
    for (int idx = 0; idx < static_cast<int>(w.neighbors.size()); ++idx)
      out.col(i) += w.weights(idx) * features.col(w.neighbors[idx]);
    if (weights_out) weights_out->push_back(std::move(w));
  }
  return out;
}

json GibbsPotential::to_json() const {
  return {{"kind", to_string(kind)}, {"param", param}};
}

GibbsPotential GibbsPotential::from_json(const json& j) {
  const std::string k = j.at("kind").get<std::string>();
  const double param = j.at("param").get<double>();
  GibbsPotential p;
  if (k == "gaussian") p = gaussian(param);
  else if (k == "laplace") p = laplace(param);
  else if (k == "vmf") p = vmf(param);
  else throw ConfigError("unknown potential kind: " + k);
  p.validate();
  return p;
}

}  // namespace kdc
