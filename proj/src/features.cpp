#include "kdc/features.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "kdc/errors.hpp"
#include "kdc/rng.hpp"

namespace kdc {

using nlohmann::json;

std::string to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::Identity: return "identity";
    case FeatureKind::RandomFourier: return "random_fourier";
    case FeatureKind::Polynomial: return "polynomial";
  }
  return "?";
}

FeatureKind feature_kind_from_string(const std::string& s) {
  if (s == "identity") return FeatureKind::Identity;
  if (s == "random_fourier" || s == "rff") return FeatureKind::RandomFourier;
  if (s == "polynomial" || s == "poly") return FeatureKind::Polynomial;
  throw ConfigError("unknown feature kind: " + s);
}

namespace {

int polynomial_dim(int n, int degree) {
  // constant + linear (+ upper-triangular quadratic)
  return degree == 1 ? 1 + n : 1 + n + n * (n + 1) / 2;
}

}  // namespace

FeatureMap FeatureMap::identity(int input_dim, bool augment) {
  if (input_dim < 1) throw ConfigError("identity map needs input_dim >= 1");
  FeatureMap m;
  m.kind_ = FeatureKind::Identity;
  m.input_dim_ = input_dim;
  m.augment_ = augment;
  m.d_ = augment ? 2 * input_dim : input_dim;
  return m;
}

FeatureMap FeatureMap::random_fourier(int input_dim, int d, double gamma,
                                      std::uint64_t seed, bool augment) {
  if (input_dim < 1 || d < 1) throw ConfigError("bad random-fourier dims");
  if (!(gamma > 0.0)) throw ConfigError("random-fourier bandwidth must be > 0");
  FeatureMap m;
  m.kind_ = FeatureKind::RandomFourier;
  m.input_dim_ = input_dim;
  m.augment_ = augment;
  m.d_ = d;
  m.gamma_ = gamma;
  m.seed_ = seed;
  const int in = m.encoder_input_dim();
  m.W_.resize(d, in);
  m.b_.resize(d);
  Rng rng(seed);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < in; ++c) m.W_(r, c) = rng.normal() / gamma;
  for (int r = 0; r < d; ++r)
    m.b_(r) = rng.uniform() * 6.283185307179586476925286766559;
  return m;
}

FeatureMap FeatureMap::polynomial(int input_dim, int degree, bool augment) {
  if (input_dim < 1) throw ConfigError("polynomial map needs input_dim >= 1");
  if (degree != 1 && degree != 2)
    throw ConfigError("polynomial degree must be 1 or 2");
  FeatureMap m;
  m.kind_ = FeatureKind::Polynomial;
  m.input_dim_ = input_dim;
  m.augment_ = augment;
  m.degree_ = degree;
  m.d_ = polynomial_dim(augment ? 2 * input_dim : input_dim, degree);
  return m;
}

int FeatureMap::encoder_input_dim() const {
  return augment_ ? 2 * input_dim_ : input_dim_;
}

Eigen::VectorXd FeatureMap::apply(const Eigen::VectorXd& x) const {
  if (x.size() != encoder_input_dim())
    throw std::invalid_argument("feature map input dimension mismatch");
  switch (kind_) {
    case FeatureKind::Identity:
      return x;
    case FeatureKind::RandomFourier: {
      Eigen::VectorXd z = (W_ * x + b_).array().cos();
      return std::sqrt(2.0 / d_) * z;
    }
    case FeatureKind::Polynomial: {
      const int n = static_cast<int>(x.size());
      Eigen::VectorXd z(d_);
      int k = 0;
      z(k++) = 1.0;
      for (int i = 0; i < n; ++i) z(k++) = x(i);
      if (degree_ == 2)
        for (int i = 0; i < n; ++i)
          for (int j = i; j < n; ++j) z(k++) = x(i) * x(j);
      return z;
    }
  }
  throw NumericalError("unreachable feature kind");
}

Eigen::VectorXd FeatureMap::encode_node(const Graph& g,
                                        const Eigen::MatrixXd& obs,
                                        int node) const {
  if (obs.rows() != input_dim_)
    throw std::invalid_argument("observation dimension mismatch");
  if (!augment_) return apply(obs.col(node));
  Eigen::VectorXd x(2 * input_dim_);
  x.head(input_dim_) = obs.col(node);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(input_dim_);
  int count = 0;
  for (int j : g.inclusive_neighborhood(node)) {
    if (j == node) continue;
    mean += obs.col(j);
    ++count;
  }
  if (count > 0) mean /= count;
  x.tail(input_dim_) = mean;
  return apply(x);
}

Eigen::MatrixXd FeatureMap::encode_all(const Graph& g,
                                       const Eigen::MatrixXd& obs) const {
  Eigen::MatrixXd out(d_, obs.cols());
  for (int i = 0; i < obs.cols(); ++i) out.col(i) = encode_node(g, obs, i);
  return out;
}

json FeatureMap::to_json() const {
  json j = {{"kind", to_string(kind_)},
            {"input_dim", input_dim_},
            {"dim", d_},
            {"augment", augment_}};
  if (kind_ == FeatureKind::RandomFourier) {
    j["gamma"] = gamma_;
    j["seed"] = seed_;
  }
  if (kind_ == FeatureKind::Polynomial) j["degree"] = degree_;
  return j;
}

FeatureMap FeatureMap::from_json(const json& j) {
  const auto kind = feature_kind_from_string(j.at("kind").get<std::string>());
  const int input_dim = j.at("input_dim").get<int>();
  const bool augment = j.value("augment", false);
  switch (kind) {
    case FeatureKind::Identity:
      return identity(input_dim, augment);
    case FeatureKind::RandomFourier:
      return random_fourier(input_dim, j.at("dim").get<int>(),
                            j.at("gamma").get<double>(),
                            j.at("seed").get<std::uint64_t>(), augment);
    case FeatureKind::Polynomial:
      return polynomial(input_dim, j.at("degree").get<int>(), augment);
  }
  throw ConfigError("bad feature map json");
}

double median_heuristic_gamma(const Eigen::MatrixXd& samples, int max_samples) {
  const int s = std::min<int>(static_cast<int>(samples.cols()), max_samples);
  if (s < 2) return 1.0;
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(s) * (s - 1) / 2);
  for (int i = 0; i < s; ++i)
    for (int j = i + 1; j < s; ++j)
      dists.push_back((samples.col(i) - samples.col(j)).norm());
  auto mid = dists.begin() + dists.size() / 2;
  std::nth_element(dists.begin(), mid, dists.end());
  double med = *mid;
  return med > 0.0 ? med : 1.0;
}

ActionProjection ActionProjection::identity(int dim) {
  if (dim < 1) throw ConfigError("action projection needs dim >= 1");
  ActionProjection p;
  p.is_identity_ = true;
  p.P_ = Eigen::MatrixXd::Identity(dim, dim);
  return p;
}

ActionProjection ActionProjection::random(int dim, int d_a,
                                          std::uint64_t seed) {
  if (d_a < dim) throw ConfigError("action feature dim must be >= action dim");
  if (d_a == dim) return identity(dim);
  ActionProjection p;
  p.is_identity_ = false;
  p.seed_ = seed;
  Rng rng(seed);
  Eigen::MatrixXd M(d_a, dim);
  for (int r = 0; r < d_a; ++r)
    for (int c = 0; c < dim; ++c) M(r, c) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(M);
  p.P_ = qr.householderQ() * Eigen::MatrixXd::Identity(d_a, dim);
  return p;
}

Eigen::VectorXd ActionProjection::encode(const Eigen::VectorXd& a) const {
  if (a.size() != P_.cols())
    throw std::invalid_argument("action dimension mismatch");
  return P_ * a;
}

Eigen::VectorXd ActionProjection::decode(const Eigen::VectorXd& psi) const {
  if (psi.size() != P_.rows())
    throw std::invalid_argument("action feature dimension mismatch");
  return P_.transpose() * psi;
}

Eigen::MatrixXd ActionProjection::encode_all(
    const Eigen::MatrixXd& actions) const {
  if (actions.rows() != P_.cols())
    throw std::invalid_argument("action dimension mismatch");
  return P_ * actions;
}

Eigen::MatrixXd ActionProjection::decode_all(
    const Eigen::MatrixXd& psis) const {
  if (psis.rows() != P_.rows())
    throw std::invalid_argument("action feature dimension mismatch");
  return P_.transpose() * psis;
}

json ActionProjection::to_json() const {
  return {{"action_dim", action_dim()},
          {"dim", dim()},
          {"identity", is_identity_},
          {"seed", seed_}};
}

ActionProjection ActionProjection::from_json(const json& j) {
  const int action_dim = j.at("action_dim").get<int>();
  const int dim = j.at("dim").get<int>();
  if (j.value("identity", true)) return identity(action_dim);
  return random(action_dim, dim, j.at("seed").get<std::uint64_t>());
}

Decoder fit_decoder(const Eigen::MatrixXd& features,
                    const Eigen::MatrixXd& targets, double rho) {
  if (features.cols() == 0 || features.cols() != targets.cols())
    throw std::invalid_argument("decoder needs matching nonempty samples");
  if (rho < 0.0) throw ConfigError("decoder ridge strength must be >= 0");
  const int d = static_cast<int>(features.rows());
  Eigen::MatrixXd gram =
      features * features.transpose() + rho * Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd cross = targets * features.transpose();  // obs_dim x d
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("decoder normal equations are singular; use rho > 0");
  Eigen::MatrixXd Dt = ldlt.solve(cross.transpose());
  // one refinement pass keeps the residual near round-off
  Dt += ldlt.solve(cross.transpose() - gram * Dt);
  Decoder dec;
  dec.D = Dt.transpose();
  dec.rho = rho;
  if (!dec.D.allFinite())
    throw NumericalError("decoder fit produced non-finite entries");
  return dec;
}

double decoder_residual(const Decoder& dec, const Eigen::MatrixXd& features,
                        const Eigen::MatrixXd& targets) {
  const int d = static_cast<int>(features.rows());
  Eigen::MatrixXd gram = features * features.transpose() +
                         dec.rho * Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd cross = targets * features.transpose();
  double num = (dec.D * gram - cross).norm();
  double den = cross.norm();
  return num / (den > 0 ? den : 1.0);
}

}  // namespace kdc
