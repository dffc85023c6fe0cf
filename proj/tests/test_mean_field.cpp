#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kdc/errors.hpp"
#include "kdc/graph.hpp"
#include "kdc/mean_field.hpp"
#include "kdc/rng.hpp"

using namespace kdc;

namespace {

Eigen::MatrixXd random_features(int d, int n, Rng& rng, double scale = 1.0) {
  Eigen::MatrixXd m(d, n);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

}  // namespace

TEST_CASE("potential values match the closed forms") {
  Eigen::VectorXd a(2), b(2);
  a << 1.0, 0.0;
  b = a;
  CHECK(GibbsPotential::gaussian(1.0)(a, b) == 0.0);

  b << 1.0, std::sqrt(2.0);  // distance sqrt(2)
  CHECK(GibbsPotential::gaussian(1.0)(a, b) == doctest::Approx(-1.0));

  CHECK(GibbsPotential::vmf(3.0)(a, a) == doctest::Approx(3.0));

  Eigen::VectorXd c(2), d(2);
  c << 1.0, -2.0;
  d << 0.5, 1.0;
  CHECK(GibbsPotential::laplace(2.0)(c, d) == doctest::Approx(-(0.5 + 3.0) / 2.0));
}

TEST_CASE("vmf rejects zero vectors") {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(2), a(2);
  a << 1.0, 0.0;
  CHECK_THROWS_AS(GibbsPotential::vmf(1.0)(z, a), NumericalError);
  Graph g = Graph::chain(2);
  Eigen::MatrixXd f(2, 2);
  f.col(0) << 1.0, 0.0;
  f.col(1).setZero();
  CHECK_THROWS_AS(gibbs_weights(g, f, GibbsPotential::vmf(1.0), 0),
                  NumericalError);
}

TEST_CASE("identical features give uniform weights") {
  Graph g = Graph::complete(4);
  Eigen::MatrixXd f = Eigen::MatrixXd::Constant(3, 4, 0.7);
  for (const auto& p :
       {GibbsPotential::gaussian(0.3), GibbsPotential::laplace(1.0),
        GibbsPotential::vmf(2.0)}) {
    WeightVector w = gibbs_weights(g, f, p, 1);
    for (int k = 0; k < w.weights.size(); ++k)
      CHECK(w.weights(k) == doctest::Approx(0.25).epsilon(1e-12));
  }
}

TEST_CASE("two-node gaussian weights match the scalar softmax") {
  // exponents 0 and -1: alpha = [1, e^-1] / (1 + e^-1)
  Graph g(2, {{0, 1}});
  Eigen::MatrixXd f(2, 2);
  f.col(0) << 0.0, 0.0;
  f.col(1) << 1.0, 1.0;  // distance sqrt(2)
  WeightVector w = gibbs_weights(g, f, GibbsPotential::gaussian(1.0), 0);
  CHECK(w.weights(0) == doctest::Approx(0.73106).epsilon(1e-4));
  CHECK(w.weights(1) == doctest::Approx(0.26894).epsilon(1e-4));
}

TEST_CASE("huge bandwidth flattens to uniform") {
  Graph g = Graph::erdos_renyi(8, 0.5, 3);
  Rng rng(1);
  Eigen::MatrixXd f = random_features(3, 8, rng, 2.0);
  for (int i = 0; i < 8; ++i) {
    WeightVector w = gibbs_weights(g, f, GibbsPotential::gaussian(1e6), i);
    const double uniform = 1.0 / static_cast<double>(w.neighbors.size());
    for (int k = 0; k < w.weights.size(); ++k)
      CHECK(std::abs(w.weights(k) - uniform) < 1e-9);
  }
}

TEST_CASE("tiny bandwidth concentrates mass on the self node") {
  Graph g = Graph::complete(5);
  Rng rng(2);
  // enforce pairwise distances >= 0.1
  Eigen::MatrixXd f(2, 5);
  for (int i = 0; i < 5; ++i) f.col(i) << static_cast<double>(i), 0.0;
  for (int i = 0; i < 5; ++i) {
    WeightVector w = gibbs_weights(g, f, GibbsPotential::gaussian(1e-3), i);
    for (int k = 0; k < w.weights.size(); ++k) {
      if (w.neighbors[k] == i)
        CHECK(w.weights(k) >= 1.0 - 1e-6);
      else
        CHECK(w.weights(k) <= 1e-6);
    }
  }
}

TEST_CASE("weights form a simplex for random inputs") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Graph g = Graph::erdos_renyi(6, 0.4, 100 + trial);
    Eigen::MatrixXd f = random_features(4, 6, rng, 1.5);
    GibbsPotential p;
    switch (trial % 3) {
      case 0: p = GibbsPotential::gaussian(rng.uniform(0.05, 3.0)); break;
      case 1: p = GibbsPotential::laplace(rng.uniform(0.1, 3.0)); break;
      default: p = GibbsPotential::vmf(rng.uniform(0.0, 4.0)); break;
    }
    for (int i = 0; i < 6; ++i) {
      WeightVector w = gibbs_weights(g, f, p, i);
      CHECK(std::abs(w.weights.sum() - 1.0) <= 1e-12);
      CHECK(w.weights.minCoeff() >= 0.0);
      CHECK(w.neighbors == g.inclusive_neighborhood(i));
    }
  }
}

TEST_CASE("gaussian and laplace weights are shift invariant") {
  Graph g = Graph::erdos_renyi(7, 0.5, 9);
  Rng rng(4);
  Eigen::MatrixXd f = random_features(3, 7, rng);
  Eigen::VectorXd shift = Eigen::VectorXd::Constant(3, 11.25);
  Eigen::MatrixXd fs = f.colwise() + shift;
  for (const auto& p :
       {GibbsPotential::gaussian(0.7), GibbsPotential::laplace(1.3)}) {
    for (int i = 0; i < 7; ++i) {
      WeightVector a = gibbs_weights(g, f, p, i);
      WeightVector b = gibbs_weights(g, fs, p, i);
      CHECK((a.weights - b.weights).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("vmf weights are invariant to positive rescaling") {
  Graph g = Graph::complete(5);
  Rng rng(5);
  Eigen::MatrixXd f = random_features(3, 5, rng);
  Eigen::MatrixXd f2 = 37.5 * f;
  GibbsPotential p = GibbsPotential::vmf(2.0);
  for (int i = 0; i < 5; ++i) {
    WeightVector a = gibbs_weights(g, f, p, i);
    WeightVector b = gibbs_weights(g, f2, p, i);
    CHECK((a.weights - b.weights).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("log-sum-exp stabilization agrees with the naive softmax") {
  Graph g = Graph::erdos_renyi(6, 0.6, 2);
  Rng rng(6);
  Eigen::MatrixXd f = random_features(3, 6, rng);
  GibbsPotential p = GibbsPotential::gaussian(10.0);  // small exponents
  for (int i = 0; i < 6; ++i) {
    WeightVector w = gibbs_weights(g, f, p, i);
    const auto& nbrs = g.inclusive_neighborhood(i);
    Eigen::VectorXd naive(nbrs.size());
    for (std::size_t k = 0; k < nbrs.size(); ++k)
      naive(static_cast<int>(k)) = std::exp(p(f.col(i), f.col(nbrs[k])));
    naive /= naive.sum();
    CHECK((w.weights - naive).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("aggregation on a single node returns its own feature") {
  Graph g(1, {});
  Eigen::MatrixXd f(3, 1);
  f.col(0) << 1.0, -2.0, 0.5;
  auto w = gibbs_weights_all(g, f, GibbsPotential::gaussian(1.0));
  Eigen::MatrixXd agg = aggregate_history(g, f, w);
  CHECK((agg - f).norm() == 0.0);
}

TEST_CASE("aggregation of identical features returns that feature") {
  Graph g = Graph::chain(3);
  Eigen::MatrixXd f = Eigen::MatrixXd::Constant(2, 3, 1.5);
  auto w = gibbs_weights_all(g, f, GibbsPotential::laplace(0.5));
  Eigen::MatrixXd agg = aggregate_history(g, f, w);
  CHECK((agg - f).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("aggregation arithmetic on explicit weights") {
  Graph g(2, {{0, 1}});
  Eigen::MatrixXd f(2, 2);
  f.col(0) << 1.0, 0.0;
  f.col(1) << 0.0, 1.0;
  std::vector<WeightVector> w(2);
  w[0].node = 0;
  w[0].neighbors = {0, 1};
  w[0].weights = Eigen::Vector2d(0.7, 0.3);
  w[1].node = 1;
  w[1].neighbors = {0, 1};
  w[1].weights = Eigen::Vector2d(0.5, 0.5);
  Eigen::MatrixXd agg = aggregate_history(g, f, w);
  CHECK(agg(0, 0) == doctest::Approx(0.7));
  CHECK(agg(1, 0) == doctest::Approx(0.3));
}

TEST_CASE("fused aggregate matches the two-step path") {
  Graph g = Graph::erdos_renyi(9, 0.4, 8);
  Rng rng(7);
  Eigen::MatrixXd f = random_features(4, 9, rng);
  GibbsPotential p = GibbsPotential::gaussian(0.9);
  std::vector<WeightVector> w;
  Eigen::MatrixXd fused = gibbs_aggregate(g, f, p, &w);
  Eigen::MatrixXd twostep = aggregate_history(g, f, gibbs_weights_all(g, f, p));
  CHECK((fused - twostep).norm() == 0.0);
  CHECK(w.size() == 9);
}
