#include "shel/spatial.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "doctest.h"
#include "shel/error.hpp"
#include "shel/numerics.hpp"
#include "support.hpp"

using namespace shel;

TEST_SUITE("spatial") {

TEST_CASE("graph validation") {
  CHECK_THROWS_AS(LatticeGraph(3, {{0, 0}}), ValidationError);
  CHECK_THROWS_AS(LatticeGraph(3, {{0, 1}, {1, 0}}), ValidationError);
  CHECK_THROWS_AS(LatticeGraph(3, {{0, 3}}), ValidationError);
  const LatticeGraph g(4, {{0, 1}, {1, 2}});
  CHECK_FALSE(g.connected());  // node 3 unreachable
  CHECK(testsup::path_graph(4).connected());
}

TEST_CASE("ICAR precision of the 3-node path") {
  const Eigen::MatrixXd Q = icar_precision(testsup::path_graph(3));
  Eigen::MatrixXd expect(3, 3);
  expect << 1, -1, 0, -1, 2, -1, 0, -1, 1;
  CHECK((Q - expect).lpNorm<Eigen::Infinity>() == 0.0);

  // eigenvalues {0, 1, 3} from the characteristic polynomial
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
  CHECK(std::abs(es.eigenvalues()[0] - 0.0) < 1e-9);
  CHECK(std::abs(es.eigenvalues()[1] - 1.0) < 1e-9);
  CHECK(std::abs(es.eigenvalues()[2] - 3.0) < 1e-9);
}

TEST_CASE("ICAR row sums vanish and the nullity is one on connected graphs") {
  Rng rng(17u);
  for (int rep = 0; rep < 25; ++rep) {
    const auto g = testsup::random_connected_graph(12, 0.3, rng);
    const Eigen::MatrixXd Q = icar_precision(g);
    CHECK((Q * Eigen::VectorXd::Ones(12)).lpNorm<Eigen::Infinity>() < 1e-10);
    CHECK((Q - Q.transpose()).lpNorm<Eigen::Infinity>() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
    CHECK(std::abs(es.eigenvalues()[0]) < 1e-10);
    CHECK(es.eigenvalues()[1] > 1e-8);  // second-smallest strictly positive
  }
}

TEST_CASE("isolated nodes are rejected with their index") {
  const LatticeGraph g(3, {{0, 1}});
  try {
    icar_precision(g);
    FAIL("expected IsolatedNode");
  } catch (const IsolatedNode& e) {
    CHECK(e.node_index == 2);
  }
}

TEST_CASE("centering projection properties") {
  SUBCASE("intercept-only annihilates the constant") {
    const Eigen::MatrixXd P = centering_projection(Eigen::MatrixXd::Ones(5, 1));
    const Eigen::MatrixXd expect =
        Eigen::MatrixXd::Identity(5, 5) - Eigen::MatrixXd::Constant(5, 5, 0.2);
    CHECK((P - expect).lpNorm<Eigen::Infinity>() < 1e-12);
  }
  SUBCASE("idempotency and annihilation on random designs") {
    Rng rng(23u);
    for (int rep = 0; rep < 10; ++rep) {
      Eigen::MatrixXd X(20, 3);
      X.col(0).setOnes();
      for (int i = 0; i < 20; ++i) {
        X(i, 1) = rng.normal();
        X(i, 2) = rng.uniform();
      }
      const Eigen::MatrixXd P = centering_projection(X);
      CHECK((P * P - P).lpNorm<Eigen::Infinity>() < 1e-10);
      CHECK((P * X).lpNorm<Eigen::Infinity>() < 1e-10);
      CHECK((P - P.transpose()).lpNorm<Eigen::Infinity>() < 1e-12);
    }
  }
  SUBCASE("rank-deficient designs are rejected") {
    Eigen::MatrixXd X(4, 2);
    X.col(0).setOnes();
    X.col(1).setOnes();
    CHECK_THROWS_AS(centering_projection(X), RankDeficientDesign);
  }
}

TEST_CASE("moran basis on a grid: PD reduced precision, orthogonality") {
  const auto g = testsup::grid_graph(10, 10);
  const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(100, 1);
  const SpatialBasis b = moran_basis(g, X);
  CHECK(b.min_eig > 0.0);
  CHECK(b.q() >= 1);
  CHECK((b.M.transpose() * b.M -
         Eigen::MatrixXd::Identity(b.q(), b.q())).lpNorm<Eigen::Infinity>() < 1e-8);
  CHECK((b.M.transpose() * X).lpNorm<Eigen::Infinity>() < 1e-8);
  // eigenvalues strictly positive, sorted descending
  for (int j = 0; j + 1 < b.q(); ++j) CHECK(b.eigvals[j] >= b.eigvals[j + 1]);
  CHECK(b.eigvals[b.q() - 1] > 0.0);
  // Cholesky factor reproduces the reduced precision
  CHECK((b.Qr_chol * b.Qr_chol.transpose() - b.Q_reduced).lpNorm<Eigen::Infinity>()
        < 1e-10);
}

TEST_CASE("moran rank bound on the 3-node path") {
  // Pc projects out one dimension, so at most 2 nonzero eigenvalues; here the
  // projected operator is in fact negative semidefinite, leaving no positive
  // eigenvector to keep
  const auto report = verify_theorem1(testsup::path_graph(3),
                                      Eigen::MatrixXd::Ones(3, 1));
  CHECK(report.q <= 2);
  CHECK(report.q == 0);
  CHECK_THROWS_AS(moran_basis(testsup::path_graph(3), Eigen::MatrixXd::Ones(3, 1)),
                  NumericError);
}

TEST_CASE("fraction policy keeps ceil(p n) columns") {
  // on a large grid there are plenty of positive eigenvalues
  const auto g = testsup::grid_graph(5, 23);  // n = 115
  const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(115, 1);
  const SpatialBasis b = moran_basis(g, X, QPolicy::top_fraction(0.1));
  CHECK(b.q() == 12);  // ceil(0.1 * 115)
}

TEST_CASE("moran basis preconditions") {
  Eigen::VectorXd x(4);
  x << 0.3, -1.2, 0.7, 2.0;
  Eigen::MatrixXd X_no_int(4, 1);
  X_no_int << 0.3, -1.2, 0.7, 2.0;
  CHECK_THROWS_AS(moran_basis(testsup::path_graph(4), X_no_int), NoIntercept);
  const LatticeGraph disconnected(4, {{0, 1}, {2, 3}});
  CHECK_THROWS_AS(moran_basis(disconnected, Eigen::MatrixXd::Ones(4, 1)),
                  DisconnectedGraph);
}

TEST_CASE("theorem 1: randomized PD census") {
  Rng rng(2026u);
  for (int rep = 0; rep < 100; ++rep) {
    const auto g = testsup::random_connected_graph(20, 0.2, rng);
    Eigen::MatrixXd X(20, 2);
    X.col(0).setOnes();
    for (int i = 0; i < 20; ++i) X(i, 1) = rng.normal();
    const auto report = verify_theorem1(g, X);
    CHECK(report.pd);
    CHECK(report.min_eig > 0.0);
  }
}

TEST_CASE("theorem 1 needs only the constant in the column space") {
  // two dummy columns summing to one: no literal intercept column
  const auto g = testsup::grid_graph(3, 4);
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(12, 2);
  for (int i = 0; i < 12; ++i) X(i, i % 2) = 1.0;
  const auto report = verify_theorem1(g, X);
  CHECK(report.pd);
}

TEST_CASE("maximal admissible rank: all nonzero eigenvectors keep PD") {
  const auto g = testsup::grid_graph(4, 5);
  const auto report =
      verify_theorem1(g, Eigen::MatrixXd::Ones(20, 1), /*all_nonzero=*/true);
  CHECK(report.pd);
  CHECK(report.q == 19);  // rank(M) = n - 1 with intercept-only X
}

TEST_CASE("exponential covariance") {
  PointField field;
  field.coords.resize(2, 2);
  field.coords << 0.0, 0.0, 1.0, 0.0;
  field.sigma2_y = 1.0;
  field.phi = 1.0;
  const Eigen::MatrixXd S = exp_covariance(field);
  CHECK(S(0, 0) == doctest::Approx(1.0 + 1e-8).epsilon(1e-12));
  CHECK(S(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
  CHECK(S(1, 0) == S(0, 1));

  SUBCASE("random point sets factorize after the jitter") {
    Rng rng(4u);
    PointField f;
    f.coords.resize(5, 2);
    for (int i = 0; i < 5; ++i) {
      f.coords(i, 0) = rng.uniform();
      f.coords(i, 1) = rng.uniform();
    }
    f.sigma2_y = 2.0;
    f.phi = 0.7;
    Eigen::LLT<Eigen::MatrixXd> llt(exp_covariance(f));
    CHECK(llt.info() == Eigen::Success);
  }
  SUBCASE("duplicates and bad parameters are rejected") {
    PointField dup;
    dup.coords.resize(2, 2);
    dup.coords << 1.0, 2.0, 1.0, 2.0;
    CHECK_THROWS_AS(exp_covariance(dup), DuplicateCoordinates);
    PointField bad = field;
    bad.phi = 0.0;
    CHECK_THROWS_AS(exp_covariance(bad), NonPositiveParams);
  }
}

}  // TEST_SUITE
