#include "shel/numerics.hpp"

#include <cmath>
#include <numeric>

#include "doctest.h"
#include "shel/error.hpp"

using namespace shel;

TEST_SUITE("numerics") {

TEST_CASE("derived seeds are order-independent and distinct") {
  const uint64_t a = derive_seed(42, {1, 2, 3});
  const uint64_t b = derive_seed(42, {1, 2, 3});
  CHECK(a == b);
  CHECK(a != derive_seed(42, {3, 2, 1}));
  CHECK(a != derive_seed(43, {1, 2, 3}));
}

TEST_CASE("quantile matches a sorted-array oracle") {
  Rng rng(9u);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> x(101 + rep);
    for (auto& v : x) v = rng.normal();
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    for (double p : {0.0, 0.025, 0.5, 0.975, 1.0}) {
      const double h = (x.size() - 1) * p;
      const size_t lo = static_cast<size_t>(std::floor(h));
      const size_t hi = static_cast<size_t>(std::ceil(h));
      const double expect = sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
      CHECK(quantile(x, p) == doctest::Approx(expect).epsilon(1e-14));
    }
  }
  // {1..10000} has median 5000.5 under linear interpolation
  std::vector<double> seq(10000);
  std::iota(seq.begin(), seq.end(), 1.0);
  CHECK(quantile(seq, 0.5) == doctest::Approx(5000.5).epsilon(1e-14));
}

TEST_CASE("gamma quantile: exponential closed form and monotonicity") {
  // Gamma(1, b) is Exponential(b): median log(2)/b
  CHECK(gamma_quantile(1.0, 1.0, 0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK(gamma_quantile(1.0, 2.0, 0.5) ==
        doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-9));
  CHECK(gamma_p(2.5, 1e9) == doctest::Approx(1.0).epsilon(1e-12));
  const double q1 = gamma_quantile(3.0, 1.0, 0.25);
  const double q2 = gamma_quantile(3.0, 1.0, 0.75);
  CHECK(q1 < q2);
  CHECK(gamma_p(3.0, q1) == doctest::Approx(0.25).epsilon(1e-8));
}

TEST_CASE("nelder-mead minimizes a shifted quadratic") {
  auto f = [](const Eigen::VectorXd& x) {
    return (x[0] - 1.5) * (x[0] - 1.5) + 3.0 * (x[1] + 0.5) * (x[1] + 0.5);
  };
  const auto res = nelder_mead(f, Eigen::VectorXd::Zero(2),
                               Eigen::VectorXd::Constant(2, 0.5), 1e-14, 2000);
  CHECK(res.x[0] == doctest::Approx(1.5).epsilon(1e-5));
  CHECK(res.x[1] == doctest::Approx(-0.5).epsilon(1e-5));
}

TEST_CASE("wls reproduces the normal equations") {
  Rng rng(3u);
  const int n = 50;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n), w(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = rng.normal();
    w[i] = 0.5 + rng.uniform();
    y[i] = 1.0 - 2.0 * X(i, 1) + rng.normal();
  }
  const WlsFit fit = wls(X, y, w);
  const Eigen::MatrixXd XtWX = X.transpose() * w.asDiagonal() * X;
  const Eigen::VectorXd rhs = X.transpose() * w.asDiagonal() * y;
  CHECK((XtWX * fit.beta - rhs).lpNorm<Eigen::Infinity>() < 1e-9);

  Eigen::MatrixXd Xdup(n, 2);
  Xdup.col(0) = X.col(1);
  Xdup.col(1) = X.col(1);
  CHECK_THROWS_AS(wls(Xdup, y, w), RankDeficientDesign);
}

TEST_CASE("constant-in-column-space detection") {
  Eigen::MatrixXd X(4, 2);
  X << 1, 0, 1, 0, 0, 1, 0, 1;  // two dummies summing to the constant
  CHECK(has_constant_in_colspace(X));
  Eigen::MatrixXd X2(4, 1);
  X2 << 1, 2, 3, 4;
  CHECK_FALSE(has_constant_in_colspace(X2));
}

TEST_CASE("parallel_for covers every task and rethrows") {
  std::vector<int> hits(100, 0);
  parallel_for(100, 4, [&](int i) { hits[i] = i + 1; });
  for (int i = 0; i < 100; ++i) CHECK(hits[i] == i + 1);
  CHECK_THROWS_AS(
      parallel_for(10, 3, [](int i) { if (i == 7) throw NumericError("boom"); }),
      NumericError);
}

TEST_CASE("psd_sqrt handles the zero matrix and reproduces PD roots") {
  const Eigen::MatrixXd Z = psd_sqrt(Eigen::MatrixXd::Zero(3, 3));
  CHECK(Z.lpNorm<Eigen::Infinity>() == 0.0);
  Eigen::MatrixXd S(2, 2);
  S << 4.0, 1.0, 1.0, 2.0;
  const Eigen::MatrixXd R = psd_sqrt(S);
  CHECK((R * R - S).lpNorm<Eigen::Infinity>() < 1e-10);
}

}  // TEST_SUITE
