#include "shel/el.hpp"

#include <cmath>

#include "doctest.h"
#include "shel/error.hpp"
#include "support.hpp"

using namespace shel;

namespace {

ELState solve_mean_only(const Eigen::VectorXd& z, double theta_val,
                        LambdaSolver solver = LambdaSolver::Dual) {
  EstimatingEquationSet eqs{EqFamily::GaussianFH, false};
  const Eigen::VectorXd theta = Eigen::VectorXd::Constant(z.size(), theta_val);
  ELOptions opts;
  opts.solver = solver;
  return solve_lambda(eqs.residuals(z, theta), opts);
}

}  // namespace

TEST_SUITE("el") {

TEST_CASE("weights at zero multiplier are uniform") {
  Eigen::MatrixXd m(1, 4);
  m << -1.0, 0.5, 0.25, 0.25;
  const Eigen::VectorXd w = compute_weights(Eigen::VectorXd::Zero(1), m);
  for (int i = 0; i < 4; ++i) CHECK(w[i] == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("weight formula: direct substitution, n=2, J=1") {
  Eigen::MatrixXd m(1, 2);
  m << 1.0, -1.0;
  Eigen::VectorXd lambda(1);
  lambda << 0.5;
  // w_i = (1/2) / (1 + 0.5 m_i) = (1/3, 1)
  const Eigen::VectorXd w = compute_weights(lambda, m);
  CHECK(w[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(w[1] == doctest::Approx(1.0).epsilon(1e-14));

  // monotone in lambda: at 0.6 the first weight drops to 0.3125
  lambda << 0.6;
  const Eigen::VectorXd w2 = compute_weights(lambda, m);
  CHECK(w2[0] == doctest::Approx(0.3125).epsilon(1e-14));
  CHECK(w2[0] < w[0]);
}

TEST_CASE("nonpositive denominator is rejected") {
  Eigen::MatrixXd m(1, 2);
  m << 1.0, -1.0;
  Eigen::VectorXd lambda(1);
  lambda << 1.0;  // denominator at m = -1 hits zero
  CHECK_THROWS_AS(compute_weights(lambda, m), NonPositiveDenominator);
}

TEST_CASE("theta at the sample mean forces a zero multiplier") {
  Eigen::VectorXd z(5);
  z << 1.0, 2.0, 3.0, 4.0, 10.0;
  const ELState s = solve_mean_only(z, z.mean());
  REQUIRE(s.feasible);
  CHECK(s.lambda.lpNorm<Eigen::Infinity>() < 1e-9);
  for (int i = 0; i < 5; ++i)
    CHECK(s.weights[i] == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(s.log_el == doctest::Approx(-5.0 * std::log(5.0)).epsilon(1e-12));
}

TEST_CASE("frozen bisection case: z = (0,1,2), theta = 0.9") {
  Eigen::VectorXd z(3);
  z << 0.0, 1.0, 2.0;
  const ELState s = solve_mean_only(z, 0.9);
  REQUIRE(s.feasible);
  // values frozen from the scalar bisection oracle
  CHECK(s.lambda[0] == doctest::Approx(0.1511419411084914).epsilon(1e-6));
  CHECK(s.weights[0] == doctest::Approx(0.38581485941820366).epsilon(1e-6));
  CHECK(s.weights[1] == doctest::Approx(0.32837028116359268).epsilon(1e-6));
  CHECK(s.weights[2] == doctest::Approx(0.28581485941820366).epsilon(1e-6));
  CHECK(s.log_el == doctest::Approx(-3.3184220872122919).epsilon(1e-6));

  // the squared-objective verification mode agrees
  const ELState sq = solve_mean_only(z, 0.9, LambdaSolver::SquaredObjective);
  REQUIRE(sq.feasible);
  CHECK(sq.lambda[0] == doctest::Approx(s.lambda[0]).epsilon(1e-5));
  CHECK(sq.weights[0] == doctest::Approx(s.weights[0]).epsilon(1e-5));
}

TEST_CASE("zero residuals make the variance equation unsatisfiable") {
  Eigen::VectorXd z(4);
  z << 1.0, 2.0, 3.0, 4.0;
  EstimatingEquationSet eqs{EqFamily::GaussianFH, true};
  const Eigen::VectorXd sigma2 = Eigen::VectorXd::Ones(4);
  const ELState s = solve_lambda(eqs.residuals(z, z, sigma2));
  CHECK_FALSE(s.feasible);
  CHECK(log_el(s) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("oracle equivalence over random mean-only problems") {
  Rng rng(20260810u);
  int solved = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 5 + static_cast<int>(rng.uniform() * 45);
    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) z[i] = rng.normal(0.0, 2.0);
    // keep theta inside the sample range so a root exists
    const double lo = z.minCoeff(), hi = z.maxCoeff();
    const double theta = lo + (0.2 + 0.6 * rng.uniform()) * (hi - lo);

    const Eigen::VectorXd m = z.array() - theta;
    const auto oracle = testsup::bisect_lambda(m);
    REQUIRE(oracle.has_root);

    const ELState s = solve_mean_only(z, theta);
    REQUIRE(s.feasible);
    CHECK(std::abs(s.lambda[0] - oracle.lambda) < 1e-6);
    CHECK((s.weights - oracle.weights).lpNorm<Eigen::Infinity>() < 1e-6);
    CHECK(std::abs(s.log_el - oracle.log_el) < 1e-6);
    ++solved;
  }
  CHECK(solved == 100);
}

TEST_CASE("Eq.-4 reproduction and weight monotonicity") {
  Rng rng(77u);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 8 + static_cast<int>(rng.uniform() * 20);
    Eigen::VectorXd z(n), sigma2(n);
    for (int i = 0; i < n; ++i) {
      z[i] = rng.normal(1.0, 1.5);
      sigma2[i] = 0.5 + rng.uniform();
    }
    EstimatingEquationSet eqs{EqFamily::GaussianFH, true};
    const Eigen::VectorXd theta = Eigen::VectorXd::Constant(n, z.mean());
    const Eigen::MatrixXd m = eqs.residuals(z, theta, sigma2);
    const ELState s = solve_lambda(m);
    if (!s.feasible) continue;

    // recomputing weights from (lambda, residuals) reproduces the stored ones
    const Eigen::VectorXd w = compute_weights(s.lambda, m);
    CHECK((w - s.weights).lpNorm<Eigen::Infinity>() < 1e-12);

    // each w_i strictly monotone in each lambda_j over the admissible region
    const double h = 1e-7;
    for (int j = 0; j < eqs.J(); ++j) {
      Eigen::VectorXd lp = s.lambda, lm = s.lambda;
      lp[j] += h;
      lm[j] -= h;
      const Eigen::VectorXd wp = compute_weights(lp, m);
      const Eigen::VectorXd wm = compute_weights(lm, m);
      for (int i = 0; i < n; ++i) {
        if (std::abs(m(j, i)) < 1e-12) continue;
        CHECK((wp[i] - wm[i]) * (m(j, i) > 0 ? 1.0 : -1.0) < 0.0);
      }
    }
  }
}

TEST_CASE("profile EL peaks at the sample mean with value -n log n") {
  Rng rng(101u);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 5 + static_cast<int>(rng.uniform() * 45);
    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) z[i] = rng.normal(0.0, 1.0) + rng.uniform();
    const double zbar = z.mean();
    const ELState at_mean = solve_mean_only(z, zbar);
    REQUIRE(at_mean.feasible);
    CHECK(std::abs(at_mean.log_el + n * std::log(double(n))) < 1e-9);

    const double sd = std::sqrt((z.array() - zbar).square().sum() / n);
    for (int g = 0; g < 10; ++g) {
      const double theta = zbar + sd * (0.05 + 0.1 * g) * (g % 2 == 0 ? 1 : -1);
      const ELState s = solve_mean_only(z, theta);
      if (s.feasible) CHECK(s.log_el <= at_mean.log_el + 1e-10);
    }
  }
}

TEST_CASE("check_simplex boundary is strict") {
  // one equation with constraint value exactly eps must fail
  Eigen::MatrixXd m(1, 2);
  m << 5e-3, 5e-3;
  Eigen::VectorXd w(2);
  w << 0.5, 0.5;  // sum w = 1, constraint = 5e-3 exactly
  CHECK_FALSE(check_simplex(w, m, 5e-3));
  CHECK(check_simplex(w, m, 5.0001e-3));

  // a negative weight violates positivity regardless of the constraints
  Eigen::MatrixXd m0 = Eigen::MatrixXd::Zero(1, 2);
  Eigen::VectorXd wneg(2);
  wneg << 1.5, -0.5;
  CHECK_FALSE(check_simplex(wneg, m0, 5e-3));
}

TEST_CASE("solver preconditions") {
  Eigen::MatrixXd bad(1, 2);
  bad << 1.0, std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(solve_lambda(bad), NonFiniteResidual);

  Eigen::MatrixXd tiny(2, 2);  // n <= J
  tiny.setOnes();
  CHECK_THROWS_AS(solve_lambda(tiny), ValidationError);

  EstimatingEquationSet eqs{EqFamily::GaussianFH, false};
  Eigen::VectorXd z(3), theta(2);
  z << 1, 2, 3;
  theta << 1, 2;
  CHECK_THROWS_AS(eqs.residuals(z, theta), DimensionMismatch);
}

TEST_CASE("mele: intercept-only Gaussian profile peaks at the sample mean") {
  Rng rng(5u);
  const int n = 40;
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z[i] = rng.normal(2.0, 1.0);
  auto data = testsup::gaussian_dataset(z, Eigen::MatrixXd::Ones(n, 1),
                                        Eigen::VectorXd::Ones(n));
  // mean-only constraint: the profile EL maximizer is exactly z-bar
  EstimatingEquationSet eqs{EqFamily::GaussianFH, false};
  const Eigen::VectorXd beta = mele_fit(data, eqs);
  CHECK(beta[0] == doctest::Approx(z.mean()).epsilon(1e-5));
}

TEST_CASE("mele maximizes the profile EL near the WLS oracle") {
  // With two moment conditions and two coefficients the system is just
  // identified: whenever the raw moment system has a root the profile EL
  // attains its global bound -n log n there, and the optimizer must find a
  // point of that quality. Root existence is decided by an independent 1-d
  // bisection oracle on the mean-constraint line. Either way the returned
  // point is feasible and stays in the neighborhood of WLS (the slope is
  // only n^{1/4}-consistent, so only a loose proximity bound applies).
  Rng rng(31u);
  const int n = 200, reps = 40;
  EstimatingEquationSet eqs{EqFamily::GaussianFH, true};
  int roots_seen = 0;
  for (int r = 0; r < reps; ++r) {
    Eigen::VectorXd x(n), z(n), sigma2(n);
    for (int i = 0; i < n; ++i) {
      x[i] = rng.normal();
      sigma2[i] = 0.5 + rng.uniform();
      z[i] = 2.0 + 0.0 * x[i] + rng.normal(0.0, std::sqrt(sigma2[i]));
    }
    auto data =
        testsup::gaussian_dataset(z, testsup::design_with_intercept(x), sigma2);

    // oracle: on the line where the mean equation holds exactly,
    // h(b1) = (1/n) sum r_i^2 / sigma2_i - 1 has a root iff min h < 0
    auto h = [&](double b1) {
      const double b0 = z.mean() - b1 * x.mean();
      const Eigen::ArrayXd res = z.array() - b0 - b1 * x.array();
      return (res.square() / sigma2.array()).mean() - 1.0;
    };
    bool root_exists = false;
    double prev = h(-2.0);
    for (int g = 1; g <= 400 && !root_exists; ++g) {
      const double cur = h(-2.0 + g * 0.01);
      if ((prev < 0.0) != (cur < 0.0)) root_exists = true;
      prev = cur;
    }

    const Eigen::VectorXd beta = mele_fit(data, eqs);
    const ELState at_mele = solve_lambda(data, data.X * beta, eqs);
    REQUIRE(at_mele.feasible);  // guaranteed start
    if (root_exists) {
      ++roots_seen;
      CHECK(at_mele.log_el > -n * std::log(double(n)) - 1e-5);
    }
    const WlsFit wls_fit = wls_center(data, EqFamily::GaussianFH);
    CHECK((beta - wls_fit.beta).lpNorm<Eigen::Infinity>() < 0.75);
  }
  CHECK(roots_seen >= 10);  // the oracle bites on a fair share of replicates
}

TEST_CASE("mele reports the WLS fallback when nothing is feasible") {
  // ties z_i = theta_i for every candidate beta: variance equation cannot hold
  const int n = 6;
  Eigen::VectorXd z = Eigen::VectorXd::Constant(n, 3.0);
  auto data = testsup::gaussian_dataset(z, Eigen::MatrixXd::Ones(n, 1),
                                        Eigen::VectorXd::Ones(n));
  EstimatingEquationSet eqs{EqFamily::GaussianFH, true};
  CHECK_THROWS_AS(mele_fit(data, eqs), NoFeasibleStart);
}

}  // TEST_SUITE
