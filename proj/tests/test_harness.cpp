#include "shel/harness.hpp"

#include <cmath>

#include "doctest.h"
#include "shel/error.hpp"
#include "support.hpp"

using namespace shel;

namespace {

ModelSpec fh_moran_spec() {
  ModelSpec spec;
  spec.name = "shel_fh";
  spec.family = EqFamily::GaussianFH;
  spec.link = LinkKind::Identity;
  spec.process.kind = ProcessKind::MoranICAR;
  spec.beta_prior = {BetaPrior::Kind::ZellnerG, 10.0, 100.0};
  return spec;
}

ObservedDataset fh_template(int rows, int cols, uint64_t seed) {
  Rng rng(seed);
  const int n = rows * cols;
  Eigen::VectorXd x(n), sigma2(n);
  for (int i = 0; i < n; ++i) {
    x[i] = rng.normal();
    sigma2[i] = 0.4 + 0.3 * rng.uniform();
  }
  ObservedDataset ds = testsup::gaussian_dataset(
      Eigen::VectorXd::Zero(n), testsup::design_with_intercept(x), sigma2);
  ds.graph = testsup::grid_graph(rows, cols);
  return ds;
}

SamplerConfig quick_config(int iters = 500, int burn = 100) {
  SamplerConfig cfg;
  cfg.n_iter = iters;
  cfg.n_burn = burn;
  cfg.pilot.iterations = 200;
  return cfg;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("EL generator: degenerate residuals reproduce theta exactly") {
  const int n = 10;
  const Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 0.1);
  const Eigen::VectorXd theta_ref = Eigen::VectorXd::LinSpaced(n, 1.0, 2.0);
  Eigen::VectorXd new_theta = Eigen::VectorXd::Constant(n, 5.0);
  Rng rng(1u);
  const Eigen::VectorXd z =
      generate_from_el(w, theta_ref, theta_ref, new_theta, LinkKind::Identity, rng);
  CHECK((z - new_theta).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("EL generator: uniform weights equal a plain residual bootstrap") {
  const int n = 6;
  Eigen::VectorXd ref_z(n), ref_theta(n);
  Rng gen(3u);
  for (int i = 0; i < n; ++i) {
    ref_theta[i] = 1.0 + 0.1 * i;
    ref_z[i] = ref_theta[i] + gen.normal();
  }
  const Eigen::VectorXd pool = ref_z - ref_theta;
  const Eigen::VectorXd new_theta = Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / n);
  Rng rng(9u);
  const Eigen::VectorXd z =
      generate_from_el(w, ref_z, ref_theta, new_theta, LinkKind::Identity, rng);
  // every draw must be one of the pooled residuals
  for (int i = 0; i < n; ++i) {
    bool found = false;
    for (int j = 0; j < n; ++j)
      if (z[i] == pool[j]) found = true;
    CHECK(found);
  }
}

TEST_CASE("EL generator: weighted mean residual vanishes in expectation") {
  // reference weights come from a feasible EL solve, so sum w_i e_i = 0 up to
  // the feasibility tolerance; the generator must reproduce that mean
  Rng gen(12u);
  const int n = 25;
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z[i] = gen.normal(1.0, 1.0);
  const Eigen::VectorXd theta = Eigen::VectorXd::Constant(n, z.mean() + 0.2);
  EstimatingEquationSet eqs{EqFamily::GaussianFH, false};
  const ELState el = solve_lambda(eqs.residuals(z, theta), {});
  REQUIRE(el.feasible);

  Rng rng(77u);
  const int draws = 10000;
  const Eigen::VectorXd pool = z - theta;
  double sum = 0.0, sum2 = 0.0;
  for (int d = 0; d < draws; ++d) {
    const double e = pool[weighted_index(el.weights, rng)];
    sum += e;
    sum2 += e * e;
  }
  const double mean = sum / draws;
  const double sd = std::sqrt(sum2 / draws - mean * mean);
  CHECK(std::abs(mean) < 3.0 * sd / std::sqrt(double(draws)) + 5e-3);
}

TEST_CASE("EL generator rejects off-simplex references") {
  const int n = 5;
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 0.3);  // sums to 1.5
  const Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
  Rng rng(2u);
  CHECK_THROWS_AS(generate_from_el(w, v, v, v, LinkKind::Identity, rng),
                  InfeasibleReference);
}

TEST_CASE("parametric generator: lattice Gaussian has the right moments") {
  ObservedDataset ds = fh_template(4, 5, 5u);
  const ModelSpec spec = fh_moran_spec();
  const SpatialContext ctx = make_context(spec, ds);
  GenTruth truth;
  truth.beta = Eigen::VectorXd::Zero(2);
  truth.beta[0] = 2.0;
  truth.tau = 4.0;

  Rng rng(8u);
  const int reps = 400;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(ds.n());
  for (int r = 0; r < reps; ++r)
    acc += generate_parametric(spec, ds, ctx, truth, rng);
  acc /= reps;
  // process and noise are mean zero, so E z = X beta
  const Eigen::VectorXd expect = ds.X * truth.beta;
  CHECK((acc - expect).lpNorm<Eigen::Infinity>() < 0.5);
}

TEST_CASE("loo: saturated comparator with negligible noise has MSPE ~ 0") {
  const int n = 8;
  Eigen::VectorXd z = Eigen::VectorXd::Constant(n, 4.0);
  ObservedDataset ds = testsup::gaussian_dataset(
      z, Eigen::MatrixXd::Ones(n, 1), Eigen::VectorXd::Constant(n, 1e-6));
  ModelSpec spec;
  spec.name = "comparator";
  spec.family = EqFamily::GaussianFH;
  spec.comparator = true;
  spec.process.kind = ProcessKind::None;
  spec.beta_prior = {BetaPrior::Kind::NormalSd, 10.0, 100.0};

  const auto report =
      loo_mspe(ds, {{"comparator", spec}}, quick_config(), 99u, 1);
  REQUIRE(report.complete);
  CHECK(report.mspe[0] < 1e-6);
}

TEST_CASE("loo: fold order does not matter and folds subset is honored") {
  ObservedDataset ds = fh_template(3, 4, 21u);
  Rng rng(4u);
  for (int i = 0; i < ds.n(); ++i) ds.z[i] = 2.0 + rng.normal();
  std::vector<ModelEntry> roster{{"shel", fh_moran_spec()}};

  const auto a = loo_mspe(ds, roster, quick_config(), 7u, 1, {0, 1, 5});
  const auto b = loo_mspe(ds, roster, quick_config(), 7u, 1, {5, 0, 1});
  REQUIRE(a.folds.size() == 3);
  for (int i = 0; i < 3; ++i) {
    const int fold = a.folds[i];
    for (size_t j = 0; j < b.folds.size(); ++j)
      if (b.folds[j] == fold)
        CHECK(a.pred(i, 0) ==
              b.pred(static_cast<Eigen::Index>(j), 0));
  }
}

TEST_CASE("loo: identical specs in the roster give identical columns") {
  ObservedDataset ds = fh_template(3, 4, 22u);
  Rng rng(5u);
  for (int i = 0; i < ds.n(); ++i) ds.z[i] = 2.0 + rng.normal();
  ModelSpec spec = fh_moran_spec();
  std::vector<ModelEntry> roster{{"a", spec}, {"b", spec}};
  const auto report = loo_mspe(ds, roster, quick_config(), 13u, 1, {0, 3, 7});
  REQUIRE(report.complete);
  CHECK(report.mspe[0] == report.mspe[1]);
  CHECK(report.sq_dev.col(0) == report.sq_dev.col(1));
}

TEST_CASE("loo: threads do not change results") {
  ObservedDataset ds = fh_template(3, 4, 23u);
  Rng rng(6u);
  for (int i = 0; i < ds.n(); ++i) ds.z[i] = 2.0 + rng.normal();
  std::vector<ModelEntry> roster{{"shel", fh_moran_spec()}};
  const auto a = loo_mspe(ds, roster, quick_config(), 3u, 1, {0, 1, 2, 3});
  const auto b = loo_mspe(ds, roster, quick_config(), 3u, 3, {0, 1, 2, 3});
  CHECK(a.sq_dev == b.sq_dev);
}

TEST_CASE("loo: MSPE recomputes exactly from the stored deviations") {
  ObservedDataset ds = fh_template(3, 4, 24u);
  Rng rng(7u);
  for (int i = 0; i < ds.n(); ++i) ds.z[i] = 2.0 + rng.normal();
  std::vector<ModelEntry> roster{{"shel", fh_moran_spec()}};
  const auto report = loo_mspe(ds, roster, quick_config(), 31u, 1);
  REQUIRE(report.complete);
  const double recomputed = report.sq_dev.col(0).sum() / ds.n();
  CHECK(std::abs(recomputed - report.mspe[0]) < 1e-12);
}

TEST_CASE("run_study: single replicate, single model reduces to one report") {
  ExperimentPlan plan;
  plan.generator = GeneratorKind::Parametric;
  plan.n_replicates = 1;
  plan.base = fh_template(3, 4, 30u);
  plan.roster = {{"shel", fh_moran_spec()}};
  plan.sampler = quick_config();
  plan.calibration = quick_config();
  plan.truth.beta = Eigen::VectorXd::Zero(2);
  plan.truth.beta[0] = 2.0;
  plan.truth.tau = 4.0;
  plan.master_seed = 51u;

  const Scoreboard board = run_study(plan);
  REQUIRE(board.complete);
  CHECK(board.mspe.rows() == 1);
  CHECK(board.mspe.cols() == 1);
  CHECK(board.mean_mspe[0] == board.mspe(0, 0));
  CHECK(board.reductions.empty());

  // reproducibility: an identical plan gives identical numbers
  const Scoreboard again = run_study(plan);
  CHECK(board.mspe == again.mspe);
}

TEST_CASE("run_study: EL generator round trip at desk scale") {
  ExperimentPlan plan;
  plan.generator = GeneratorKind::FromELWeights;
  plan.synthesize_base = true;
  plan.n_replicates = 2;
  plan.base = fh_template(3, 4, 31u);
  plan.roster = {{"shel", fh_moran_spec()}};
  plan.sampler = quick_config(400, 100);
  plan.calibration = quick_config(400, 100);
  plan.truth.beta = Eigen::VectorXd::Zero(2);
  plan.truth.beta[0] = 2.0;
  plan.truth.tau = 4.0;
  plan.master_seed = 61u;

  const Scoreboard board = run_study(plan);
  REQUIRE(board.complete);
  CHECK(board.mspe.rows() == 2);
  CHECK((board.mspe.array() > 0.0).all());
  CHECK(std::isfinite(board.mean_mspe[0]));
}

}  // TEST_SUITE
