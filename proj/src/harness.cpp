#include "shel/harness.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "shel/error.hpp"

namespace shel {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

Eigen::VectorXd truth_hyper(const ModelSpec& spec, const GenTruth& truth) {
  switch (spec.process.kind) {
    case ProcessKind::MoranICAR: {
      if (truth.tau <= 0.0) throw ConfigError("truth.tau must be positive");
      Eigen::VectorXd h(1);
      h[0] = truth.tau;
      return h;
    }
    case ProcessKind::ExpGP: {
      if (truth.sigma2_y <= 0.0 || truth.phi <= 0.0)
        throw ConfigError("truth.sigma2_y and truth.phi must be positive");
      Eigen::VectorXd h(2);
      h << truth.sigma2_y, truth.phi;
      return h;
    }
    case ProcessKind::Independence: {
      if (truth.a <= 0.0) throw ConfigError("truth.a must be positive");
      Eigen::VectorXd h(1);
      h[0] = truth.a;
      return h;
    }
    case ProcessKind::None:
      return {};
  }
  return {};
}

Eigen::VectorXd draw_process(const ModelSpec& spec, const SpatialContext& ctx,
                             const Eigen::VectorXd& hyper, Rng& rng) {
  switch (spec.process.kind) {
    case ProcessKind::MoranICAR: {
      // y* ~ N(0, (tau M'QM)^{-1}): solve L' x = zeta / sqrt(tau)
      const SpatialBasis& b = *ctx.basis;
      const Eigen::VectorXd zeta = rng.normal_vector(b.q());
      return b.Qr_chol.transpose().triangularView<Eigen::Upper>().solve(zeta) /
             std::sqrt(hyper[0]);
    }
    case ProcessKind::ExpGP: {
      const Eigen::MatrixXd S = exp_covariance_from_dist(ctx.dist, hyper[0], hyper[1]);
      Eigen::LLT<Eigen::MatrixXd> llt(S);
      if (llt.info() != Eigen::Success)
        throw NumericError("GP covariance failed to factorize while generating");
      return Eigen::MatrixXd(llt.matrixL()) * rng.normal_vector(ctx.n);
    }
    case ProcessKind::Independence:
      return std::sqrt(hyper[0]) * rng.normal_vector(ctx.n);
    case ProcessKind::None:
      return {};
  }
  return {};
}

Eigen::VectorXd build_theta_from(const ModelSpec& spec, const ObservedDataset& data,
                                 const SpatialContext& ctx, const Eigen::VectorXd& beta,
                                 const Eigen::VectorXd& process) {
  Eigen::VectorXd eta = data.X * beta;
  if (data.has_offset()) eta += data.offset;
  if (spec.process.kind == ProcessKind::MoranICAR)
    eta.noalias() += ctx.basis->M * process;
  else if (spec.process.kind != ProcessKind::None)
    eta += process;
  if (spec.link == LinkKind::Log) {
    if ((eta.array() > 700.0).any())
      throw OverflowError("log-link exponent exceeds 700 while generating");
    return eta.array().exp();
  }
  return eta;
}

Eigen::VectorXd generate_from_el(const Eigen::VectorXd& ref_weights,
                                 const Eigen::VectorXd& ref_z,
                                 const Eigen::VectorXd& ref_theta,
                                 const Eigen::VectorXd& new_theta, LinkKind link,
                                 Rng& rng) {
  const Eigen::Index n = new_theta.size();
  if (ref_weights.size() != ref_z.size() || ref_z.size() != ref_theta.size())
    throw DimensionMismatch("reference vectors have inconsistent lengths");
  if ((ref_weights.array() <= 0.0).any() ||
      std::abs(ref_weights.sum() - 1.0) >= 5e-3)
    throw InfeasibleReference("reference weights are not on the simplex");

  Eigen::VectorXd z(n);
  if (link == LinkKind::Identity) {
    const Eigen::VectorXd pool = ref_z - ref_theta;
    for (Eigen::Index i = 0; i < n; ++i)
      z[i] = new_theta[i] + pool[weighted_index(ref_weights, rng)];
  } else {
    if ((ref_theta.array() <= 0.0).any())
      throw InfeasibleReference("log-link reference theta must be positive");
    const Eigen::VectorXd pool = ref_z.cwiseQuotient(ref_theta);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double rate = new_theta[i] * pool[weighted_index(ref_weights, rng)];
      z[i] = rate > 0.0 ? static_cast<double>(rng.poisson(rate)) : 0.0;
    }
  }
  return z;
}

Eigen::VectorXd generate_parametric(const ModelSpec& spec, const ObservedDataset& data,
                                    const SpatialContext& ctx, const GenTruth& truth,
                                    Rng& rng) {
  const Eigen::VectorXd hyper = truth_hyper(spec, truth);
  const Eigen::VectorXd y = draw_process(spec, ctx, hyper, rng);
  const Eigen::VectorXd theta = build_theta_from(spec, data, ctx, truth.beta, y);

  Eigen::VectorXd z(theta.size());
  if (spec.link == LinkKind::Identity) {
    if (!data.has_sigma2())
      throw ValidationError("identity-link generation needs sigma2 in the template");
    for (Eigen::Index i = 0; i < z.size(); ++i)
      z[i] = theta[i] + rng.normal(0.0, std::sqrt(data.sigma2[i]));
  } else {
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      double rate = theta[i];
      if (truth.overdispersion > 0.0) {
        const double shape = 1.0 / truth.overdispersion;
        rate *= rng.gamma(shape, shape);  // mean 1, variance = overdispersion
      }
      z[i] = rate > 0.0 ? static_cast<double>(rng.poisson(rate)) : 0.0;
    }
  }
  return z;
}

MSPEReport loo_mspe(const ObservedDataset& data, const std::vector<ModelEntry>& roster,
                    const SamplerConfig& sampler, uint64_t seed_base, int threads,
                    const std::vector<int>& folds, bool predict_median) {
  if (roster.empty()) throw EmptyRoster("leave-one-out needs at least one model");
  const int n = data.n();
  if (n < 3) throw ValidationError("leave-one-out needs n >= 3");
  std::vector<int> fold_ids = folds.empty() ? all_indices(n) : folds;
  for (int f : fold_ids)
    if (f < 0 || f >= n)
      throw ConfigError("fold id " + std::to_string(f) + " out of range");

  const int n_models = static_cast<int>(roster.size());
  const int n_folds = static_cast<int>(fold_ids.size());

  // spatial quantities do not depend on the held-out observation
  std::vector<SpatialContext> contexts;
  contexts.reserve(roster.size());
  for (const auto& entry : roster) contexts.push_back(make_context(entry.spec, data));

  MSPEReport report;
  for (const auto& entry : roster) report.model_names.push_back(entry.name);
  report.folds = fold_ids;
  report.pred.setConstant(n_folds, n_models, kNaN);
  report.sq_dev.setConstant(n_folds, n_models, kNaN);
  report.failed_folds.resize(n_models);

  std::vector<std::string> errors(static_cast<size_t>(n_folds) * n_models);
  parallel_for(n_folds * n_models, threads, [&](int task) {
    const int fi = task / n_models;
    const int mi = task % n_models;
    const int fold = fold_ids[fi];
    try {
      PosteriorModel pm(roster[mi].spec, data, contexts[mi],
                        indices_without(n, fold), sampler.feas_eps);
      SamplerConfig cfg = sampler;
      cfg.seed = derive_seed(seed_base, {model_seed_key(roster[mi].spec),
                                         static_cast<uint64_t>(fold)});
      const ChainOutput chain = run_chain(pm, cfg);
      if (chain.diverged || chain.kept() == 0)
        throw ChainDiverged("chain diverged on fold " + std::to_string(fold));
      const Eigen::VectorXd trace = theta_trace_at(chain, pm, fold);
      double pred;
      if (predict_median) {
        std::vector<double> x(trace.data(), trace.data() + trace.size());
        pred = quantile(std::move(x), 0.5);
      } else {
        pred = trace.mean();
      }
      report.pred(fi, mi) = pred;
      const double dev = data.z[fold] - pred;
      report.sq_dev(fi, mi) = dev * dev;
    } catch (const std::exception& e) {
      errors[static_cast<size_t>(task)] = e.what();
    }
  });

  report.mspe.assign(n_models, 0.0);
  for (int mi = 0; mi < n_models; ++mi) {
    bool ok = true;
    double sum = 0.0;
    for (int fi = 0; fi < n_folds; ++fi) {
      if (std::isnan(report.sq_dev(fi, mi))) {
        report.failed_folds[mi].push_back(fold_ids[fi]);
        ok = false;
      } else {
        sum += report.sq_dev(fi, mi);
      }
    }
    report.mspe[mi] = ok ? sum / n_folds : kNaN;
    if (!ok) report.complete = false;
  }
  return report;
}

StudyData generate_study_datasets(const ExperimentPlan& plan) {
  if (plan.roster.empty()) throw EmptyRoster("study roster is empty");
  if (plan.generator_model < 0 ||
      plan.generator_model >= static_cast<int>(plan.roster.size()))
    throw ConfigError("generator_model index out of range");
  if (plan.n_replicates < 1) throw ConfigError("need at least one replicate");

  const ModelSpec& gen_spec = plan.roster[plan.generator_model].spec;
  StudyData data;
  data.base = plan.base;
  ObservedDataset& base = data.base;
  const SpatialContext gen_ctx = make_context(gen_spec, base);

  if (plan.synthesize_base) {
    Rng rng(derive_seed(plan.master_seed, {0xBA5Eu}));
    base.z = generate_parametric(gen_spec, base, gen_ctx, plan.truth, rng);
  }

  // reference constants for the EL generator: one calibration fit on the base
  Eigen::VectorXd ref_w, ref_theta, ref_hyper, ref_beta;
  if (plan.generator == GeneratorKind::FromELWeights) {
    PosteriorModel pm(gen_spec, base, gen_ctx, {}, plan.calibration.feas_eps);
    SamplerConfig cal = plan.calibration;
    cal.seed = derive_seed(plan.master_seed, {0xCA11Bu});
    const ChainOutput chain = run_chain(pm, cal);
    if (chain.diverged || chain.kept() == 0)
      throw ChainDiverged("calibration chain diverged");
    const Eigen::VectorXd mean = chain.samples.colwise().mean();
    const int m = pm.n_beta(), h = pm.n_hyper();
    ref_beta = mean.head(m);
    ref_hyper = mean.segment(m, h);
    const Eigen::VectorXd y_mean = mean.tail(pm.n_process());
    ref_theta = build_theta_from(gen_spec, base, gen_ctx, ref_beta, y_mean);
    LatentState ref_state;
    ref_state.beta = ref_beta;
    ref_state.process = y_mean;
    ref_state.hyper = ref_hyper;
    const ELState el = pm.el_state(ref_state);
    if (!el.feasible)
      throw InfeasibleReference(
          "EL at the posterior-mean parameters is infeasible; cannot generate");
    ref_w = el.weights;
  } else {
    ref_beta = plan.truth.beta;
    ref_hyper = truth_hyper(gen_spec, plan.truth);
  }

  // replicate datasets, generated sequentially for reproducibility
  data.replicates.assign(plan.n_replicates, base);
  for (int r = 0; r < plan.n_replicates; ++r) {
    Rng rng(derive_seed(plan.master_seed, {1u, static_cast<uint64_t>(r)}));
    if (plan.generator == GeneratorKind::FromELWeights) {
      const Eigen::VectorXd y_new = draw_process(gen_spec, gen_ctx, ref_hyper, rng);
      const Eigen::VectorXd theta_new =
          build_theta_from(gen_spec, base, gen_ctx, ref_beta, y_new);
      data.replicates[r].z =
          generate_from_el(ref_w, base.z, ref_theta, theta_new, gen_spec.link, rng);
    } else {
      data.replicates[r].z =
          generate_parametric(gen_spec, base, gen_ctx, plan.truth, rng);
    }
  }
  return data;
}

Scoreboard run_study(const ExperimentPlan& plan) {
  const StudyData data = generate_study_datasets(plan);
  const std::vector<ObservedDataset>& replicates = data.replicates;

  Scoreboard board;
  for (const auto& entry : plan.roster) board.model_names.push_back(entry.name);
  board.mspe.resize(plan.n_replicates, static_cast<Eigen::Index>(plan.roster.size()));
  for (int r = 0; r < plan.n_replicates; ++r) {
    const MSPEReport rep = loo_mspe(
        replicates[r], plan.roster, plan.sampler,
        derive_seed(plan.master_seed, {2u, static_cast<uint64_t>(r)}), plan.threads,
        {}, plan.predict_median);
    if (!rep.complete) board.complete = false;
    for (size_t mi = 0; mi < plan.roster.size(); ++mi)
      board.mspe(r, static_cast<Eigen::Index>(mi)) = rep.mspe[mi];
  }

  board.mean_mspe.resize(plan.roster.size());
  for (size_t mi = 0; mi < plan.roster.size(); ++mi)
    board.mean_mspe[mi] = board.mspe.col(static_cast<Eigen::Index>(mi)).mean();

  for (size_t i = 0; i < plan.roster.size(); ++i)
    for (size_t j = 0; j < plan.roster.size(); ++j) {
      if (i == j) continue;
      const double pct =
          100.0 * (board.mean_mspe[j] - board.mean_mspe[i]) / board.mean_mspe[j];
      board.reductions.emplace_back(
          plan.roster[i].name + "_vs_" + plan.roster[j].name, pct);
    }
  return board;
}

}  // namespace shel
