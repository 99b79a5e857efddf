#include "shel/mcmc.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "shel/error.hpp"

namespace shel {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void SamplerConfig::validate() const {
  if (n_iter <= 0 || n_burn < 0 || n_burn >= n_iter)
    throw ConfigError("need 0 <= burn_in < iterations");
  if (block_size < 1) throw ConfigError("block_size must be >= 1");
  if (pilot.iterations < 0) throw ConfigError("pilot iterations must be >= 0");
  if (feas_eps <= 0.0) throw ConfigError("feasibility epsilon must be positive");
}

LatentState initialize(const PosteriorModel& model) {
  Eigen::VectorXd beta;
  if (model.spec().comparator) {
    beta = model.wls_fit().beta;
  } else {
    beta = mele_fit(model.active_data(), model.spec().equations());
  }
  return model.make_state(std::move(beta));
}

Sampler::Sampler(const PosteriorModel& model, const SamplerConfig& cfg)
    : model_(model), cfg_(cfg), rng_(cfg.seed) {
  cfg_.validate();
  state_ = initialize(model_);

  const int p = model_.n_process();
  n_blocks_ = (p + cfg_.block_size - 1) / cfg_.block_size;
  y_blocks_.resize(n_blocks_);
  y_chol_.resize(n_blocks_);

  // per-coordinate prior sd at the initial hyperparameters
  Eigen::VectorXd prior_sd = Eigen::VectorXd::Ones(p);
  const Eigen::VectorXd h0 = model_.hyper_init();
  switch (model_.spec().process.kind) {
    case ProcessKind::MoranICAR:
      prior_sd = (h0[0] * model_.context().basis->Q_reduced.diagonal().array())
                     .rsqrt();
      break;
    case ProcessKind::ExpGP:
      prior_sd.setConstant(std::sqrt(h0[0]));
      break;
    case ProcessKind::Independence:
      prior_sd.setConstant(std::sqrt(h0[0]));
      break;
    case ProcessKind::None:
      break;
  }

  for (int b = 0; b < n_blocks_; ++b) {
    Block& blk = y_blocks_[b];
    blk.start = b * cfg_.block_size;
    blk.len = std::min(cfg_.block_size, p - blk.start);
    blk.stat = b;
    stats_.push_back({"y_block_" + std::to_string(b)});
    y_chol_[b] = (cfg_.scales.process *
                  prior_sd.segment(blk.start, blk.len))
                     .asDiagonal();
  }
  beta_stat_ = static_cast<int>(stats_.size());
  stats_.push_back({"beta"});
  beta_chol_ = (cfg_.scales.beta *
                model_.wls_fit().cov.diagonal().cwiseMax(1e-12).cwiseSqrt())
                   .asDiagonal();
  hyper_stat0_ = static_cast<int>(stats_.size());
  for (const auto& name : model_.hyper_names()) stats_.push_back({name});
  hyper_sd_.assign(model_.n_hyper(), cfg_.scales.hyper);

  refresh_cache();
}

void Sampler::refresh_cache() {
  data_ll_ = model_.data_loglik(state_);
  proc_lp_ = model_.process_logprior(state_);
  beta_lp_ = model_.beta_logprior(state_);
  hyper_lp_ = model_.hyper_logprior(state_);
}

void Sampler::set_state(const LatentState& s) {
  state_ = s;
  refresh_cache();
}

double Sampler::current_log_post() const {
  return data_ll_ + proc_lp_ + beta_lp_ + hyper_lp_;
}

void Sampler::set_y_proposal(int block, const Eigen::MatrixXd& cov) {
  y_chol_[block] = psd_sqrt(cov);
}

void Sampler::set_beta_proposal(const Eigen::MatrixXd& cov) {
  beta_chol_ = psd_sqrt(cov);
}

void Sampler::set_hyper_scale(int k, double sd) { hyper_sd_[k] = sd; }

void Sampler::reset_stats() {
  for (auto& s : stats_) {
    s.attempts = 0;
    s.accepts = 0;
  }
  feas_rejects_ = 0;
}

void Sampler::update_y_blocks() {
  for (int b = 0; b < n_blocks_; ++b) {
    const Block& blk = y_blocks_[b];
    auto& stat = stats_[blk.stat];
    ++stat.attempts;

    LatentState prop = state_;
    prop.process.segment(blk.start, blk.len) +=
        y_chol_[b] * rng_.normal_vector(blk.len);

    double ll;
    try {
      ll = model_.data_loglik(prop);
    } catch (const NumericError&) {
      ll = -kInf;
    }
    if (ll == -kInf) {  // outside the simplex: block keeps its previous values
      ++feas_rejects_;
      continue;
    }
    const double lp = model_.process_logprior(prop);
    const double log_ratio = (ll + lp) - (data_ll_ + proc_lp_);
    if (std::log(rng_.uniform()) < log_ratio) {
      state_ = std::move(prop);
      data_ll_ = ll;
      proc_lp_ = lp;
      ++stat.accepts;
    }
  }
}

void Sampler::update_beta() {
  auto& stat = stats_[beta_stat_];
  ++stat.attempts;

  LatentState prop = state_;
  prop.beta += beta_chol_ * rng_.normal_vector(prop.beta.size());

  double ll;
  try {
    ll = model_.data_loglik(prop);
  } catch (const NumericError&) {
    ll = -kInf;
  }
  if (ll == -kInf) {
    ++feas_rejects_;
    return;
  }
  const double bp = model_.beta_logprior(prop);
  const double log_ratio = (ll + bp) - (data_ll_ + beta_lp_);
  if (std::log(rng_.uniform()) < log_ratio) {
    state_ = std::move(prop);
    data_ll_ = ll;
    beta_lp_ = bp;
    ++stat.accepts;
  }
}

void Sampler::update_hyper() {
  for (int k = 0; k < model_.n_hyper(); ++k) {
    auto& stat = stats_[hyper_stat0_ + k];
    ++stat.attempts;

    const double v = state_.hyper[k];
    double v_new, log_jacobian;
    if (cfg_.log_scale_positive) {
      v_new = v * std::exp(hyper_sd_[k] * rng_.normal());
      log_jacobian = std::log(v_new) - std::log(v);
    } else {
      v_new = v + hyper_sd_[k] * rng_.normal();
      log_jacobian = 0.0;
    }

    LatentState prop = state_;
    prop.hyper[k] = v_new;
    const double hp = model_.hyper_logprior(prop);
    if (hp == -kInf) continue;  // outside the prior support
    const double pp = model_.process_logprior(prop);
    if (pp == -kInf) continue;
    const double bp = model_.beta_logprior(prop);

    const double log_ratio =
        (pp + bp + hp) - (proc_lp_ + beta_lp_ + hyper_lp_) + log_jacobian;
    if (std::log(rng_.uniform()) < log_ratio) {
      state_ = std::move(prop);
      proc_lp_ = pp;
      beta_lp_ = bp;
      hyper_lp_ = hp;
      ++stat.accepts;
    }
  }
}

void Sampler::sweep() {
  if (model_.n_process() > 0) update_y_blocks();
  update_beta();
  if (model_.n_hyper() > 0) update_hyper();
}

Eigen::VectorXd Sampler::record_row() const {
  const int m = model_.n_beta(), h = model_.n_hyper(), p = model_.n_process();
  Eigen::VectorXd row(m + h + p);
  row.head(m) = state_.beta;
  row.segment(m, h) = state_.hyper;
  row.tail(p) = state_.process;
  return row;
}

void Sampler::tune_from_pilot(const Eigen::MatrixXd& pilot) {
  const Eigen::MatrixXd centered = pilot.rowwise() - pilot.colwise().mean();
  const Eigen::MatrixXd cov =
      centered.transpose() * centered / std::max<int>(1, pilot.rows() - 1);
  const int m = model_.n_beta(), h = model_.n_hyper();

  auto inflation = [&](int d) {
    return cfg_.pilot.inflation > 0.0 ? cfg_.pilot.inflation : 5.6644 / d;  // 2.38^2
  };

  Eigen::MatrixXd beta_cov = cov.block(0, 0, m, m);
  if (beta_cov.trace() > 1e-12 && beta_cov.allFinite())
    beta_chol_ = psd_sqrt(inflation(m) * beta_cov +
                          1e-12 * Eigen::MatrixXd::Identity(m, m));

  for (int k = 0; k < h; ++k) {
    const double var = cov(m + k, m + k);
    if (var > 1e-12 && std::isfinite(var))
      hyper_sd_[k] = std::sqrt(inflation(1) * var);
  }

  for (int b = 0; b < n_blocks_; ++b) {
    const Block& blk = y_blocks_[b];
    Eigen::MatrixXd c = cov.block(m + h + blk.start, m + h + blk.start,
                                  blk.len, blk.len);
    if (c.trace() > 1e-12 && c.allFinite())
      y_chol_[b] = psd_sqrt(inflation(blk.len) * c +
                            1e-12 * Eigen::MatrixXd::Identity(blk.len, blk.len));
  }
}

ChainOutput Sampler::run() {
  if (data_ll_ == -kInf)
    throw NoFeasibleStart(state_.beta, "initial state is infeasible");

  const int m = model_.n_beta(), h = model_.n_hyper(), p = model_.n_process();
  const int dim = m + h + p;

  if (cfg_.pilot.enabled && cfg_.pilot.iterations > 0) {
    Eigen::MatrixXd pilot(cfg_.pilot.iterations, dim);
    for (int it = 0; it < cfg_.pilot.iterations; ++it) {
      sweep();
      Eigen::VectorXd row = record_row();
      if (cfg_.log_scale_positive)
        for (int k = 0; k < h; ++k) row[m + k] = std::log(row[m + k]);
      pilot.row(it) = row;
    }
    tune_from_pilot(pilot);
    reset_stats();
  }

  ChainOutput out;
  const auto& cov_names = model_.data().covariate_names;
  for (int j = 0; j < m; ++j)
    out.names.push_back("beta_" + (static_cast<int>(cov_names.size()) == m
                                       ? cov_names[j]
                                       : std::to_string(j)));
  for (const auto& name : model_.hyper_names()) out.names.push_back(name);
  const bool reduced = model_.spec().process.kind == ProcessKind::MoranICAR;
  for (int j = 0; j < p; ++j)
    out.names.push_back((reduced ? "ystar_" : "y_") + std::to_string(j));

  const long n_keep = cfg_.n_iter - cfg_.n_burn;
  out.samples.resize(n_keep, dim);
  out.log_post.resize(n_keep);
  out.theta_mean = Eigen::VectorXd::Zero(model_.n());
  if (cfg_.verify_feasibility) out.verified_feasible = 0;

  long kept = 0;
  for (int it = 0; it < cfg_.n_iter; ++it) {
    sweep();
    if (it < cfg_.n_burn) continue;
    const double lp = current_log_post();
    if (std::isnan(lp)) {
      out.diverged = true;
      break;
    }
    out.samples.row(kept) = record_row();
    out.log_post[kept] = lp;
    out.theta_mean += model_.build_theta(state_);
    if (cfg_.verify_feasibility && !model_.spec().comparator) {
      const ELState s = model_.el_state(state_);
      if (s.feasible) ++out.verified_feasible;
    }
    ++kept;
  }
  if (kept < n_keep) {
    out.samples.conservativeResize(kept, dim);
    out.log_post.conservativeResize(kept);
  }
  if (kept > 0) out.theta_mean /= static_cast<double>(kept);
  out.blocks = stats_;
  out.feasibility_rejects = feas_rejects_;
  return out;
}

ChainOutput run_chain(const PosteriorModel& model, const SamplerConfig& cfg) {
  Sampler sampler(model, cfg);
  return sampler.run();
}

std::vector<SummaryRow> posterior_summary(const ChainOutput& chain) {
  if (chain.kept() == 0) throw EmptyChain("no stored samples to summarize");
  std::vector<SummaryRow> rows;
  rows.reserve(chain.names.size());
  for (size_t j = 0; j < chain.names.size(); ++j) {
    const auto col = chain.samples.col(static_cast<Eigen::Index>(j));
    std::vector<double> x(col.data(), col.data() + col.size());
    SummaryRow r;
    r.name = chain.names[j];
    r.median = quantile(x, 0.5);
    r.lo = quantile(x, 0.025);
    r.hi = quantile(x, 0.975);
    rows.push_back(std::move(r));
  }
  return rows;
}

Eigen::VectorXd theta_trace_at(const ChainOutput& chain, const PosteriorModel& model,
                               int location) {
  const int m = model.n_beta(), h = model.n_hyper(), p = model.n_process();
  const long kept = chain.kept();
  Eigen::VectorXd trace(kept);

  double off = model.data().has_offset() ? model.data().offset[location] : 0.0;
  Eigen::RowVectorXd xi = model.data().X.row(location);
  Eigen::RowVectorXd mi;
  if (model.spec().process.kind == ProcessKind::MoranICAR)
    mi = model.context().basis->M.row(location);

  for (long s = 0; s < kept; ++s) {
    double eta = off + xi.dot(chain.samples.row(s).head(m));
    if (p > 0) {
      if (model.spec().process.kind == ProcessKind::MoranICAR)
        eta += mi.dot(chain.samples.row(s).tail(p));
      else
        eta += chain.samples(s, m + h + location);
    }
    trace[s] = (model.spec().link == LinkKind::Log) ? std::exp(eta) : eta;
  }
  return trace;
}

}  // namespace shel
