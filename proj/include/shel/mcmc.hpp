#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "shel/model.hpp"
#include "shel/numerics.hpp"

namespace shel {

struct PilotConfig {
  bool enabled = true;
  int iterations = 2000;
  double inflation = 0.0;  // 0 -> 2.38^2 / block dimension
};

// Pre-pilot proposal scales; the pilot replaces them with inflated empirical
// covariances.
struct ProposalScales {
  double process = 0.5;  // multiple of the prior sd per coordinate
  double beta = 0.5;     // multiple of the WLS standard errors
  double hyper = 0.4;    // random-walk sd (log scale by default)
};

struct SamplerConfig {
  int n_iter = 11000;
  int n_burn = 1000;
  int block_size = 15;
  PilotConfig pilot;
  uint64_t seed = 1;
  ProposalScales scales;
  // random walk on log scale for strictly positive hyperparameters, with the
  // Jacobian in the ratio; false replicates the plain random walk
  bool log_scale_positive = true;
  bool verify_feasibility = false;
  double feas_eps = 5e-3;

  void validate() const;
};

struct AcceptStat {
  std::string name;
  long attempts = 0;
  long accepts = 0;
  double rate() const { return attempts > 0 ? double(accepts) / double(attempts) : 0.0; }
};

struct ChainOutput {
  std::vector<std::string> names;  // beta..., hyper..., process...
  Eigen::MatrixXd samples;         // kept x dim(names)
  Eigen::VectorXd log_post;        // kept
  std::vector<AcceptStat> blocks;
  long feasibility_rejects = 0;    // simplex-failure auto-rejects (main run)
  long verified_feasible = -1;     // recorded states passing the simplex check
  bool diverged = false;           // log posterior became NaN; samples truncated
  Eigen::VectorXd theta_mean;      // mean of theta over the kept draws

  long kept() const { return samples.rows(); }
};

struct SummaryRow {
  std::string name;
  double median = 0.0, lo = 0.0, hi = 0.0;  // 2.5% / 97.5%
};

// Central quantiles by linear interpolation on each stored column.
std::vector<SummaryRow> posterior_summary(const ChainOutput& chain);

// beta = MELE (WLS for comparator specs), process = 0, hyperparameters at
// their prior medians. Feasible by construction for EL specs.
LatentState initialize(const PosteriorModel& model);

// ---------------------------------------------------------------------------
// Metropolis-Hastings within Gibbs: blocked random-walk updates of the
// process, a joint beta update, then scalar hyperparameter updates. Simplex
// failures leave the block at its previous value and are counted separately.
// ---------------------------------------------------------------------------

class Sampler {
 public:
  Sampler(const PosteriorModel& model, const SamplerConfig& cfg);

  const LatentState& state() const { return state_; }
  void set_state(const LatentState& s);

  void update_y_blocks();
  void update_beta();
  void update_hyper();
  void sweep();

  ChainOutput run();

  const std::vector<AcceptStat>& stats() const { return stats_; }
  long feasibility_rejects() const { return feas_rejects_; }
  double current_log_post() const;

  // proposal overrides (tests and external tuning)
  void set_y_proposal(int block, const Eigen::MatrixXd& cov);
  void set_beta_proposal(const Eigen::MatrixXd& cov);
  void set_hyper_scale(int k, double sd);

  int n_y_blocks() const { return n_blocks_; }

 private:
  struct Block {
    int start = 0, len = 0, stat = 0;
  };

  void refresh_cache();
  void reset_stats();
  void tune_from_pilot(const Eigen::MatrixXd& pilot);
  Eigen::VectorXd record_row() const;

  const PosteriorModel& model_;
  SamplerConfig cfg_;
  Rng rng_;
  LatentState state_;

  double data_ll_ = 0.0, proc_lp_ = 0.0, beta_lp_ = 0.0, hyper_lp_ = 0.0;

  int n_blocks_ = 0;
  std::vector<Block> y_blocks_;
  std::vector<Eigen::MatrixXd> y_chol_;
  Eigen::MatrixXd beta_chol_;
  std::vector<double> hyper_sd_;
  int beta_stat_ = 0, hyper_stat0_ = 0;

  std::vector<AcceptStat> stats_;
  long feas_rejects_ = 0;
};

ChainOutput run_chain(const PosteriorModel& model, const SamplerConfig& cfg);

// theta_i over the kept draws, reconstructed from the stored samples.
Eigen::VectorXd theta_trace_at(const ChainOutput& chain, const PosteriorModel& model,
                               int location);

}  // namespace shel
