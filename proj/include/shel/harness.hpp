#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "shel/mcmc.hpp"
#include "shel/model.hpp"

namespace shel {

enum class GeneratorKind { Parametric, FromELWeights };

// Generating-process constants: beta plus the process hyperparameter for the
// chosen prior. overdispersion > 0 mixes the count rate with a mean-one
// gamma multiplier of that variance.
struct GenTruth {
  Eigen::VectorXd beta;
  double tau = 0.0;
  double sigma2_y = 0.0;
  double phi = 0.0;
  double a = 0.0;
  double overdispersion = 0.0;
};

struct ModelEntry {
  std::string name;
  ModelSpec spec;
};

struct ExperimentPlan {
  GeneratorKind generator = GeneratorKind::Parametric;
  int n_replicates = 20;
  ObservedDataset base;  // dataset template; z is the calibration target
  std::vector<ModelEntry> roster;
  SamplerConfig sampler;       // per-fold chains
  SamplerConfig calibration;   // reference fit (FromELWeights)
  int generator_model = 0;     // roster index that generates / calibrates
  bool synthesize_base = false;  // redraw the base z from truth before calibrating
  GenTruth truth;
  uint64_t master_seed = 1;
  int threads = 1;
  bool predict_median = false;
};

struct MSPEReport {
  std::vector<std::string> model_names;
  std::vector<int> folds;
  Eigen::MatrixXd pred;    // folds x models
  Eigen::MatrixXd sq_dev;  // folds x models
  std::vector<double> mspe;
  std::vector<std::vector<int>> failed_folds;  // per model
  bool complete = true;
};

struct Scoreboard {
  std::vector<std::string> model_names;
  Eigen::MatrixXd mspe;  // replicates x models
  std::vector<double> mean_mspe;
  std::vector<std::pair<std::string, double>> reductions;  // "a_vs_b" -> percent
  bool complete = true;
};

// ---------------------------------------------------------------------------
// Data generation
// ---------------------------------------------------------------------------

// One draw of the latent process at fixed hyperparameters.
Eigen::VectorXd draw_process(const ModelSpec& spec, const SpatialContext& ctx,
                             const Eigen::VectorXd& hyper, Rng& rng);

Eigen::VectorXd build_theta_from(const ModelSpec& spec, const ObservedDataset& data,
                                 const SpatialContext& ctx, const Eigen::VectorXd& beta,
                                 const Eigen::VectorXd& process);

Eigen::VectorXd truth_hyper(const ModelSpec& spec, const GenTruth& truth);

// Weighted residual bootstrap around a fresh latent draw: identity-link
// residuals add to the new theta; log-link residual ratios multiply the rate
// before a Poisson draw. Throws InfeasibleReference if the weights are off
// the simplex.
Eigen::VectorXd generate_from_el(const Eigen::VectorXd& ref_weights,
                                 const Eigen::VectorXd& ref_z,
                                 const Eigen::VectorXd& ref_theta,
                                 const Eigen::VectorXd& new_theta, LinkKind link,
                                 Rng& rng);

// Fully parametric draw from the truth: Gaussian noise with the dataset's
// sigma2 (identity) or (over)dispersed Poisson counts (log link).
Eigen::VectorXd generate_parametric(const ModelSpec& spec, const ObservedDataset& data,
                                    const SpatialContext& ctx, const GenTruth& truth,
                                    Rng& rng);

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

// Leave-one-out refits: location i keeps its covariates and spatial position
// but its observation leaves the likelihood; the prediction is the posterior
// mean (or median) of theta_i. Fold chains draw their seeds from
// (seed_base, model index, fold id), so fold order and thread count are
// irrelevant.
MSPEReport loo_mspe(const ObservedDataset& data, const std::vector<ModelEntry>& roster,
                    const SamplerConfig& sampler, uint64_t seed_base, int threads = 1,
                    const std::vector<int>& folds = {}, bool predict_median = false);

struct StudyData {
  ObservedDataset base;  // after optional synthesis
  std::vector<ObservedDataset> replicates;
};

// The generation stage of run_study: synthesizes the base when asked,
// calibrates the EL reference on it (FromELWeights), and draws every
// replicate dataset. Deterministic in the plan's master seed.
StudyData generate_study_datasets(const ExperimentPlan& plan);

Scoreboard run_study(const ExperimentPlan& plan);

}  // namespace shel
