#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "shel/dataset.hpp"
#include "shel/el.hpp"
#include "shel/spatial.hpp"

namespace shel {

enum class LinkKind { Identity, Log };
enum class ProcessKind { MoranICAR, ExpGP, Independence, None };

// Proper hyperprior menu: Gamma(shape, rate), InvGamma(shape, scale),
// Uniform(lo, hi). Exactly the densities used across the studies.
struct PriorSpec {
  enum class Dist { Gamma, InvGamma, Uniform };
  Dist dist = Dist::Gamma;
  double a = 1.0;
  double b = 1.0;

  static PriorSpec gamma(double shape, double rate) { return {Dist::Gamma, shape, rate}; }
  static PriorSpec inv_gamma(double shape, double scale) { return {Dist::InvGamma, shape, scale}; }
  static PriorSpec uniform(double lo, double hi) { return {Dist::Uniform, lo, hi}; }

  double log_density(double x) const;  // -inf outside the support
  double median() const;
  bool in_support(double x) const;
};

struct BetaPrior {
  enum class Kind { ZellnerG, NormalSd };
  Kind kind = Kind::ZellnerG;
  double g = 10.0;    // precision multiplier, coupled to the process scale
  double sd = 100.0;  // for the fixed-width Gaussian alternative
};

struct ProcessSpec {
  ProcessKind kind = ProcessKind::None;
  QPolicy q_policy;            // MoranICAR
  PriorSpec tau_prior = PriorSpec::gamma(1.0, 1.0);
  PriorSpec sigma2_prior = PriorSpec::uniform(0.01, 100.0);
  PriorSpec phi_prior = PriorSpec::uniform(0.0, 4.0);
  PriorSpec a_prior = PriorSpec::inv_gamma(1.0, 1.0);
};

struct ModelSpec {
  std::string name = "model";
  EqFamily family = EqFamily::GaussianFH;
  LinkKind link = LinkKind::Identity;
  bool comparator = false;  // exact parametric likelihood instead of the EL
  ProcessSpec process;
  BetaPrior beta_prior;

  EstimatingEquationSet equations() const { return {family, true}; }
  void validate() const;
};

// Stable hash of everything that affects sampling (the display name is
// excluded). Keys per-model chain seeds, so identical specs reproduce
// identical chains wherever they sit in a roster.
uint64_t model_seed_key(const ModelSpec& spec);

// beta, the process vector (reduced y* on a lattice, site-level y otherwise)
// and the process hyperparameters; theta is a deterministic function of this.
struct LatentState {
  Eigen::VectorXd beta;
  Eigen::VectorXd process;  // size 0 for ProcessKind::None
  Eigen::VectorXd hyper;    // [tau] | [sigma2_y, phi] | [A] | empty
};

// Spatial quantities shared by every chain fit with the same spec/data.
struct SpatialContext {
  std::optional<SpatialBasis> basis;  // MoranICAR
  Eigen::MatrixXd dist;               // pairwise distances (ExpGP)
  int n = 0;
};

SpatialContext make_context(const ModelSpec& spec, const ObservedDataset& data);

// ---------------------------------------------------------------------------
// Posterior kernel: log EL (or the comparator likelihood) over the active
// observations plus the process/beta/hyperparameter log-priors. Everything is
// const; instances can be shared across evaluation threads.
// ---------------------------------------------------------------------------

class PosteriorModel {
 public:
  PosteriorModel(const ModelSpec& spec, const ObservedDataset& data,
                 const SpatialContext& ctx, std::vector<int> active = {},
                 double feas_eps = 5e-3);

  int n() const { return data_.n(); }
  int n_active() const { return static_cast<int>(active_.size()); }
  int n_beta() const { return data_.m(); }
  int n_process() const;
  int n_hyper() const;

  const ModelSpec& spec() const { return spec_; }
  const ObservedDataset& data() const { return data_; }
  const SpatialContext& context() const { return ctx_; }
  const std::vector<int>& active() const { return active_; }
  // z/X/sigma2/offset restricted to the active rows (no spatial reference)
  const ObservedDataset& active_data() const { return active_data_; }
  const Eigen::VectorXd& beta_center() const { return beta_center_; }
  const WlsFit& wls_fit() const { return wls_; }
  double feas_eps() const { return feas_eps_; }

  std::vector<std::string> hyper_names() const;
  Eigen::VectorXd hyper_init() const;  // prior medians
  LatentState make_state(Eigen::VectorXd beta) const;

  // full-length theta; throws OverflowError when a log-link exponent > 700
  Eigen::VectorXd build_theta(const LatentState& state) const;

  // EL solve (or exact likelihood) over the active subset; -inf if infeasible.
  // lambda_io (optional) warm-starts the multiplier solve and receives the
  // solved multiplier; a sampler passes the current state's multiplier so
  // consecutive solves start near their solution.
  double data_loglik(const LatentState& state,
                     Eigen::VectorXd* lambda_io = nullptr) const;
  ELState el_state(const LatentState& state) const;

  double process_logprior(const LatentState& state) const;
  double beta_logprior(const LatentState& state) const;
  double hyper_logprior(const LatentState& state) const;

  // data_loglik + all prior terms; -inf propagates, never throws past
  // overflow (treated as -inf)
  double log_kernel(const LatentState& state) const;

 private:
  Eigen::MatrixXd residuals_active(const Eigen::VectorXd& theta) const;
  double parametric_loglik(const Eigen::VectorXd& theta) const;
  double zellner_kappa(const LatentState& state) const;

  ModelSpec spec_;
  const ObservedDataset& data_;
  const SpatialContext& ctx_;
  std::vector<int> active_;
  double feas_eps_;
  ObservedDataset active_data_;
  WlsFit wls_;
  Eigen::VectorXd beta_center_;
};

// Convenience used by the samplers and harness.
std::vector<int> all_indices(int n);
std::vector<int> indices_without(int n, int skip);

}  // namespace shel
