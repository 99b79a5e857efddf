#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace shel {

// ---------------------------------------------------------------------------
// Seeding. Chains, replicates and folds each get a seed derived from the
// master seed and their integer ids, so results do not depend on execution
// order or thread count.
// ---------------------------------------------------------------------------

uint64_t splitmix64(uint64_t& state);
uint64_t derive_seed(uint64_t master, std::initializer_list<uint64_t> ids);

// Thin wrapper around mt19937_64. Distribution objects are constructed per
// call so every draw is a pure function of the engine state.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  double uniform();                       // [0, 1)
  double normal() { return normal(0.0, 1.0); }
  double normal(double mean, double sd);
  double gamma(double shape, double rate);
  long poisson(double mean);
  Eigen::VectorXd normal_vector(Eigen::Index n);

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

// Index draw from a discrete distribution with probabilities w (sum ~ 1).
Eigen::Index weighted_index(const Eigen::VectorXd& w, Rng& rng);

// ---------------------------------------------------------------------------
// Quantiles and special functions
// ---------------------------------------------------------------------------

// Linear-interpolation quantile on a copy of x (R type 7). p in [0,1].
double quantile(std::vector<double> x, double p);

// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);

// Quantile of Gamma(shape a, rate b); used for prior medians.
double gamma_quantile(double a, double b, double p);

// ---------------------------------------------------------------------------
// Optimization
// ---------------------------------------------------------------------------

struct NelderMeadResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int evals = 0;
  bool converged = false;
};

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0,
                             const Eigen::VectorXd& step,
                             double ftol = 1e-10,
                             int max_evals = 5000);

// ---------------------------------------------------------------------------
// Linear algebra helpers
// ---------------------------------------------------------------------------

struct WlsFit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd cov;  // (X' W X)^{-1}
};

// Weighted least squares with observation weights w (> 0).
WlsFit wls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
           const Eigen::VectorXd& w);

// Symmetric PSD square root (eigendecomposition, negative eigenvalues
// clamped to zero). Used for proposal covariances, which may be singular.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& S);

// true iff the constant vector lies in the column space of X.
bool has_constant_in_colspace(const Eigen::MatrixXd& X, double tol = 1e-8);

// ---------------------------------------------------------------------------
// Parallel execution: runs body(0..n_tasks-1) on up to n_threads workers.
// The first exception thrown by any task is rethrown on the caller.
// ---------------------------------------------------------------------------

void parallel_for(int n_tasks, int n_threads, const std::function<void(int)>& body);

}  // namespace shel
