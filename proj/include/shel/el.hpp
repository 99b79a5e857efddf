#pragma once

#include <limits>

#include <Eigen/Core>

#include "shel/dataset.hpp"
#include "shel/numerics.hpp"

namespace shel {

// ---------------------------------------------------------------------------
// Empirical likelihood under the two-moment estimating equations
//
//   sum_i w_i (z_i - theta_i)                    = 0
//   sum_i w_i { (z_i - theta_i)^2 / V_i - 1 }    = 0
//
// with V_i = sigma2_i (Gaussian) or V_i = theta_i (Poisson link). The -1 of
// the variance equation is folded per observation so both rows share the
// sum_i w_i m_ji = 0 form, which is what the closed-form weights
//
//   w_i = (1/n) / (1 + sum_j lambda_j m_ji)
//
// require. The two forms coincide whenever sum_i w_i = 1.
// ---------------------------------------------------------------------------

enum class EqFamily { GaussianFH, PoissonLink };

struct EstimatingEquationSet {
  EqFamily family = EqFamily::GaussianFH;
  bool include_variance = true;

  int J() const { return include_variance ? 2 : 1; }

  // J x n residual matrix m_j(z_i, theta_i). sigma2 is required only for the
  // Gaussian family with the variance equation active.
  Eigen::MatrixXd residuals(const Eigen::VectorXd& z, const Eigen::VectorXd& theta,
                            const Eigen::VectorXd& sigma2 = {}) const;
};

struct ELState {
  Eigen::VectorXd theta;
  Eigen::VectorXd lambda;
  Eigen::VectorXd weights;
  double log_el = -std::numeric_limits<double>::infinity();
  bool feasible = false;
};

// Dual: Newton on the smooth convex dual with a quadratic tail extension
// outside the admissible region (default). SquaredObjective: derivative-free
// minimization of sum_j (sum_i w_i(lambda) m_ji)^2, kept as a verification
// mode replicating the reference computation.
enum class LambdaSolver { Dual, SquaredObjective };

struct ELOptions {
  LambdaSolver solver = LambdaSolver::Dual;
  double tol = 1e-11;     // solver stopping tolerance
  double feas_eps = 5e-3; // feasibility threshold (strict)
  int max_iter = 100;
};

// Eq.-4 weights for an arbitrary multiplier. Throws NonPositiveDenominator
// when some 1 + lambda'm_i <= 0; summation to 1 is a feasibility question,
// not part of the formula.
Eigen::VectorXd compute_weights(const Eigen::VectorXd& lambda,
                                const Eigen::MatrixXd& residuals);

// |sum w - 1| < eps, w_i > 0 for all i, |sum_i w_i m_ji| < eps for all j.
bool check_simplex(const Eigen::VectorXd& weights, const Eigen::MatrixXd& residuals,
                   double eps = 5e-3);

// Solves for the multiplier at fixed theta. On infeasibility the multiplier
// and weights are still populated for diagnostics, feasible = false and
// log_el = -inf. warm_start (optional) seeds the Newton iteration; the dual
// is strictly convex, so it changes only the path, not the solution.
ELState solve_lambda(const Eigen::MatrixXd& residuals, const ELOptions& opts = {},
                     const Eigen::VectorXd* warm_start = nullptr);
ELState solve_lambda(const ObservedDataset& data, const Eigen::VectorXd& theta,
                     const EstimatingEquationSet& eqs, const ELOptions& opts = {});

// sum_i log w_i, or -inf for an infeasible state. Never throws.
double log_el(const ELState& state);

struct MeleOptions {
  double box_se = 3.0;   // search box half-width in WLS standard errors
  int scan_points = 500; // feasible-start scan budget
  int max_evals = 4000;
  ELOptions el;
};

// Maximum empirical likelihood estimate of beta with the latent process fixed
// at zero: theta = X beta (Gaussian) or exp(offset + X beta) (Poisson link).
// The returned point is always feasible; throws NoFeasibleStart otherwise.
Eigen::VectorXd mele_fit(const ObservedDataset& data, const EstimatingEquationSet& eqs,
                         const MeleOptions& opts = {});

// WLS center used by mele_fit and the Zellner prior: weights 1/sigma2 on z
// (Gaussian) or weights z + 0.5 on log((z + 0.5) / E) (Poisson link).
WlsFit wls_center(const ObservedDataset& data, EqFamily family);

}  // namespace shel
