#include "shel/el.hpp"

#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Dense>

#include "shel/error.hpp"

namespace shel {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Eigen::MatrixXd EstimatingEquationSet::residuals(const Eigen::VectorXd& z,
                                                 const Eigen::VectorXd& theta,
                                                 const Eigen::VectorXd& sigma2) const {
  const Eigen::Index n = z.size();
  if (theta.size() != n)
    throw DimensionMismatch("theta length " + std::to_string(theta.size()) +
                            " does not match n = " + std::to_string(n));
  Eigen::MatrixXd m(J(), n);
  m.row(0) = (z - theta).transpose();
  if (include_variance) {
    if (family == EqFamily::GaussianFH) {
      if (sigma2.size() != n)
        throw DimensionMismatch("GaussianFH variance equation needs sigma2 of length n");
      if ((sigma2.array() <= 0.0).any())
        throw ValidationError("sigma2 must be positive");
      m.row(1) = ((z - theta).array().square() / sigma2.array() - 1.0).transpose();
    } else {
      if ((theta.array() <= 0.0).any())
        throw NonFiniteResidual("Poisson-link variance equation needs positive theta");
      m.row(1) = ((z - theta).array().square() / theta.array() - 1.0).transpose();
    }
  }
  return m;
}

Eigen::VectorXd compute_weights(const Eigen::VectorXd& lambda,
                                const Eigen::MatrixXd& residuals) {
  if (lambda.size() != residuals.rows())
    throw DimensionMismatch("lambda length does not match residual rows");
  const Eigen::Index n = residuals.cols();
  const Eigen::VectorXd denom =
      Eigen::VectorXd::Ones(n) + residuals.transpose() * lambda;
  if ((denom.array() <= 0.0).any())
    throw NonPositiveDenominator("1 + lambda'm is not positive for every observation");
  return (1.0 / static_cast<double>(n)) * denom.cwiseInverse();
}

bool check_simplex(const Eigen::VectorXd& weights, const Eigen::MatrixXd& residuals,
                   double eps) {
  if (weights.size() != residuals.cols()) return false;
  if (!weights.allFinite()) return false;
  if ((weights.array() <= 0.0).any()) return false;
  if (std::abs(weights.sum() - 1.0) >= eps) return false;
  const Eigen::VectorXd constraints = residuals * weights;
  return (constraints.array().abs() < eps).all();
}

namespace {

// Owen's log-star: log below eps0 is replaced by the matching quadratic so
// the dual stays defined and convex over all of R^J.
struct LogStar {
  double eps0;
  double value(double x) const {
    if (x >= eps0) return std::log(x);
    return std::log(eps0) - 1.5 + 2.0 * x / eps0 - 0.5 * x * x / (eps0 * eps0);
  }
  double d1(double x) const {
    if (x >= eps0) return 1.0 / x;
    return 2.0 / eps0 - x / (eps0 * eps0);
  }
  double d2(double x) const {
    if (x >= eps0) return -1.0 / (x * x);
    return -1.0 / (eps0 * eps0);
  }
};

// Newton on the log-star dual with a fixed equation count. The residual
// matrix is column-major, so m(:, i) is contiguous; everything stays on the
// stack for the J = 1, 2 cases the samplers hit millions of times. The
// denominators d_i = 1 + lambda'm_i and the directional increments s_i are
// tracked incrementally, so each line-search trial is one fused pass. Any
// exact root has every d_i > 0, so the first trial step is capped just short
// of the admissible boundary; truly rootless problems stall there with large
// constraints and fail the feasibility check downstream.
template <int J>
Eigen::VectorXd solve_dual_small(const Eigen::MatrixXd& m, double tol,
                                 int max_iter, const Eigen::VectorXd* warm) {
  using VecJ = Eigen::Matrix<double, J, 1>;
  using MatJ = Eigen::Matrix<double, J, J>;
  const Eigen::Index n = m.cols();
  const LogStar ls{1.0 / static_cast<double>(n)};
  const double* md = m.data();

  VecJ lambda = VecJ::Zero();
  if (warm && warm->size() == J && warm->allFinite())
    for (int j = 0; j < J; ++j) lambda[j] = (*warm)[j];

  Eigen::VectorXd d(n), s(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double di = 1.0;
    for (int j = 0; j < J; ++j) di += lambda[j] * md[i * J + j];
    d[i] = di;
  }
  double f = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) f -= ls.value(d[i]);

  for (int it = 0; it < max_iter; ++it) {
    VecJ grad = VecJ::Zero();
    MatJ hess = MatJ::Zero();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double* mi = md + i * J;
      const double g1 = ls.d1(d[i]), g2 = -ls.d2(d[i]);
      for (int j = 0; j < J; ++j) {
        grad[j] -= mi[j] * g1;
        for (int k = j; k < J; ++k) hess(j, k) += mi[j] * mi[k] * g2;
      }
    }
    if (grad.template lpNorm<Eigen::Infinity>() < tol) break;

    VecJ step;
    if constexpr (J == 1) {
      step[0] = -grad[0] / std::max(hess(0, 0), 1e-300);
    } else {
      for (int j = 0; j < J; ++j)
        for (int k = 0; k < j; ++k) hess(j, k) = hess(k, j);
      MatJ h = hess;
      step = h.ldlt().solve(-grad);
      if (!step.allFinite()) {
        h.diagonal().array() += 1e-10 * (1.0 + h.diagonal().array().abs());
        step = h.ldlt().solve(-grad);
      }
    }

    double t = 1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double* mi = md + i * J;
      double si = 0.0;
      for (int j = 0; j < J; ++j) si += step[j] * mi[j];
      s[i] = si;
      if (si < 0.0 && d[i] > 0.0 && d[i] + t * si <= 0.0) t = -0.99 * d[i] / si;
    }
    if (!(t > 0.0) || !step.allFinite()) break;

    const double slope = grad.dot(step);
    bool moved = false;
    for (int bt = 0; bt < 40; ++bt) {
      double f_new = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) f_new -= ls.value(d[i] + t * s[i]);
      if (f_new <= f + 1e-4 * t * slope) {
        for (int j = 0; j < J; ++j) lambda[j] += t * step[j];
        d += t * s;
        f = f_new;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
  }
  Eigen::VectorXd out(J);
  for (int j = 0; j < J; ++j) out[j] = lambda[j];
  return out;
}

Eigen::VectorXd solve_dual_generic(const Eigen::MatrixXd& m, double tol,
                                   int max_iter, const Eigen::VectorXd* warm) {
  const Eigen::Index J = m.rows(), n = m.cols();
  const LogStar ls{1.0 / static_cast<double>(n)};
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(J);
  if (warm && warm->size() == J && warm->allFinite()) lambda = *warm;

  auto dual = [&](const Eigen::VectorXd& lam) {
    const Eigen::VectorXd d = Eigen::VectorXd::Ones(n) + m.transpose() * lam;
    double v = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) v -= ls.value(d[i]);
    return v;
  };

  double f = dual(lambda);
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd d = Eigen::VectorXd::Ones(n) + m.transpose() * lambda;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(J);
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(J, J);
    for (Eigen::Index i = 0; i < n; ++i) {
      grad.noalias() -= m.col(i) * ls.d1(d[i]);
      hess.noalias() -= m.col(i) * m.col(i).transpose() * ls.d2(d[i]);
    }
    if (grad.lpNorm<Eigen::Infinity>() < tol) break;

    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    Eigen::VectorXd step;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      step = ldlt.solve(-grad);
    } else {
      hess.diagonal().array() += 1e-10 * (1.0 + hess.diagonal().array().abs());
      step = hess.ldlt().solve(-grad);
    }

    double t = 1.0;
    const double slope = grad.dot(step);
    bool moved = false;
    for (int bt = 0; bt < 60; ++bt) {
      const double f_new = dual(lambda + t * step);
      if (f_new <= f + 1e-4 * t * slope) {
        lambda += t * step;
        f = f_new;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
  }
  return lambda;
}

Eigen::VectorXd solve_dual(const Eigen::MatrixXd& m, double tol, int max_iter,
                           const Eigen::VectorXd* warm) {
  switch (m.rows()) {
    case 1:
      return solve_dual_small<1>(m, tol, max_iter, warm);
    case 2:
      return solve_dual_small<2>(m, tol, max_iter, warm);
    default:
      return solve_dual_generic(m, tol, max_iter, warm);
  }
}

Eigen::VectorXd solve_squared(const Eigen::MatrixXd& m, int max_iter) {
  const Eigen::Index J = m.rows(), n = m.cols();
  const double inv_n = 1.0 / static_cast<double>(n);

  auto objective = [&](const Eigen::VectorXd& lam) {
    const Eigen::VectorXd d = Eigen::VectorXd::Ones(n) + m.transpose() * lam;
    if ((d.array() <= 1e-10).any()) {
      double viol = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) viol += std::max(0.0, 1e-10 - d[i]);
      return 1e6 * (1.0 + viol);
    }
    const Eigen::VectorXd w = inv_n * d.cwiseInverse();
    return (m * w).squaredNorm();
  };

  Eigen::VectorXd step(J);
  for (Eigen::Index j = 0; j < J; ++j) {
    const double scale = m.row(j).cwiseAbs().maxCoeff();
    step[j] = scale > 0.0 ? 0.2 / scale : 0.1;
  }
  auto res = nelder_mead(objective, Eigen::VectorXd::Zero(J), step, 1e-17,
                         50 * max_iter);
  // restart with a tighter simplex to polish the root
  auto res2 = nelder_mead(objective, res.x, 1e-3 * step, 1e-17, 50 * max_iter);
  return res2.f < res.f ? res2.x : res.x;
}

}  // namespace

ELState solve_lambda(const Eigen::MatrixXd& residuals, const ELOptions& opts,
                     const Eigen::VectorXd* warm_start) {
  const Eigen::Index J = residuals.rows(), n = residuals.cols();
  if (n <= J)
    throw ValidationError("need n > J observations (n = " + std::to_string(n) +
                          ", J = " + std::to_string(J) + ")");
  if (!residuals.allFinite())
    throw NonFiniteResidual("estimating-equation residuals contain NaN/Inf");

  ELState state;
  state.lambda = (opts.solver == LambdaSolver::Dual)
                     ? solve_dual(residuals, opts.tol, opts.max_iter, warm_start)
                     : solve_squared(residuals, opts.max_iter);

  const Eigen::VectorXd denom =
      Eigen::VectorXd::Ones(n) + residuals.transpose() * state.lambda;
  state.weights = (1.0 / static_cast<double>(n)) * denom.cwiseInverse();

  state.feasible = (denom.array() > 0.0).all() &&
                   check_simplex(state.weights, residuals, opts.feas_eps);
  state.log_el = state.feasible ? state.weights.array().log().sum() : -kInf;
  return state;
}

ELState solve_lambda(const ObservedDataset& data, const Eigen::VectorXd& theta,
                     const EstimatingEquationSet& eqs, const ELOptions& opts) {
  if (!theta.allFinite()) throw NonFiniteResidual("theta contains NaN/Inf");
  ELState state = solve_lambda(eqs.residuals(data.z, theta, data.sigma2), opts);
  state.theta = theta;
  return state;
}

double log_el(const ELState& state) {
  return state.feasible ? state.log_el : -kInf;
}

WlsFit wls_center(const ObservedDataset& data, EqFamily family) {
  if (family == EqFamily::GaussianFH) {
    const Eigen::VectorXd w =
        data.has_sigma2() ? data.sigma2.cwiseInverse().eval()
                          : Eigen::VectorXd::Ones(data.n()).eval();
    return wls(data.X, data.z, w);
  }
  // log-rate regression: log((z + 0.5)/E) on X, delta-method weights z + 0.5
  Eigen::VectorXd expected = data.has_offset()
                                 ? data.offset.array().exp().matrix().eval()
                                 : Eigen::VectorXd::Ones(data.n());
  const Eigen::VectorXd y =
      ((data.z.array() + 0.5) / expected.array()).log().matrix();
  const Eigen::VectorXd w = (data.z.array() + 0.5).matrix();
  return wls(data.X, y, w);
}

namespace {

Eigen::VectorXd theta_of(const ObservedDataset& data,
                         const EstimatingEquationSet& eqs,
                         const Eigen::VectorXd& beta) {
  Eigen::VectorXd eta = data.X * beta;
  if (data.has_offset()) eta += data.offset;
  if (eqs.family == EqFamily::PoissonLink) {
    if ((eta.array() > 700.0).any())
      throw OverflowError("log-link exponent exceeds 700");
    return eta.array().exp();
  }
  return eta;
}

// profile objective: -log EL of theta(beta) with the process fixed at zero
struct MeleObjective {
  const ObservedDataset& data;
  const EstimatingEquationSet& eqs;
  const ELOptions& el;
  const Eigen::VectorXd& center;

  double operator()(const Eigen::VectorXd& beta) const {
    ELState s;
    try {
      s = solve_lambda(data, theta_of(data, eqs, beta), eqs, el);
    } catch (const NumericError&) {
      return 1e8 * (1.0 + (beta - center).squaredNorm());
    }
    if (!s.feasible) return 1e8 * (1.0 + (beta - center).squaredNorm());
    return -s.log_el;
  }
};

// Just-identified case (m == J): the unweighted moment system
// (1/n) sum_i m_j(z_i, theta_i(beta)) = 0 has the profile-EL maximum at its
// root (lambda = 0, uniform weights there). Damped Newton with a
// finite-difference Jacobian; empty on failure.
std::optional<Eigen::VectorXd> solve_moment_system(const ObservedDataset& data,
                                                   const EstimatingEquationSet& eqs,
                                                   const Eigen::VectorXd& beta0) {
  const int m = static_cast<int>(beta0.size());
  auto g = [&](const Eigen::VectorXd& beta) -> Eigen::VectorXd {
    const Eigen::MatrixXd res =
        eqs.residuals(data.z, theta_of(data, eqs, beta), data.sigma2);
    return res.rowwise().mean();
  };

  Eigen::VectorXd beta = beta0;
  Eigen::VectorXd gv;
  try {
    gv = g(beta);
  } catch (const NumericError&) {
    return std::nullopt;
  }
  double fnorm = gv.squaredNorm();
  for (int it = 0; it < 80; ++it) {
    if (gv.lpNorm<Eigen::Infinity>() < 1e-11) return beta;
    Eigen::MatrixXd jac(m, m);
    try {
      for (int k = 0; k < m; ++k) {
        const double h = 1e-6 * (1.0 + std::abs(beta[k]));
        Eigen::VectorXd bp = beta;
        bp[k] += h;
        jac.col(k) = (g(bp) - gv) / h;
      }
    } catch (const NumericError&) {
      return std::nullopt;
    }
    const Eigen::VectorXd step = jac.fullPivLu().solve(-gv);
    if (!step.allFinite()) return std::nullopt;
    double t = 1.0;
    bool moved = false;
    for (int bt = 0; bt < 40; ++bt) {
      Eigen::VectorXd cand = beta + t * step;
      try {
        const Eigen::VectorXd gc = g(cand);
        if (gc.squaredNorm() < fnorm) {
          beta = cand;
          gv = gc;
          fnorm = gv.squaredNorm();
          moved = true;
          break;
        }
      } catch (const NumericError&) {
      }
      t *= 0.5;
    }
    if (!moved) return std::nullopt;
  }
  return gv.lpNorm<Eigen::Infinity>() < 1e-9 ? std::optional<Eigen::VectorXd>(beta)
                                             : std::nullopt;
}

}  // namespace

Eigen::VectorXd mele_fit(const ObservedDataset& data, const EstimatingEquationSet& eqs,
                         const MeleOptions& opts) {
  const WlsFit start = wls_center(data, eqs.family);
  const Eigen::VectorXd se = start.cov.diagonal().cwiseMax(1e-12).cwiseSqrt();
  const MeleObjective obj{data, eqs, opts.el, start.beta};

  if (data.m() == eqs.J()) {
    // just identified: the exact moment root attains the profile bound
    if (auto root = solve_moment_system(data, eqs, start.beta))
      if (obj(*root) < 1e8) return *root;
  }

  Eigen::VectorXd x0 = start.beta;
  double f0 = obj(x0);
  if (f0 >= 1e8) {
    // scan the WLS box for any feasible point before giving up
    Rng rng(0x4d454c45u);  // fixed: mele_fit is deterministic in its inputs
    bool found = false;
    for (int s = 0; s < opts.scan_points && !found; ++s) {
      Eigen::VectorXd cand = start.beta;
      for (Eigen::Index k = 0; k < cand.size(); ++k)
        cand[k] += opts.box_se * se[k] * (2.0 * rng.uniform() - 1.0);
      const double f = obj(cand);
      if (f < 1e8) {
        x0 = cand;
        f0 = f;
        found = true;
      }
    }
    if (!found)
      throw NoFeasibleStart(start.beta,
                            "no feasible beta found in the WLS search box");
  }

  auto r1 = nelder_mead(obj, x0, (0.5 * opts.box_se / 3.0) * se, 1e-12, opts.max_evals);
  auto r2 = nelder_mead(obj, r1.x, 0.02 * se, 1e-13, opts.max_evals);
  const Eigen::VectorXd best = (r2.f <= r1.f) ? r2.x : r1.x;
  (void)f0;
  if (obj(best) >= 1e8)
    throw NoFeasibleStart(start.beta, "MELE optimization lost feasibility");
  return best;
}

}  // namespace shel
