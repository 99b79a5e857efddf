#include "shel/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <Eigen/Dense>

#include "shel/error.hpp"

namespace shel {

uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t derive_seed(uint64_t master, std::initializer_list<uint64_t> ids) {
  uint64_t s = master ^ 0x5851f42d4c957f2dULL;
  uint64_t out = splitmix64(s);
  for (uint64_t id : ids) {
    s = out ^ (id + 0x9e3779b97f4a7c15ULL);
    out = splitmix64(s);
  }
  return out;
}

double Rng::uniform() {
  return std::uniform_real_distribution<double>(0.0, 1.0)(eng_);
}

double Rng::normal(double mean, double sd) {
  return std::normal_distribution<double>(mean, sd)(eng_);
}

double Rng::gamma(double shape, double rate) {
  return std::gamma_distribution<double>(shape, 1.0 / rate)(eng_);
}

long Rng::poisson(double mean) {
  return std::poisson_distribution<long>(mean)(eng_);
}

Eigen::VectorXd Rng::normal_vector(Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
  return v;
}

Eigen::Index weighted_index(const Eigen::VectorXd& w, Rng& rng) {
  const double u = rng.uniform() * w.sum();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    acc += w[i];
    if (u < acc) return i;
  }
  return w.size() - 1;
}

double quantile(std::vector<double> x, double p) {
  if (x.empty()) throw EmptyChain("quantile of empty sample");
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * p;
  const auto lo = static_cast<size_t>(std::floor(h));
  const auto hi = static_cast<size_t>(std::ceil(h));
  if (lo == hi) return x[lo];
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

// Series and continued-fraction evaluation of the regularized lower
// incomplete gamma function.
namespace {

double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-15) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_p(double a, double x) {
  if (a <= 0.0) throw NonPositiveParams("gamma_p requires a > 0");
  if (x <= 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_contfrac(a, x);
}

double gamma_quantile(double a, double b, double p) {
  if (a <= 0.0 || b <= 0.0) throw NonPositiveParams("gamma_quantile requires a, b > 0");
  if (p <= 0.0) return 0.0;
  // bracket in x (rate-1 scale), then bisect P(a, x) = p
  double lo = 0.0, hi = std::max(4.0 * a, 8.0);
  while (gamma_p(a, hi) < p) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (gamma_p(a, mid) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi) / b;
}

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0,
                             const Eigen::VectorXd& step,
                             double ftol, int max_evals) {
  const int d = static_cast<int>(x0.size());
  const double alpha = 1.0, gamma_c = 2.0, rho = 0.5, sigma = 0.5;

  std::vector<Eigen::VectorXd> pts(d + 1, x0);
  std::vector<double> fv(d + 1);
  int evals = 0;
  for (int i = 0; i < d; ++i) pts[i + 1][i] += (step[i] != 0.0 ? step[i] : 1e-4);
  for (int i = 0; i <= d; ++i) { fv[i] = f(pts[i]); ++evals; }

  auto order = [&] {
    std::vector<int> idx(d + 1);
    for (int i = 0; i <= d; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int a2, int b2) { return fv[a2] < fv[b2]; });
    std::vector<Eigen::VectorXd> p2(d + 1);
    std::vector<double> f2(d + 1);
    for (int i = 0; i <= d; ++i) { p2[i] = pts[idx[i]]; f2[i] = fv[idx[i]]; }
    pts.swap(p2);
    fv.swap(f2);
  };

  NelderMeadResult res;
  while (evals < max_evals) {
    order();
    if (std::abs(fv[d] - fv[0]) <= ftol * (std::abs(fv[0]) + std::abs(fv[d]) + 1e-30)) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < d; ++i) centroid += pts[i];
    centroid /= d;

    Eigen::VectorXd xr = centroid + alpha * (centroid - pts[d]);
    const double fr = f(xr); ++evals;
    if (fr < fv[0]) {
      Eigen::VectorXd xe = centroid + gamma_c * (xr - centroid);
      const double fe = f(xe); ++evals;
      if (fe < fr) { pts[d] = xe; fv[d] = fe; }
      else { pts[d] = xr; fv[d] = fr; }
    } else if (fr < fv[d - 1]) {
      pts[d] = xr; fv[d] = fr;
    } else {
      Eigen::VectorXd xc = centroid + rho * (pts[d] - centroid);
      const double fc = f(xc); ++evals;
      if (fc < fv[d]) { pts[d] = xc; fv[d] = fc; }
      else {
        for (int i = 1; i <= d; ++i) {
          pts[i] = pts[0] + sigma * (pts[i] - pts[0]);
          fv[i] = f(pts[i]); ++evals;
        }
      }
    }
  }
  order();
  res.x = pts[0];
  res.f = fv[0];
  res.evals = evals;
  return res;
}

WlsFit wls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
           const Eigen::VectorXd& w) {
  if (X.rows() != y.size() || X.rows() != w.size())
    throw DimensionMismatch("wls: inconsistent dimensions");
  if ((w.array() <= 0.0).any())
    throw NonPositiveParams("wls: weights must be positive");
  const Eigen::VectorXd sw = w.cwiseSqrt();
  const Eigen::MatrixXd Xw = sw.asDiagonal() * X;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xw);
  if (qr.rank() < X.cols())
    throw RankDeficientDesign("wls: design is rank deficient (rank " +
                              std::to_string(qr.rank()) + " < " +
                              std::to_string(X.cols()) + ")");
  WlsFit fit;
  fit.beta = qr.solve((sw.asDiagonal() * y).eval());
  fit.cov = (Xw.transpose() * Xw)
                .ldlt()
                .solve(Eigen::MatrixXd::Identity(X.cols(), X.cols()));
  return fit;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success)
    throw NumericError("psd_sqrt: eigendecomposition failed");
  Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

bool has_constant_in_colspace(const Eigen::MatrixXd& X, double tol) {
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(X.rows());
  Eigen::VectorXd coef = X.colPivHouseholderQr().solve(ones);
  return (X * coef - ones).lpNorm<Eigen::Infinity>() < tol;
}

void parallel_for(int n_tasks, int n_threads, const std::function<void(int)>& body) {
  if (n_tasks <= 0) return;
  n_threads = std::max(1, std::min(n_threads, n_tasks));
  if (n_threads == 1) {
    for (int i = 0; i < n_tasks; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex err_mutex;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n_tasks) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace shel
