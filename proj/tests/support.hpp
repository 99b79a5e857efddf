// Test-only oracles and fixtures. Everything here is independent of the
// library solvers it is used to check.
#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "shel/dataset.hpp"
#include "shel/numerics.hpp"
#include "shel/spatial.hpp"

namespace testsup {

// ---------------------------------------------------------------------------
// Scalar bisection oracle for the single-equation multiplier: the root of
// f(l) = sum_i m_i / (1 + l m_i) over the admissible interval. f is strictly
// decreasing there, so plain bisection is exact to the tolerance.
// ---------------------------------------------------------------------------

struct BisectionResult {
  double lambda = 0.0;
  Eigen::VectorXd weights;
  double log_el = 0.0;
  bool has_root = false;
};

inline BisectionResult bisect_lambda(const Eigen::VectorXd& m, double tol = 1e-13) {
  BisectionResult res;
  const double m_max = m.maxCoeff(), m_min = m.minCoeff();
  if (!(m_max > 0.0) || !(m_min < 0.0)) return res;  // zero not inside the hull

  const double pad = 1e-12;
  double lo = -1.0 / m_max + pad;
  double hi = -1.0 / m_min - pad;
  auto f = [&](double l) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < m.size(); ++i) s += m[i] / (1.0 + l * m[i]);
    return s;
  };
  if (f(lo) < 0.0 || f(hi) > 0.0) return res;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  res.lambda = 0.5 * (lo + hi);
  res.weights = (1.0 / static_cast<double>(m.size())) *
                (Eigen::VectorXd::Ones(m.size()) + res.lambda * m).cwiseInverse();
  res.log_el = res.weights.array().log().sum();
  res.has_root = true;
  return res;
}

// ---------------------------------------------------------------------------
// Graph fixtures
// ---------------------------------------------------------------------------

inline shel::LatticeGraph path_graph(int n) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  return shel::LatticeGraph(n, std::move(edges));
}

inline shel::LatticeGraph grid_graph(int rows, int cols) {
  std::vector<std::pair<int, int>> edges;
  auto id = [cols](int r, int c) { return r * cols + c; };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) edges.emplace_back(id(r, c), id(r, c + 1));
      if (r + 1 < rows) edges.emplace_back(id(r, c), id(r + 1, c));
    }
  return shel::LatticeGraph(rows * cols, std::move(edges));
}

// Erdos-Renyi draw, re-sampled until connected.
inline shel::LatticeGraph random_connected_graph(int n, double p, shel::Rng& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (rng.uniform() < p) edges.emplace_back(i, j);
    bool ok = true;
    std::vector<int> deg(n, 0);
    for (auto& e : edges) {
      ++deg[e.first];
      ++deg[e.second];
    }
    for (int d : deg)
      if (d == 0) ok = false;
    if (!ok) continue;
    shel::LatticeGraph g(n, std::move(edges));
    if (g.connected()) return g;
  }
  throw std::runtime_error("failed to draw a connected graph");
}

// ---------------------------------------------------------------------------
// Monte-Carlo standard error by batch means
// ---------------------------------------------------------------------------

inline double batch_means_se(const Eigen::VectorXd& x, int n_batches = 50) {
  const long n = x.size();
  const long b = n / n_batches;
  if (b < 2) throw std::runtime_error("chain too short for batch means");
  Eigen::VectorXd means(n_batches);
  for (int k = 0; k < n_batches; ++k) means[k] = x.segment(k * b, b).mean();
  const double grand = means.mean();
  const double var_b = (means.array() - grand).square().sum() / (n_batches - 1);
  return std::sqrt(var_b / n_batches);
}

// ---------------------------------------------------------------------------
// Dataset fixtures
// ---------------------------------------------------------------------------

inline shel::ObservedDataset gaussian_dataset(const Eigen::VectorXd& z,
                                              const Eigen::MatrixXd& X,
                                              const Eigen::VectorXd& sigma2) {
  shel::ObservedDataset d;
  d.z = z;
  d.X = X;
  d.sigma2 = sigma2;
  for (int i = 0; i < d.n(); ++i) d.ids.push_back(std::to_string(i));
  return d;
}

inline Eigen::MatrixXd design_with_intercept(const Eigen::VectorXd& x) {
  Eigen::MatrixXd X(x.size(), 2);
  X.col(0).setOnes();
  X.col(1) = x;
  return X;
}

}  // namespace testsup
