#include "shel/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "shel/error.hpp"
#include "shel/numerics.hpp"

namespace shel {

LatticeGraph::LatticeGraph(int n, std::vector<std::pair<int, int>> edges)
    : n_(n), edges_(std::move(edges)) {
  if (n_ <= 0) throw ValidationError("graph must have at least one node");
  std::set<std::pair<int, int>> seen;
  degrees_.assign(n_, 0);
  for (auto& e : edges_) {
    if (e.first > e.second) std::swap(e.first, e.second);
    if (e.first < 0 || e.second >= n_)
      throw ValidationError("edge (" + std::to_string(e.first) + "," +
                            std::to_string(e.second) + ") out of range for n=" +
                            std::to_string(n_));
    if (e.first == e.second)
      throw ValidationError("self-loop at node " + std::to_string(e.first));
    if (!seen.insert(e).second)
      throw ValidationError("duplicate edge (" + std::to_string(e.first) + "," +
                            std::to_string(e.second) + ")");
    ++degrees_[e.first];
    ++degrees_[e.second];
  }
  // BFS connectivity
  std::vector<std::vector<int>> adj(n_);
  for (const auto& e : edges_) {
    adj[e.first].push_back(e.second);
    adj[e.second].push_back(e.first);
  }
  std::vector<char> vis(n_, 0);
  std::vector<int> stack{0};
  vis[0] = 1;
  int reached = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v : adj[u]) {
      if (!vis[v]) {
        vis[v] = 1;
        ++reached;
        stack.push_back(v);
      }
    }
  }
  connected_ = (reached == n_);
}

Eigen::MatrixXd LatticeGraph::adjacency() const {
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n_, n_);
  for (const auto& e : edges_) {
    B(e.first, e.second) = 1.0;
    B(e.second, e.first) = 1.0;
  }
  return B;
}

Eigen::MatrixXd icar_precision(const LatticeGraph& graph) {
  for (int i = 0; i < graph.n(); ++i)
    if (graph.degrees()[i] == 0) throw IsolatedNode(i);
  Eigen::MatrixXd Q = -graph.adjacency();
  for (int i = 0; i < graph.n(); ++i) Q(i, i) = graph.degrees()[i];
  return Q;
}

Eigen::MatrixXd centering_projection(const Eigen::MatrixXd& X) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < X.cols())
    throw RankDeficientDesign("design matrix is rank deficient (rank " +
                              std::to_string(qr.rank()) + " < " +
                              std::to_string(X.cols()) + " columns)");
  const Eigen::MatrixXd thinQ =
      qr.householderQ() * Eigen::MatrixXd::Identity(X.rows(), X.cols());
  return Eigen::MatrixXd::Identity(X.rows(), X.rows()) - thinQ * thinQ.transpose();
}

namespace {

// Eigenpairs of Pc B Pc, descending eigenvalue: the positive ones only, or
// every |eigenvalue| above tolerance. Sign fixed so the first entry of each
// vector with magnitude > 1e-10 is positive.
void moran_eigs(const LatticeGraph& graph, const Eigen::MatrixXd& X,
                Eigen::MatrixXd& vectors, Eigen::VectorXd& values,
                Eigen::MatrixXd& B_out, bool all_nonzero = false) {
  if (X.rows() != graph.n())
    throw DimensionMismatch("design matrix rows do not match graph size");
  B_out = graph.adjacency();
  const Eigen::MatrixXd Pc = centering_projection(X);
  const Eigen::MatrixXd op = Pc * B_out * Pc;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (op + op.transpose()));
  if (es.info() != Eigen::Success)
    throw NumericError("eigendecomposition of Pc B Pc failed");

  const Eigen::VectorXd all = es.eigenvalues();  // ascending
  const double eig_tol =
      1e-8 * std::max(all.cwiseAbs().maxCoeff(), 1.0);
  std::vector<int> keep;
  for (int i = static_cast<int>(all.size()) - 1; i >= 0; --i)
    if (all[i] > eig_tol || (all_nonzero && std::abs(all[i]) > eig_tol))
      keep.push_back(i);

  values.resize(static_cast<Eigen::Index>(keep.size()));
  vectors.resize(graph.n(), static_cast<Eigen::Index>(keep.size()));
  for (size_t k = 0; k < keep.size(); ++k) {
    values[static_cast<Eigen::Index>(k)] = all[keep[k]];
    Eigen::VectorXd v = es.eigenvectors().col(keep[k]);
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      if (std::abs(v[j]) > 1e-10) {
        if (v[j] < 0) v = -v;
        break;
      }
    }
    vectors.col(static_cast<Eigen::Index>(k)) = v;
  }
}

SpatialBasis build_basis(const LatticeGraph& graph, const Eigen::MatrixXd& X,
                         const QPolicy& policy) {
  if (!graph.connected())
    throw DisconnectedGraph("Moran basis requires a connected graph");

  SpatialBasis basis;
  moran_eigs(graph, X, basis.M, basis.eigvals, basis.B);
  basis.Q = icar_precision(graph);

  if (policy.kind == QPolicy::Kind::Fraction) {
    if (policy.fraction <= 0.0 || policy.fraction > 1.0)
      throw ConfigError("q_policy fraction must be in (0, 1]");
    const int want = static_cast<int>(std::ceil(policy.fraction * graph.n()));
    const int q = std::min<int>(want, static_cast<int>(basis.M.cols()));
    basis.M = basis.M.leftCols(q).eval();
    basis.eigvals = basis.eigvals.head(q).eval();
  }
  if (basis.M.cols() == 0)
    throw NumericError("Moran operator has no positive eigenvalues");

  basis.Q_reduced = basis.M.transpose() * basis.Q * basis.M;
  basis.Q_reduced = 0.5 * (basis.Q_reduced + basis.Q_reduced.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(basis.Q_reduced);
  basis.min_eig = es.eigenvalues().minCoeff();
  Eigen::LLT<Eigen::MatrixXd> llt(basis.Q_reduced);
  if (basis.min_eig <= 0.0 || llt.info() != Eigen::Success)
    throw PDCheckFailed("reduced precision M'QM is not positive definite (min eig " +
                        std::to_string(basis.min_eig) + ")");
  basis.Qr_chol = llt.matrixL();
  basis.logdet_Qr = 2.0 * basis.Qr_chol.diagonal().array().log().sum();
  return basis;
}

}  // namespace

SpatialBasis moran_basis(const LatticeGraph& graph, const Eigen::MatrixXd& X,
                         const QPolicy& policy) {
  if (!has_constant_in_colspace(X))
    throw NoIntercept("the design matrix must span an intercept for the reduced ICAR prior");
  return build_basis(graph, X, policy);
}

Theorem1Report verify_theorem1(const LatticeGraph& graph, const Eigen::MatrixXd& X,
                               bool all_nonzero) {
  if (!graph.connected())
    throw DisconnectedGraph("verify_theorem1 requires a connected graph");
  Eigen::MatrixXd M, B;
  Eigen::VectorXd vals;
  moran_eigs(graph, X, M, vals, B, all_nonzero);
  const Eigen::MatrixXd Q = icar_precision(graph);
  Eigen::MatrixXd Qr = M.transpose() * Q * M;
  Qr = 0.5 * (Qr + Qr.transpose()).eval();
  Theorem1Report report;
  report.q = static_cast<int>(M.cols());
  if (report.q == 0) return report;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Qr);
  report.min_eig = es.eigenvalues().minCoeff();
  report.pd = report.min_eig > 0.0;
  return report;
}

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& coords) {
  const Eigen::Index n = coords.rows();
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = (coords.row(i) - coords.row(j)).norm();
      D(i, j) = d;
      D(j, i) = d;
    }
  return D;
}

Eigen::MatrixXd exp_covariance_from_dist(const Eigen::MatrixXd& dist,
                                         double sigma2_y, double phi) {
  if (sigma2_y <= 0.0 || phi <= 0.0)
    throw NonPositiveParams("exp_covariance requires sigma2_y > 0 and phi > 0");
  Eigen::MatrixXd S = sigma2_y * (-dist / phi).array().exp().matrix();
  S.diagonal().array() += 1e-8 * sigma2_y;
  return S;
}

Eigen::MatrixXd exp_covariance(const PointField& field) {
  if (field.coords.cols() != 2)
    throw DimensionMismatch("coordinates must be n x 2");
  const Eigen::MatrixXd D = pairwise_distances(field.coords);
  for (Eigen::Index i = 0; i < D.rows(); ++i)
    for (Eigen::Index j = i + 1; j < D.cols(); ++j)
      if (D(i, j) == 0.0)
        throw DuplicateCoordinates("duplicate coordinates at rows " +
                                   std::to_string(i) + " and " + std::to_string(j));
  return exp_covariance_from_dist(D, field.sigma2_y, field.phi);
}

}  // namespace shel
