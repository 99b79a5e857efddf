#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

namespace shel {

// ---------------------------------------------------------------------------
// Lattice graphs and the intrinsic CAR structure
// ---------------------------------------------------------------------------

// Undirected graph on nodes 0..n-1 given by an edge list (b_ij = 1 iff
// neighbors). Validated on construction: no self-loops, no duplicates,
// indices in range. Connectivity is computed once and cached; the rank-(n-1)
// premise behind the reduced-rank prior needs a connected graph.
class LatticeGraph {
 public:
  LatticeGraph() = default;
  LatticeGraph(int n, std::vector<std::pair<int, int>> edges);

  int n() const { return n_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<int>& degrees() const { return degrees_; }
  bool connected() const { return connected_; }
  bool empty() const { return n_ == 0; }

  Eigen::MatrixXd adjacency() const;

 private:
  int n_ = 0;
  std::vector<std::pair<int, int>> edges_;
  std::vector<int> degrees_;
  bool connected_ = false;
};

// Q = B+ - B. Symmetric with zero row sums; singular (nullity 1 when the
// graph is connected). Throws IsolatedNode for degree-0 nodes.
Eigen::MatrixXd icar_precision(const LatticeGraph& graph);

// P_c = I - X (X'X)^{-1} X'. Symmetric idempotent annihilator of C(X).
// Throws RankDeficientDesign.
Eigen::MatrixXd centering_projection(const Eigen::MatrixXd& X);

// Retention rule for the Moran eigenbasis. AllPositive keeps every
// eigenvector with a positive eigenvalue; Fraction keeps the top
// ceil(p * n) of them.
struct QPolicy {
  enum class Kind { AllPositive, Fraction };
  Kind kind = Kind::AllPositive;
  double fraction = 0.1;

  static QPolicy all_positive() { return {}; }
  static QPolicy top_fraction(double p) { return {Kind::Fraction, p}; }
};

struct SpatialBasis {
  Eigen::MatrixXd B;          // n x n adjacency
  Eigen::MatrixXd Q;          // n x n ICAR precision
  Eigen::MatrixXd M;          // n x q eigenvectors of Pc B Pc (descending eigenvalue)
  Eigen::VectorXd eigvals;    // the q retained eigenvalues, descending, > 0
  Eigen::MatrixXd Q_reduced;  // q x q, M' Q M
  Eigen::MatrixXd Qr_chol;    // lower Cholesky factor of Q_reduced
  double logdet_Qr = 0.0;
  double min_eig = 0.0;       // smallest eigenvalue of Q_reduced

  int q() const { return static_cast<int>(M.cols()); }
};

// Builds the reduced-rank basis from the eigenvectors of Pc B Pc.
// Requires a connected graph and the constant vector in C(X) (the
// intercept condition); the positive definiteness of M'QM is asserted.
SpatialBasis moran_basis(const LatticeGraph& graph, const Eigen::MatrixXd& X,
                         const QPolicy& policy = {});

struct Theorem1Report {
  double min_eig = 0.0;
  bool pd = false;
  int q = 0;
};

// Computes min eig(M'QM) and reports whether it is positive definite. With
// all_nonzero, M collects every eigenvector of Pc B Pc with |eigenvalue| above
// tolerance (the maximal rank(M) <= n-1 case); otherwise only the positive
// ones, as moran_basis keeps. Unlike moran_basis this does not require the
// intercept condition, so sufficiency can be probed on arbitrary designs.
Theorem1Report verify_theorem1(const LatticeGraph& graph, const Eigen::MatrixXd& X,
                               bool all_nonzero = false);

// ---------------------------------------------------------------------------
// Point-referenced fields
// ---------------------------------------------------------------------------

struct PointField {
  Eigen::MatrixXd coords;  // n x 2 planar locations
  double sigma2_y = 1.0;   // marginal variance
  double phi = 1.0;        // exponential decay range
};

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& coords);

// sigma2_y * exp(-d / phi) with a 1e-8 * sigma2_y diagonal ridge so the
// result always factorizes. Rejects duplicate coordinates and nonpositive
// parameters.
Eigen::MatrixXd exp_covariance(const PointField& field);

// Same, from a precomputed distance matrix (no duplicate check).
Eigen::MatrixXd exp_covariance_from_dist(const Eigen::MatrixXd& dist,
                                         double sigma2_y, double phi);

}  // namespace shel
