#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "shel/spatial.hpp"

namespace shel {

struct DatasetOptions {
  // compute E_i = N_i * (sum z / sum N) from a `births` column and store
  // log E_i as the offset
  bool births_offset = false;
  // prepend a ones column unless one is already present
  bool add_intercept = true;
  std::string spatial_kind = "auto";  // "edges" | "coords" | "none" | "auto"
};

// Observations plus design information. X always carries the intercept
// column after loading unless add_intercept was disabled explicitly.
struct ObservedDataset {
  std::vector<std::string> ids;
  std::vector<std::string> covariate_names;
  Eigen::VectorXd z;
  Eigen::MatrixXd X;
  Eigen::VectorXd sigma2;    // size 0 when absent
  Eigen::VectorXd offset;    // size 0 when absent; log E_i for count models
  Eigen::VectorXd expected;  // E_i when derived from births, else size 0
  LatticeGraph graph;        // empty() when absent
  Eigen::MatrixXd coords;    // 0 x 2 when absent

  int n() const { return static_cast<int>(z.size()); }
  int m() const { return static_cast<int>(X.cols()); }
  bool has_sigma2() const { return sigma2.size() > 0; }
  bool has_offset() const { return offset.size() > 0; }
  bool has_graph() const { return !graph.empty(); }
  bool has_coords() const { return coords.rows() > 0; }

  void validate() const;
};

// Loads a headered CSV. Recognized columns: id, z, sigma2, births, offset;
// every other column is a covariate. The optional spatial file is an edge
// list (two 0-based node indices per line, node i = data row i) or a
// coordinates CSV with columns id,x,y.
ObservedDataset load_dataset(const std::string& data_path,
                             const std::string& spatial_path = "",
                             const DatasetOptions& opts = {});

LatticeGraph load_edge_list(const std::string& path, int n);
Eigen::MatrixXd load_coordinates(const std::string& path,
                                 const std::vector<std::string>& ids);

// Writes the tabular part (not the spatial file); load_dataset on the result
// reproduces the dataset exactly.
void write_dataset(const ObservedDataset& data, const std::string& path);

}  // namespace shel
