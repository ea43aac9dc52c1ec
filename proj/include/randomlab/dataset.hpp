#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "randomlab/common.hpp"

namespace randomlab {

// A treatment assignment for n units, entries in {0,1}.
struct Assignment {
  Eigen::VectorXi z;

  int n() const { return static_cast<int>(z.size()); }
  int treated_count() const { return z.sum(); }
};

// Undirected interference graph, stored as a deduplicated sorted edge set
// plus adjacency lists. No self-loops; symmetry holds by construction.
class Network {
 public:
  Network() = default;
  Network(int n, std::vector<std::pair<int, int>> edge_list);

  int size() const { return n_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<std::vector<int>>& neighbors() const { return neighbors_; }

  // Number of treated neighbors per unit.
  Eigen::VectorXd exposures(const Eigen::VectorXi& z) const;

 private:
  int n_ = 0;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> neighbors_;
};

struct ExperimentData {
  Eigen::VectorXd outcomes;
  Eigen::VectorXi treatments;  // observed assignment, entries in {0,1}
  Eigen::MatrixXd covariates;  // n x p
  std::vector<int> cluster_ids;  // empty when the design has no clusters
  std::optional<Network> network;

  int n() const { return static_cast<int>(outcomes.size()); }
  int p() const { return static_cast<int>(covariates.cols()); }
  Assignment observed() const { return Assignment{treatments}; }

  void validate() const;

  static ExperimentData create(Eigen::VectorXd outcomes,
                               Eigen::VectorXi treatments,
                               Eigen::MatrixXd covariates,
                               std::vector<int> cluster_ids = {},
                               std::optional<Network> network = std::nullopt);
};

// Column roles for CSV io. An empty covariate list means "every column that
// is not otherwise claimed, in file order"; an empty cluster name means none.
struct CsvSchema {
  std::string outcome = "Y";
  std::string treatment = "Z";
  std::vector<std::string> covariates;
  std::string cluster;
};

ExperimentData load_csv(const std::string& path, const CsvSchema& schema);
void write_csv(const std::string& path, const ExperimentData& data,
               const CsvSchema& schema);

// Two integer columns per row; a leading header row is skipped when present.
// index_base is 0 or 1 and is subtracted from every endpoint.
Network load_edges(const std::string& path, int n, int index_base);

}  // namespace randomlab
