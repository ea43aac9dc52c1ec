#pragma once

#include <functional>
#include <variant>
#include <vector>

#include "randomlab/dataset.hpp"
#include "randomlab/rng.hpp"

namespace randomlab {

struct BernoulliDesign {
  int n = 0;
  double pi = 0.5;
};

struct CompleteDesign {
  int n = 0;
  int m = 0;  // treated count
};

// Two-stage clustered assignment: a fixed-size random set of clusters is
// selected, then a fixed number of units inside each selected cluster is
// treated. Everyone else stays control.
struct TwoStageClusterDesign {
  std::vector<int> cluster_ids;          // one label per unit
  double cluster_fraction = 0.5;         // fraction of clusters selected
  int treated_per_cluster = 1;

  std::vector<std::vector<int>> clusters;  // member lists, built on create
  int selected_count = 0;

  static TwoStageClusterDesign create(std::vector<int> cluster_ids,
                                      double cluster_fraction,
                                      int treated_per_cluster);
};

using Design = std::variant<BernoulliDesign, CompleteDesign, TwoStageClusterDesign>;

int design_n(const Design& design);
void validate_design(const Design& design);

Assignment draw(const Design& design, RngStream& rng);

// Conditioning constraints (one at a time).
//
// FocalConstraint fixes the assignment exactly on a focal index set; draws
// come from the base design conditioned on that event. Constructive for
// bernoulli and two-stage designs, closed-form for complete.
struct FocalConstraint {
  std::vector<int> focal;      // sorted unit indices
  Eigen::VectorXi realized;    // full observed assignment (length n)
};

// ImbalanceConstraint accepts assignments whose imbalance p-value for one
// covariate does not exceed the observed one; sampled by rejection.
struct ImbalanceConstraint {
  int covariate_index = 0;
  double threshold = 1.0;
  std::function<double(const Assignment&)> pvalue;
  int max_attempts = 1000;
};

struct ConditionalDesign {
  Design base;
  std::variant<FocalConstraint, ImbalanceConstraint> constraint;
};

Assignment draw(const ConditionalDesign& design, RngStream& rng);

// Type-erased sampler used by the randomization engine.
using AssignmentSampler = std::function<Assignment(RngStream&)>;

AssignmentSampler make_sampler(const Design& design);
AssignmentSampler make_sampler(const ConditionalDesign& design);

}  // namespace randomlab
