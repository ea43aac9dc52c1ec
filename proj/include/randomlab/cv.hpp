#pragma once

#include <Eigen/Dense>
#include <vector>

#include "randomlab/models.hpp"
#include "randomlab/rng.hpp"

namespace randomlab {

// K-fold split: a seeded permutation dealt round-robin, so fold sizes never
// differ by more than one. One plan is built per test and reused for the
// observed statistic and every randomized replicate.
struct FoldPlan {
  int k = 0;
  std::vector<int> membership;  // fold id per row

  static FoldPlan create(int n, int k, RngStream rng);
  int n() const { return static_cast<int>(membership.size()); }
  std::vector<std::vector<int>> fold_rows() const;
};

// Mean over folds of held-out MSE, minimized over the model spec's hyper grid.
// The grid search is rerun inside every evaluation.
double cv_loss(const PredictorSpec& spec, const Eigen::VectorXd& targets,
               const Eigen::MatrixXd& features, const FoldPlan& plan,
               const RngStream& rng);

// Per-grid-point CV losses, in resolve_grid order. cv_loss is the minimum.
std::vector<double> cv_losses_by_grid(const PredictorSpec& spec,
                                      const Eigen::VectorXd& targets,
                                      const Eigen::MatrixXd& features,
                                      const FoldPlan& plan,
                                      const RngStream& rng);

struct CvDiffConfig {
  PredictorSpec null_spec;
  PredictorSpec full_spec;
};

// CV error of the assignment-free model minus CV error of the model with
// the assignment; large positive values are evidence the assignment helps.
double cv_diff_statistic(const CvDiffConfig& config, const ExperimentData& data,
                         const Assignment& assignment, const FoldPlan& plan,
                         const RngStream& rng);

// Statistic scaled by the sample variance of the outcomes.
double sobol_index(double statistic, const Eigen::VectorXd& outcomes);

}  // namespace randomlab
