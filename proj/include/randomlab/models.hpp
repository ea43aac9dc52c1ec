#pragma once

#include <Eigen/Dense>
#include <variant>
#include <vector>

#include "randomlab/dataset.hpp"
#include "randomlab/rng.hpp"

namespace randomlab {

enum class ModelFamily { Constant, Linear, LinearInteraction, RandomForest };

enum class FeatureRecipe {
  CovariatesOnly,
  CovariatesTreatment,
  CovariatesTreatmentExposure,
  TreatmentOnly,
  InterceptOnly,
  FullInteraction,  // covariates, treatment, treatment x covariates
};

enum class SplitRule { Variance };

struct ForestHyper {
  int mtry = 1;
  int min_node_size = 5;
  SplitRule rule = SplitRule::Variance;
};

struct PredictorSpec {
  ModelFamily family = ModelFamily::RandomForest;
  FeatureRecipe recipe = FeatureRecipe::CovariatesTreatment;

  // Forest knobs; ignored by the other families. Empty grid vectors resolve
  // to defaults once the feature count is known: mtry {ceil(f/3), f},
  // min_node_size {5}, rule {Variance}.
  int trees = 100;
  bool bootstrap = true;
  std::vector<int> grid_mtry;
  std::vector<int> grid_min_node_size;
  std::vector<SplitRule> grid_split_rule;

  static PredictorSpec constant();
  static PredictorSpec linear(FeatureRecipe recipe);
  static PredictorSpec linear_interaction();
  static PredictorSpec forest(FeatureRecipe recipe, int trees = 100);
};

// Hyper-parameter combinations to search over; a single placeholder entry
// for families without hyper-parameters.
std::vector<ForestHyper> resolve_grid(const PredictorSpec& spec, int n_features);

// Feature matrix layout: [covariates | treatment | exposure | interactions],
// restricted to whichever blocks the recipe requests. Exposure is the
// treated-neighbor count and requires the dataset's network.
Eigen::MatrixXd assemble_features(const ExperimentData& data,
                                  const Assignment& assignment,
                                  FeatureRecipe recipe);

struct ConstantModel {
  double value = 0.0;
};

struct LinearModel {
  Eigen::VectorXd beta;  // beta[0] is the intercept
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;
  double predict_row(const Eigen::MatrixXd& x, int row) const;
};

struct ForestModel {
  std::vector<Tree> trees;
};

using FittedModel = std::variant<ConstantModel, LinearModel, ForestModel>;

FittedModel fit_model(const PredictorSpec& spec, const ForestHyper& hyper,
                      const Eigen::MatrixXd& features,
                      const Eigen::VectorXd& targets, RngStream& rng);

Eigen::VectorXd predict(const FittedModel& model, const Eigen::MatrixXd& features);

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const std::vector<int>& rows);
Eigen::VectorXd select_rows(const Eigen::VectorXd& v, const std::vector<int>& rows);

}  // namespace randomlab
