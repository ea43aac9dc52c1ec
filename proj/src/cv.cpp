#include "randomlab/cv.hpp"

#include <algorithm>
#include <limits>

#include "randomlab/numeric.hpp"

namespace randomlab {

FoldPlan FoldPlan::create(int n, int k, RngStream rng) {
  check(k >= 2, "folds: need k >= 2");
  check(k <= n, "folds: need k <= n");
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  rng.shuffle(perm);
  FoldPlan plan;
  plan.k = k;
  plan.membership.assign(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    plan.membership[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] =
        i % k;
  }
  return plan;
}

std::vector<std::vector<int>> FoldPlan::fold_rows() const {
  std::vector<std::vector<int>> rows(static_cast<std::size_t>(k));
  for (int i = 0; i < n(); ++i) {
    rows[static_cast<std::size_t>(membership[static_cast<std::size_t>(i)])]
        .push_back(i);
  }
  return rows;
}

std::vector<double> cv_losses_by_grid(const PredictorSpec& spec,
                                      const Eigen::VectorXd& targets,
                                      const Eigen::MatrixXd& features,
                                      const FoldPlan& plan,
                                      const RngStream& rng) {
  const int n = static_cast<int>(targets.size());
  check(plan.n() == n, "cv: fold plan size does not match targets");
  check(features.rows() == n, "cv: feature rows do not match targets");

  const auto grid = resolve_grid(spec, static_cast<int>(features.cols()));
  const auto folds = plan.fold_rows();

  // Precompute per-fold train/test splits once; shared across grid points.
  std::vector<std::vector<int>> train_rows(static_cast<std::size_t>(plan.k));
  for (int j = 0; j < plan.k; ++j) {
    auto& train = train_rows[static_cast<std::size_t>(j)];
    train.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      if (plan.membership[static_cast<std::size_t>(i)] != j) train.push_back(i);
    }
    check(!folds[static_cast<std::size_t>(j)].empty(), "cv: empty fold");
    check(!train.empty(), "cv: empty training complement");
  }

  std::vector<double> losses;
  losses.reserve(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double total = 0.0;
    for (int j = 0; j < plan.k; ++j) {
      const auto& test = folds[static_cast<std::size_t>(j)];
      const auto& train = train_rows[static_cast<std::size_t>(j)];
      RngStream fit_rng = rng.substream(
          "fit", g * static_cast<std::size_t>(plan.k) + static_cast<std::size_t>(j));
      const FittedModel model =
          fit_model(spec, grid[g], select_rows(features, train),
                    select_rows(targets, train), fit_rng);
      const Eigen::VectorXd pred = predict(model, select_rows(features, test));
      const Eigen::VectorXd truth = select_rows(targets, test);
      total += (pred - truth).squaredNorm() / static_cast<double>(test.size());
    }
    losses.push_back(total / plan.k);
  }
  return losses;
}

double cv_loss(const PredictorSpec& spec, const Eigen::VectorXd& targets,
               const Eigen::MatrixXd& features, const FoldPlan& plan,
               const RngStream& rng) {
  const auto losses = cv_losses_by_grid(spec, targets, features, plan, rng);
  return *std::min_element(losses.begin(), losses.end());
}

double cv_diff_statistic(const CvDiffConfig& config, const ExperimentData& data,
                         const Assignment& assignment, const FoldPlan& plan,
                         const RngStream& rng) {
  // Both models share one stream: per-(grid, fold) fit streams then coincide,
  // so identical specs produce identical losses and the difference collapses
  // to exactly zero, forests included.
  const RngStream model_rng = rng.substream("models");
  const double null_loss =
      cv_loss(config.null_spec, data.outcomes,
              assemble_features(data, assignment, config.null_spec.recipe), plan,
              model_rng);
  const double full_loss =
      cv_loss(config.full_spec, data.outcomes,
              assemble_features(data, assignment, config.full_spec.recipe), plan,
              model_rng);
  return null_loss - full_loss;
}

double sobol_index(double statistic, const Eigen::VectorXd& outcomes) {
  check(outcomes.size() >= 2, "sobol index: need at least two outcomes");
  std::vector<double> y(outcomes.data(), outcomes.data() + outcomes.size());
  const double var = sample_variance(y);
  check(var > 0.0, "sobol index: zero outcome variance");
  return statistic / var;
}

}  // namespace randomlab
