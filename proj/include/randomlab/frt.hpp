#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "randomlab/cv.hpp"
#include "randomlab/design.hpp"

namespace randomlab {

struct TestResult {
  double observed_statistic = 0.0;
  std::vector<double> randomized_statistics;
  int exceed_count = 0;  // draws strictly above the observed statistic
  int tie_count = 0;     // draws exactly equal to it
  double uniform_draw = 0.0;
  double p_value = 1.0;

  std::optional<double> delta_hat;
  std::optional<double> sobol;

  // heterogeneity extras
  std::vector<double> tau0_grid;
  std::vector<double> tau0_pvalues;
  std::optional<double> berger_boos_gamma;
  std::optional<double> sup_pvalue;  // before the Berger-Boos correction

  std::vector<int> focal;  // spillover extras
};

// One-sided randomized p-value: (#{t > T} + U * (1 + #{t == T})) / (1 + R),
// with U uniform on (0,1). Comparisons are exact on doubles.
double pvalue_from_pieces(double observed, const std::vector<double>& randomized,
                          double uniform_draw, int* exceed_count = nullptr,
                          int* tie_count = nullptr);

// A test statistic evaluated at one assignment; the stream is that
// evaluation's private randomness (forest fits and the like).
using StatisticFn =
    std::function<double(const Assignment& assignment, const RngStream& rng)>;

// Generic engine: evaluates the statistic at the observed assignment and at
// R fresh draws from the sampler, then forms the randomized p-value. All
// evaluations get independent streams derived from `rng`, so results do not
// depend on scheduling or worker count.
TestResult randomization_pvalue(const StatisticFn& statistic,
                                const Assignment& observed,
                                const AssignmentSampler& sampler, int R,
                                const RngStream& rng, int workers = 1);

// Does an assignment improve held-out prediction of the outcome beyond the
// covariates alone?
TestResult test_global(const ExperimentData& data, const Design& design,
                       const PredictorSpec& null_spec,
                       const PredictorSpec& full_spec, int R, int k,
                       const RngStream& rng, int workers = 1);

// Same test but with draws from a conditional design (focal- or
// imbalance-constrained).
TestResult test_global(const ExperimentData& data,
                       const ConditionalDesign& design,
                       const PredictorSpec& null_spec,
                       const PredictorSpec& full_spec, int R, int k,
                       const RngStream& rng, int workers = 1);

// Residualize the outcome on the covariates once, then test whether the
// assignment predicts the residuals.
TestResult test_residualized(const ExperimentData& data, const Design& design,
                             const PredictorSpec& covariate_spec, int R, int k,
                             const RngStream& rng, int workers = 1);

struct HetGrid {
  std::vector<double> tau0;  // explicit grid; empty means automatic
  int points = 41;
  double span_se = 5.0;  // automatic grid spans diff-in-means +/- span * SE
  std::optional<double> berger_boos_gamma;
};

// Constant-effect null: for each tau0 the treated outcomes are shifted by
// -tau0 and the global machinery is rerun; the reported p-value is the sup
// over the grid (plus gamma, capped at one, in Berger-Boos mode). One
// uniform tie-breaker and one set of assignment draws serve every tau0.
TestResult test_heterogeneity(const ExperimentData& data, const Design& design,
                              const PredictorSpec& null_spec,
                              const PredictorSpec& full_spec,
                              const HetGrid& grid, int R, int k,
                              const RngStream& rng, int workers = 1);

enum class HetStatistic { VarianceRatio, ShiftedKs };

// Same sup-over-tau0 scheme with a plug-in two-sample statistic instead of
// the CV difference.
TestResult test_heterogeneity_stat(const ExperimentData& data,
                                   const Design& design, HetStatistic stat,
                                   const HetGrid& grid, int R,
                                   const RngStream& rng, int workers = 1);

// Spillover test on a focal subset: models are fit on focal rows only, the
// exposure column is recomputed for each draw, and draws hold the focal
// units' treatments fixed at their observed values.
TestResult test_spillover(const ExperimentData& data, const Design& design,
                          const std::vector<int>& focal,
                          const PredictorSpec& null_spec,
                          const PredictorSpec& full_spec, int R, int k,
                          const RngStream& rng, int workers = 1);

// Covariate balance: covariate j is the outcome, the rest are predictors.
TestResult test_imbalance(const ExperimentData& data, const Design& design,
                          int covariate_index, int R, int k,
                          const RngStream& rng, int workers = 1,
                          ModelFamily family = ModelFamily::Linear);

// Reusable imbalance constraint for conditional randomization: runs the
// observed imbalance test once, then exposes q = observed p-value and a
// deterministic p-value function built from the same inner draws.
ImbalanceConstraint make_imbalance_constraint(const ExperimentData& data,
                                              const Design& design,
                                              int covariate_index, int inner_R,
                                              int k, const RngStream& rng,
                                              int max_attempts = 1000,
                                              ModelFamily family = ModelFamily::Linear);

// Comparison statistics.
double variance_ratio(const Eigen::VectorXd& outcomes, const Eigen::VectorXi& z);
double shifted_ks(const Eigen::VectorXd& outcomes, const Eigen::VectorXi& z,
                  double tau0);
double exposed_contrast(const ExperimentData& data, const Assignment& assignment,
                        const std::vector<int>& focal);
double neyman_t(const Eigen::VectorXd& outcomes, const Eigen::VectorXi& z);
double lin_t(const ExperimentData& data, const Assignment& assignment);

// FRT with an arbitrary assignment statistic under the given design.
TestResult test_with_statistic(const ExperimentData& data, const Design& design,
                               const StatisticFn& statistic, int R,
                               const RngStream& rng, int workers = 1);

// FRT for the exposed-vs-unexposed focal contrast under focal-conditional
// draws (the statistic's own natural randomization scheme).
TestResult test_exposed_contrast(const ExperimentData& data, const Design& design,
                                 const std::vector<int>& focal, int R,
                                 const RngStream& rng, int workers = 1);

// Difference in means and its large-sample standard error; used for the
// automatic tau0 grid and the Berger-Boos interval.
void diff_in_means(const Eigen::VectorXd& outcomes, const Eigen::VectorXi& z,
                   double* estimate, double* se);

}  // namespace randomlab
