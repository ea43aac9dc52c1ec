#include "randomlab/frt.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "randomlab/numeric.hpp"
#include "randomlab/parallel.hpp"

namespace randomlab {
namespace {

bool recipe_uses_assignment(FeatureRecipe recipe) {
  return recipe != FeatureRecipe::CovariatesOnly &&
         recipe != FeatureRecipe::InterceptOnly;
}

std::vector<double> to_vector(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

void split_groups(const Eigen::VectorXd& y, const Eigen::VectorXi& z,
                  std::vector<double>* treated, std::vector<double>* control) {
  check(y.size() == z.size(), "statistic: outcome/assignment length mismatch");
  for (int i = 0; i < y.size(); ++i) {
    (z[i] == 1 ? treated : control)->push_back(y[i]);
  }
  check(!treated->empty(), "statistic: no treated units");
  check(!control->empty(), "statistic: no control units");
}

}  // namespace

double pvalue_from_pieces(double observed, const std::vector<double>& randomized,
                          double uniform_draw, int* exceed_count,
                          int* tie_count) {
  check(!randomized.empty(), "p-value: no randomized statistics");
  check(uniform_draw > 0.0 && uniform_draw <= 1.0,
        "p-value: tie-break uniform must lie in (0,1]");
  int exceed = 0, ties = 0;
  for (double t : randomized) {
    if (t > observed) ++exceed;
    else if (t == observed) ++ties;
  }
  if (exceed_count) *exceed_count = exceed;
  if (tie_count) *tie_count = ties;
  const int R = static_cast<int>(randomized.size());
  return (exceed + uniform_draw * (1.0 + ties)) / (1.0 + R);
}

TestResult randomization_pvalue(const StatisticFn& statistic,
                                const Assignment& observed,
                                const AssignmentSampler& sampler, int R,
                                const RngStream& rng, int workers) {
  check(R >= 1, "randomization test: need R >= 1");
  TestResult result;
  result.uniform_draw = rng.substream("tiebreak").uniform();

  std::vector<double> values(static_cast<std::size_t>(R) + 1, 0.0);
  parallel_for(static_cast<std::size_t>(R) + 1, workers, [&](std::size_t r) {
    const RngStream stat_rng = rng.substream("stat", r);
    if (r == 0) {
      values[0] = statistic(observed, stat_rng);
    } else {
      RngStream draw_rng = rng.substream("draw", r);
      const Assignment z = sampler(draw_rng);
      values[r] = statistic(z, stat_rng);
    }
  });

  result.observed_statistic = values[0];
  result.randomized_statistics.assign(values.begin() + 1, values.end());
  result.p_value =
      pvalue_from_pieces(result.observed_statistic, result.randomized_statistics,
                         result.uniform_draw, &result.exceed_count,
                         &result.tie_count);
  return result;
}

namespace {

// Shared implementation for global-style CV tests: the null model's CV loss
// is cached when its features do not involve the assignment, which is the
// usual configuration (and the only way it enters the difference).
TestResult global_cv_test(const ExperimentData& data,
                          const AssignmentSampler& sampler, int design_units,
                          const PredictorSpec& null_spec,
                          const PredictorSpec& full_spec, int R, int k,
                          const RngStream& rng, int workers) {
  data.validate();
  check(design_units == data.n(), "test: design size does not match dataset");
  const FoldPlan plan = FoldPlan::create(data.n(), k, rng.substream("folds"));

  const bool cache_null = !recipe_uses_assignment(null_spec.recipe);
  double cached_null_loss = 0.0;
  if (cache_null) {
    cached_null_loss =
        cv_loss(null_spec, data.outcomes,
                assemble_features(data, data.observed(), null_spec.recipe), plan,
                rng.substream("cv-null"));
  }

  StatisticFn statistic = [&, cache_null, cached_null_loss](
                              const Assignment& z, const RngStream& stat_rng) {
    const double null_loss =
        cache_null ? cached_null_loss
                   : cv_loss(null_spec, data.outcomes,
                             assemble_features(data, z, null_spec.recipe), plan,
                             stat_rng.substream("m0"));
    const double full_loss =
        cv_loss(full_spec, data.outcomes,
                assemble_features(data, z, full_spec.recipe), plan,
                stat_rng.substream("m1"));
    return null_loss - full_loss;
  };

  TestResult result =
      randomization_pvalue(statistic, data.observed(), sampler, R, rng, workers);
  result.delta_hat = result.observed_statistic;
  result.sobol = sobol_index(result.observed_statistic, data.outcomes);
  return result;
}

}  // namespace

TestResult test_global(const ExperimentData& data, const Design& design,
                       const PredictorSpec& null_spec,
                       const PredictorSpec& full_spec, int R, int k,
                       const RngStream& rng, int workers) {
  return global_cv_test(data, make_sampler(design), design_n(design), null_spec,
                        full_spec, R, k, rng, workers);
}

TestResult test_global(const ExperimentData& data,
                       const ConditionalDesign& design,
                       const PredictorSpec& null_spec,
                       const PredictorSpec& full_spec, int R, int k,
                       const RngStream& rng, int workers) {
  return global_cv_test(data, make_sampler(design), design_n(design.base),
                        null_spec, full_spec, R, k, rng, workers);
}

TestResult test_residualized(const ExperimentData& data, const Design& design,
                             const PredictorSpec& covariate_spec, int R, int k,
                             const RngStream& rng, int workers) {
  data.validate();
  check(design_n(design) == data.n(), "test: design size does not match dataset");
  check(!recipe_uses_assignment(covariate_spec.recipe),
        "residualized test: covariate model must not use the assignment");
  const FoldPlan plan = FoldPlan::create(data.n(), k, rng.substream("folds"));

  // Step one: fit the outcome on covariates once, on the full observed data.
  // When the predictor spec carries a hyper grid, pick the entry with the best CV loss
  // under the same fold plan, then refit on everything.
  const Eigen::MatrixXd base_features =
      assemble_features(data, data.observed(), covariate_spec.recipe);
  const auto grid =
      resolve_grid(covariate_spec, static_cast<int>(base_features.cols()));
  std::size_t best = 0;
  if (grid.size() > 1) {
    const auto losses = cv_losses_by_grid(covariate_spec, data.outcomes,
                                          base_features, plan,
                                          rng.substream("tune"));
    best = static_cast<std::size_t>(
        std::min_element(losses.begin(), losses.end()) - losses.begin());
  }
  RngStream fit_rng = rng.substream("residual-fit");
  const FittedModel base_model = fit_model(covariate_spec, grid[best],
                                           base_features, data.outcomes, fit_rng);
  const Eigen::VectorXd residuals =
      data.outcomes - predict(base_model, base_features);

  const PredictorSpec const_spec = PredictorSpec::constant();
  const PredictorSpec shift_spec =
      PredictorSpec::linear(FeatureRecipe::TreatmentOnly);
  const Eigen::MatrixXd no_features(data.n(), 0);
  const double null_loss = cv_loss(const_spec, residuals, no_features, plan,
                                   rng.substream("cv-null"));

  StatisticFn statistic = [&](const Assignment& z, const RngStream& stat_rng) {
    Eigen::MatrixXd zcol(data.n(), 1);
    zcol.col(0) = z.z.cast<double>();
    return null_loss -
           cv_loss(shift_spec, residuals, zcol, plan, stat_rng.substream("m1"));
  };

  TestResult result = randomization_pvalue(statistic, data.observed(),
                                           make_sampler(design), R, rng, workers);
  result.delta_hat = result.observed_statistic;
  result.sobol = sobol_index(result.observed_statistic, residuals);
  return result;
}

void diff_in_means(const Eigen::VectorXd& outcomes, const Eigen::VectorXi& z,
                   double* estimate, double* se) {
  std::vector<double> treated, control;
  split_groups(outcomes, z, &treated, &control);
  check(treated.size() >= 2, "diff-in-means: need two treated units for the SE");
  check(control.size() >= 2, "diff-in-means: need two control units for the SE");
  *estimate = mean_of(treated) - mean_of(control);
  *se = std::sqrt(sample_variance(treated) / static_cast<double>(treated.size()) +
                  sample_variance(control) / static_cast<double>(control.size()));
}

namespace {

std::vector<double> resolve_tau0_grid(const ExperimentData& data,
                                      const HetGrid& grid, double* gamma_out,
                                      double* dim_out) {
  std::vector<double> taus = grid.tau0;
  double dim = 0.0, se = 0.0;
  diff_in_means(data.outcomes, data.treatments, &dim, &se);
  if (dim_out) *dim_out = dim;

  if (taus.empty()) {
    check(grid.points >= 1, "heterogeneity: grid needs at least one point");
    const double lo = dim - grid.span_se * se;
    const double hi = dim + grid.span_se * se;
    if (grid.points == 1 || lo == hi) {
      taus.push_back(dim);
    } else {
      for (int i = 0; i < grid.points; ++i) {
        taus.push_back(lo + (hi - lo) * i / (grid.points - 1));
      }
    }
  }

  if (grid.berger_boos_gamma.has_value()) {
    const double gamma = *grid.berger_boos_gamma;
    check(gamma > 0.0 && gamma < 1.0,
          "heterogeneity: Berger-Boos gamma must be in (0,1)");
    if (gamma_out) *gamma_out = gamma;
    const double zq = normal_quantile(1.0 - gamma / 2.0);
    const double lo = dim - zq * se;
    const double hi = dim + zq * se;
    std::vector<double> inside;
    for (double t : taus) {
      if (t >= lo && t <= hi) inside.push_back(t);
    }
    inside.push_back(lo);
    inside.push_back(hi);
    std::sort(inside.begin(), inside.end());
    inside.erase(std::unique(inside.begin(), inside.end()), inside.end());
    taus = std::move(inside);
  }

  std::sort(taus.begin(), taus.end());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
  check(!taus.empty(), "heterogeneity: empty tau0 grid");
  return taus;
}

// Shared sup-over-tau0 engine. build_stat(adjusted outcomes, tau index)
// returns the statistic function used at that grid point; draws and the
// tie-break uniform are shared across the whole grid.
TestResult het_engine(
    const ExperimentData& data, const Design& design, const HetGrid& grid,
    int R, const RngStream& rng, int workers,
    const std::function<StatisticFn(const Eigen::VectorXd&, std::size_t)>&
        build_stat) {
  data.validate();
  check(design_n(design) == data.n(), "test: design size does not match dataset");
  check(R >= 1, "randomization test: need R >= 1");

  double gamma = 0.0, dim = 0.0;
  const std::vector<double> taus = resolve_tau0_grid(data, grid, &gamma, &dim);
  const std::size_t T = taus.size();

  const double uniform_draw = rng.substream("tiebreak").uniform();

  // One shared set of draws; assignments do not depend on tau0.
  std::vector<Assignment> draws(static_cast<std::size_t>(R));
  for (int r = 1; r <= R; ++r) {
    RngStream draw_rng = rng.substream("draw", static_cast<std::uint64_t>(r));
    draws[static_cast<std::size_t>(r - 1)] = draw(design, draw_rng);
  }

  std::vector<Eigen::VectorXd> adjusted(T);
  const Eigen::VectorXd zd = data.treatments.cast<double>();
  for (std::size_t ti = 0; ti < T; ++ti) {
    adjusted[ti] = data.outcomes - taus[ti] * zd;
  }
  std::vector<StatisticFn> stats(T);
  for (std::size_t ti = 0; ti < T; ++ti) stats[ti] = build_stat(adjusted[ti], ti);

  const Assignment observed = data.observed();
  std::vector<std::vector<double>> values(
      T, std::vector<double>(static_cast<std::size_t>(R) + 1, 0.0));
  parallel_for(T * (static_cast<std::size_t>(R) + 1), workers,
               [&](std::size_t job) {
                 const std::size_t ti = job / (static_cast<std::size_t>(R) + 1);
                 const std::size_t r = job % (static_cast<std::size_t>(R) + 1);
                 const RngStream stat_rng =
                     rng.substream("stat", ti * (static_cast<std::size_t>(R) + 1) + r);
                 const Assignment& z = r == 0 ? observed : draws[r - 1];
                 values[ti][r] = stats[ti](z, stat_rng);
               });

  std::vector<double> pvals(T);
  for (std::size_t ti = 0; ti < T; ++ti) {
    const std::vector<double> randomized(values[ti].begin() + 1,
                                         values[ti].end());
    pvals[ti] = pvalue_from_pieces(values[ti][0], randomized, uniform_draw);
  }
  const std::size_t best = static_cast<std::size_t>(
      std::max_element(pvals.begin(), pvals.end()) - pvals.begin());

  TestResult result;
  result.uniform_draw = uniform_draw;
  result.observed_statistic = values[best][0];
  result.randomized_statistics.assign(values[best].begin() + 1,
                                      values[best].end());
  result.p_value = pvalue_from_pieces(result.observed_statistic,
                                      result.randomized_statistics, uniform_draw,
                                      &result.exceed_count, &result.tie_count);
  result.tau0_grid = taus;
  result.tau0_pvalues = pvals;
  result.delta_hat = result.observed_statistic;
  if (grid.berger_boos_gamma.has_value()) {
    result.berger_boos_gamma = gamma;
    result.sup_pvalue = result.p_value;
    result.p_value = std::min(1.0, result.p_value + gamma);
  }
  return result;
}

}  // namespace

TestResult test_heterogeneity(const ExperimentData& data, const Design& design,
                              const PredictorSpec& null_spec,
                              const PredictorSpec& full_spec,
                              const HetGrid& grid, int R, int k,
                              const RngStream& rng, int workers) {
  const FoldPlan plan = FoldPlan::create(data.n(), k, rng.substream("folds"));
  const bool cache_null = !recipe_uses_assignment(null_spec.recipe);

  // The null model's CV loss depends on tau0 through the shifted outcomes
  // but not on the draw, so it is computed once per grid point.
  auto build_stat = [&, cache_null](const Eigen::VectorXd& adjusted,
                                    std::size_t ti) -> StatisticFn {
    double cached = 0.0;
    if (cache_null) {
      cached = cv_loss(null_spec, adjusted,
                       assemble_features(data, data.observed(), null_spec.recipe),
                       plan, rng.substream("cv-null", ti));
    }
    return [&, cached, cache_null, adjusted](const Assignment& z,
                                             const RngStream& stat_rng) {
      const double null_loss =
          cache_null
              ? cached
              : cv_loss(null_spec, adjusted,
                        assemble_features(data, z, null_spec.recipe), plan,
                        stat_rng.substream("m0"));
      const double full_loss =
          cv_loss(full_spec, adjusted,
                  assemble_features(data, z, full_spec.recipe), plan,
                  stat_rng.substream("m1"));
      return null_loss - full_loss;
    };
  };

  return het_engine(data, design, grid, R, rng, workers, build_stat);
}

TestResult test_heterogeneity_stat(const ExperimentData& data,
                                   const Design& design, HetStatistic stat,
                                   const HetGrid& grid, int R,
                                   const RngStream& rng, int workers) {
  auto build_stat = [&](const Eigen::VectorXd& adjusted,
                        std::size_t) -> StatisticFn {
    if (stat == HetStatistic::VarianceRatio) {
      return [adjusted](const Assignment& z, const RngStream&) {
        return variance_ratio(adjusted, z.z);
      };
    }
    return [adjusted](const Assignment& z, const RngStream&) {
      return shifted_ks(adjusted, z.z, 0.0);
    };
  };
  return het_engine(data, design, grid, R, rng, workers, build_stat);
}

TestResult test_spillover(const ExperimentData& data, const Design& design,
                          const std::vector<int>& focal,
                          const PredictorSpec& null_spec,
                          const PredictorSpec& full_spec, int R, int k,
                          const RngStream& rng, int workers) {
  data.validate();
  check(design_n(design) == data.n(), "test: design size does not match dataset");
  check(data.network.has_value(), "spillover test: adjacency required");
  check(!focal.empty(), "spillover test: empty focal set");
  std::vector<int> focal_sorted = focal;
  std::sort(focal_sorted.begin(), focal_sorted.end());
  check(std::unique(focal_sorted.begin(), focal_sorted.end()) ==
            focal_sorted.end(),
        "spillover test: duplicate focal index");
  check(focal_sorted.front() >= 0 && focal_sorted.back() < data.n(),
        "spillover test: focal index out of range");

  const FoldPlan plan = FoldPlan::create(static_cast<int>(focal_sorted.size()), k,
                                         rng.substream("folds"));
  const Eigen::VectorXd y_focal = select_rows(data.outcomes, focal_sorted);

  // On focal rows the treatment entries never change across conditional
  // draws, so any exposure-free null model can be evaluated once.
  const bool cache_null =
      null_spec.recipe != FeatureRecipe::CovariatesTreatmentExposure;
  double cached_null_loss = 0.0;
  if (cache_null) {
    cached_null_loss = cv_loss(
        null_spec, y_focal,
        select_rows(assemble_features(data, data.observed(), null_spec.recipe),
                    focal_sorted),
        plan, rng.substream("cv-null"));
  }

  StatisticFn statistic = [&, cache_null, cached_null_loss](
                              const Assignment& z, const RngStream& stat_rng) {
    const double null_loss =
        cache_null
            ? cached_null_loss
            : cv_loss(null_spec, y_focal,
                      select_rows(assemble_features(data, z, null_spec.recipe),
                                  focal_sorted),
                      plan, stat_rng.substream("m0"));
    const double full_loss =
        cv_loss(full_spec, y_focal,
                select_rows(assemble_features(data, z, full_spec.recipe),
                            focal_sorted),
                plan, stat_rng.substream("m1"));
    return null_loss - full_loss;
  };

  ConditionalDesign conditional{design,
                                FocalConstraint{focal_sorted, data.treatments}};
  TestResult result = randomization_pvalue(statistic, data.observed(),
                                           make_sampler(conditional), R, rng,
                                           workers);
  result.delta_hat = result.observed_statistic;
  result.sobol = sobol_index(result.observed_statistic, y_focal);
  result.focal = focal_sorted;
  return result;
}

namespace {

ExperimentData imbalance_view(const ExperimentData& data, int j) {
  check(data.p() >= 1, "imbalance test: no covariates");
  check(j >= 0 && j < data.p(), "imbalance test: covariate index out of range");
  Eigen::MatrixXd rest(data.n(), data.p() - 1);
  int c = 0;
  for (int col = 0; col < data.p(); ++col) {
    if (col == j) continue;
    rest.col(c++) = data.covariates.col(col);
  }
  ExperimentData view;
  view.outcomes = data.covariates.col(j);
  view.treatments = data.treatments;
  view.covariates = std::move(rest);
  return view;
}

void imbalance_specs(const ExperimentData& view, ModelFamily family,
                     PredictorSpec* null_spec, PredictorSpec* full_spec) {
  if (view.p() == 0) {
    *null_spec = PredictorSpec::constant();
    PredictorSpec full;
    full.family = family == ModelFamily::Constant ? ModelFamily::Linear : family;
    full.recipe = FeatureRecipe::TreatmentOnly;
    *full_spec = full;
  } else {
    PredictorSpec null_s;
    null_s.family = family;
    null_s.recipe = FeatureRecipe::CovariatesOnly;
    PredictorSpec full_s;
    full_s.family = family;
    full_s.recipe = FeatureRecipe::CovariatesTreatment;
    *null_spec = null_s;
    *full_spec = full_s;
  }
}

}  // namespace

TestResult test_imbalance(const ExperimentData& data, const Design& design,
                          int covariate_index, int R, int k,
                          const RngStream& rng, int workers,
                          ModelFamily family) {
  const ExperimentData view = imbalance_view(data, covariate_index);
  PredictorSpec null_spec, full_spec;
  imbalance_specs(view, family, &null_spec, &full_spec);
  return global_cv_test(view, make_sampler(design), design_n(design), null_spec,
                        full_spec, R, k, rng, workers);
}

ImbalanceConstraint make_imbalance_constraint(const ExperimentData& data,
                                              const Design& design,
                                              int covariate_index, int inner_R,
                                              int k, const RngStream& rng,
                                              int max_attempts,
                                              ModelFamily family) {
  // The returned p-value function reuses the inner draws, fold plan, and
  // tie-break uniform from this one observed test, so it is a deterministic
  // function of the candidate assignment. In particular it maps the observed
  // assignment back to exactly the threshold.
  const ExperimentData view = imbalance_view(data, covariate_index);
  PredictorSpec null_spec, full_spec;
  imbalance_specs(view, family, &null_spec, &full_spec);

  const TestResult observed = global_cv_test(view, make_sampler(design),
                                             design_n(design), null_spec,
                                             full_spec, inner_R, k, rng, 1);

  const FoldPlan plan = FoldPlan::create(view.n(), k, rng.substream("folds"));
  const bool cache_null = !recipe_uses_assignment(null_spec.recipe);
  double cached_null_loss = 0.0;
  if (cache_null) {
    cached_null_loss =
        cv_loss(null_spec, view.outcomes,
                assemble_features(view, view.observed(), null_spec.recipe), plan,
                rng.substream("cv-null"));
  }

  auto shared_view = std::make_shared<ExperimentData>(view);
  auto shared = std::make_shared<TestResult>(observed);
  ImbalanceConstraint constraint;
  constraint.covariate_index = covariate_index;
  constraint.threshold = observed.p_value;
  constraint.max_attempts = max_attempts;
  constraint.pvalue = [shared_view, shared, plan, null_spec, full_spec,
                       cache_null, cached_null_loss,
                       rng](const Assignment& z) {
    const RngStream stat_rng = rng.substream("stat", 0);
    const double null_loss =
        cache_null
            ? cached_null_loss
            : cv_loss(null_spec, shared_view->outcomes,
                      assemble_features(*shared_view, z, null_spec.recipe), plan,
                      stat_rng.substream("m0"));
    const double full_loss =
        cv_loss(full_spec, shared_view->outcomes,
                assemble_features(*shared_view, z, full_spec.recipe), plan,
                stat_rng.substream("m1"));
    const double stat = null_loss - full_loss;
    return pvalue_from_pieces(stat, shared->randomized_statistics,
                              shared->uniform_draw);
  };
  return constraint;
}

double variance_ratio(const Eigen::VectorXd& outcomes, const Eigen::VectorXi& z) {
  std::vector<double> treated, control;
  split_groups(outcomes, z, &treated, &control);
  check(treated.size() >= 2 && control.size() >= 2,
        "variance ratio: each group needs at least two units");
  const double v0 = sample_variance(control);
  check(v0 > 0.0, "variance ratio: zero control variance");
  return sample_variance(treated) / v0;
}

double shifted_ks(const Eigen::VectorXd& outcomes, const Eigen::VectorXi& z,
                  double tau0) {
  std::vector<double> treated, control;
  split_groups(outcomes, z, &treated, &control);
  for (double& c : control) c += tau0;
  return ks_distance(std::move(treated), std::move(control));
}

double exposed_contrast(const ExperimentData& data, const Assignment& assignment,
                        const std::vector<int>& focal) {
  check(data.network.has_value(), "exposed contrast: adjacency required");
  check(!focal.empty(), "exposed contrast: empty focal set");
  const Eigen::VectorXd expo = data.network->exposures(assignment.z);
  std::vector<double> exposed, unexposed;
  for (int i : focal) {
    (expo[i] >= 1.0 ? exposed : unexposed).push_back(data.outcomes[i]);
  }
  check(!exposed.empty(), "exposed contrast: no exposed focal units");
  check(!unexposed.empty(), "exposed contrast: no unexposed focal units");
  return mean_of(exposed) - mean_of(unexposed);
}

double neyman_t(const Eigen::VectorXd& outcomes, const Eigen::VectorXi& z) {
  double estimate = 0.0, se = 0.0;
  diff_in_means(outcomes, z, &estimate, &se);
  check(se > 0.0, "neyman t: zero variance in studentization");
  return estimate / se;
}

double lin_t(const ExperimentData& data, const Assignment& assignment) {
  const int n = data.n();
  const int p = data.p();
  check(assignment.n() == n, "lin t: assignment length mismatch");

  Eigen::MatrixXd xc = data.covariates;
  for (int j = 0; j < p; ++j) {
    xc.col(j).array() -= xc.col(j).mean();
  }
  const Eigen::VectorXd zd = assignment.z.cast<double>();
  Eigen::MatrixXd a(n, 2 + 2 * p);
  a.col(0).setOnes();
  a.col(1) = zd;
  for (int j = 0; j < p; ++j) {
    a.col(2 + j) = xc.col(j);
    a.col(2 + p + j) = xc.col(j).cwiseProduct(zd);
  }

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
  check(cod.rank() == a.cols(),
        "lin t: degenerate regression in studentization");
  const Eigen::MatrixXd gram = a.transpose() * a;
  const Eigen::MatrixXd gram_inv =
      gram.llt().solve(Eigen::MatrixXd::Identity(a.cols(), a.cols()));
  const Eigen::VectorXd beta = gram_inv * (a.transpose() * data.outcomes);
  const Eigen::VectorXd resid = data.outcomes - a * beta;

  // HC2 sandwich for the treatment coefficient.
  Eigen::VectorXd meat_weights(n);
  for (int i = 0; i < n; ++i) {
    const double h = a.row(i) * gram_inv * a.row(i).transpose();
    check(h < 1.0 - 1e-12, "lin t: leverage one in studentization");
    meat_weights[i] = resid[i] * resid[i] / (1.0 - h);
  }
  const Eigen::MatrixXd meat =
      a.transpose() * meat_weights.asDiagonal() * a;
  const Eigen::MatrixXd cov = gram_inv * meat * gram_inv;
  const double var = cov(1, 1);
  check(std::isfinite(var) && var > 0.0,
        "lin t: zero variance in studentization");
  return beta[1] / std::sqrt(var);
}

TestResult test_with_statistic(const ExperimentData& data, const Design& design,
                               const StatisticFn& statistic, int R,
                               const RngStream& rng, int workers) {
  data.validate();
  check(design_n(design) == data.n(), "test: design size does not match dataset");
  return randomization_pvalue(statistic, data.observed(), make_sampler(design),
                              R, rng, workers);
}

TestResult test_exposed_contrast(const ExperimentData& data, const Design& design,
                                 const std::vector<int>& focal, int R,
                                 const RngStream& rng, int workers) {
  data.validate();
  check(design_n(design) == data.n(), "test: design size does not match dataset");
  std::vector<int> focal_sorted = focal;
  std::sort(focal_sorted.begin(), focal_sorted.end());
  StatisticFn statistic = [&data, focal_sorted](const Assignment& z,
                                                const RngStream&) {
    return exposed_contrast(data, z, focal_sorted);
  };
  ConditionalDesign conditional{design,
                                FocalConstraint{focal_sorted, data.treatments}};
  TestResult result = randomization_pvalue(statistic, data.observed(),
                                           make_sampler(conditional), R, rng,
                                           workers);
  result.focal = focal_sorted;
  return result;
}

}  // namespace randomlab
