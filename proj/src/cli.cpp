#include "randomlab/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "randomlab/config.hpp"
#include "randomlab/sim.hpp"

namespace randomlab {

namespace {

// Option conflicts and missing inputs that should exit 2 rather than 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool passed(const CLI::App* sub, const std::string& name) {
  const CLI::Option* opt = sub->get_option_no_throw(name);
  return opt != nullptr && opt->count() > 0;
}

void emit(const RunOptions& opts, const std::string& text) {
  if (opts.out_path.empty())
    std::fputs(text.c_str(), stdout);
  else
    write_text_file(opts.out_path, text);
}

PredictorSpec default_model(FeatureRecipe recipe) {
  return PredictorSpec::forest(recipe);
}

int dispatch_test(const std::string& kind, const RunOptions& opts) {
  if (kind == "spillover" && opts.edges_path.empty())
    throw UsageError("adjacency required: pass --edges for spillover tests");

  ExperimentData data = load_csv(opts.data_path, opts.schema);
  if (!opts.edges_path.empty()) {
    data.network = load_edges(opts.edges_path, data.n(), opts.index_base);
    data.validate();
  }
  const Design design = resolve_design(opts.design, data);
  validate_design(design);

  const RngStream root(opts.seed);
  ResolvedTest resolved;
  resolved.kind = kind;
  resolved.design = design;
  TestResult result;

  if (kind == "global") {
    resolved.null_model =
        opts.null_model.value_or(default_model(FeatureRecipe::CovariatesOnly));
    resolved.full_model = opts.full_model.value_or(
        default_model(FeatureRecipe::CovariatesTreatment));
    result = test_global(data, design, *resolved.null_model,
                         *resolved.full_model, opts.R, opts.folds,
                         root.substream("test"), opts.workers);
  } else if (kind == "het") {
    resolved.null_model =
        opts.null_model.value_or(default_model(FeatureRecipe::CovariatesOnly));
    resolved.full_model = opts.full_model.value_or(
        default_model(FeatureRecipe::CovariatesTreatment));
    result = test_heterogeneity(data, design, *resolved.null_model,
                                *resolved.full_model, opts.het, opts.R,
                                opts.folds, root.substream("test"),
                                opts.workers);
  } else if (kind == "spillover") {
    std::vector<int> focal;
    if (opts.focal) {
      focal = *opts.focal;
      std::sort(focal.begin(), focal.end());
    } else if (!data.cluster_ids.empty()) {
      focal = half_controls_per_cluster(data, root.substream("focal"));
    } else {
      throw UsageError(
          "focal units required: provide \"focal\" in the config or a "
          "cluster column in the data");
    }
    resolved.null_model = opts.null_model.value_or(
        default_model(FeatureRecipe::CovariatesTreatment));
    resolved.full_model = opts.full_model.value_or(
        default_model(FeatureRecipe::CovariatesTreatmentExposure));
    result = test_spillover(data, design, focal, *resolved.null_model,
                            *resolved.full_model, opts.R, opts.folds,
                            root.substream("test"), opts.workers);
    resolved.focal = std::move(focal);
  } else {  // imbalance
    const ModelFamily family =
        opts.full_model ? opts.full_model->family : ModelFamily::Linear;
    result = test_imbalance(data, design, opts.covariate_index, opts.R,
                            opts.folds, root.substream("test"), opts.workers,
                            family);
    resolved.covariate_index = opts.covariate_index;
  }

  emit(opts, test_result_json(result, resolved, opts));
  if (!opts.null_dist_path.empty())
    write_null_dist_csv(opts.null_dist_path, result.randomized_statistics);
  return 0;
}

int dispatch_simulate(const RunOptions& opts) {
  StudySpec study = make_study(opts.study, opts.trees);
  const std::vector<CellResult> cells = run_study(
      study, opts.reps, opts.R, opts.alpha, opts.seed, opts.workers);
  write_report_csv(opts.out_path, cells);
  return 0;
}

int dispatch_power(const RunOptions& opts) {
  const ExperimentData data = load_csv(opts.data_path, opts.schema);
  RunOptions echo = opts;
  if (!echo.null_model)
    echo.null_model = default_model(FeatureRecipe::CovariatesOnly);
  if (!echo.full_model)
    echo.full_model = default_model(FeatureRecipe::CovariatesTreatment);
  const RngStream root(opts.seed);
  const DeltaEstimate estimate =
      estimate_delta(data, *echo.null_model, *echo.full_model, opts.folds,
                     root.substream("delta"));
  SampleSizeInput in;
  in.L = estimate.L_hat;
  in.M0 = estimate.M0_hat;
  in.k = estimate.k;
  in.target = opts.target;
  in.R = opts.R_factor;
  const long long n = sample_size(in);
  emit(opts, power_result_json(estimate, n, echo));
  return 0;
}

int dispatch_samplesize(const RunOptions& opts) {
  SampleSizeInput in;
  in.L = opts.L;
  in.M0 = opts.M0;
  in.k = opts.bound_k;
  in.target = opts.target;
  in.R = opts.R_factor;
  const long long n = sample_size(in);
  std::printf("%lld\n", n);
  if (!opts.out_path.empty())
    write_text_file(opts.out_path, samplesize_result_json(n, opts));
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"randomization tests with cross-validated prediction models"};
  app.require_subcommand(1);

  RunOptions opts;
  std::string config_path;
  std::string test_kind;
  double r_factor = 0.0;

  std::vector<std::string> studies = study_names();
  studies.push_back("fig1_heterog");

  CLI::App* test = app.add_subcommand(
      "test", "run one randomization test on a CSV dataset");
  test->add_option("kind", test_kind, "global|het|spillover|imbalance")
      ->required()
      ->check(CLI::IsMember({"global", "het", "spillover", "imbalance"}));
  test->add_option("--data", opts.data_path, "dataset CSV")->required();
  test->add_option("--edges", opts.edges_path, "adjacency edge list");
  test->add_option("--index-base", opts.index_base,
                   "unit indexing in the edge file")
      ->check(CLI::Range(0, 1));
  test->add_option("--config", config_path, "JSON config file");
  test->add_option("--R", opts.R, "randomization draws")
      ->check(CLI::Range(1, 1000000));
  test->add_option("--folds", opts.folds, "cross-validation folds")
      ->check(CLI::Range(2, 1000));
  test->add_option("--alpha", opts.alpha, "nominal level (echoed)")
      ->check(CLI::Range(1e-9, 1.0));
  test->add_option("--seed", opts.seed, "master seed");
  test->add_option("--workers", opts.workers, "worker threads")
      ->check(CLI::Range(1, 4096));
  test->add_option("--out", opts.out_path, "result JSON path");
  test->add_option("--emit-null-dist", opts.null_dist_path,
                   "write the randomized statistics to this CSV");

  CLI::App* simulate =
      app.add_subcommand("simulate", "run a replication study");
  simulate->add_option("--study", opts.study, "study name")
      ->required()
      ->check(CLI::IsMember(studies));
  simulate->add_option("--reps", opts.reps, "replications per effect value")
      ->check(CLI::Range(1, 1000000));
  simulate->add_option("--R", opts.R, "randomization draws")
      ->check(CLI::Range(1, 1000000));
  simulate->add_option("--alpha", opts.alpha, "rejection level")
      ->check(CLI::Range(1e-9, 1.0));
  simulate->add_option("--seed", opts.seed, "master seed");
  simulate->add_option("--workers", opts.workers, "worker threads")
      ->check(CLI::Range(1, 4096));
  simulate->add_option("--trees", opts.trees, "forest size for ML methods")
      ->check(CLI::Range(1, 100000));
  simulate->add_option("--config", config_path, "JSON config file");
  simulate->add_option("--out", opts.out_path, "report CSV path")->required();

  CLI::App* power = app.add_subcommand(
      "power", "estimate the signal on pilot data and size the experiment");
  power->add_option("--data", opts.data_path, "pilot dataset CSV")->required();
  power->add_option("--config", config_path, "JSON config file");
  power->add_option("--folds", opts.folds, "cross-validation folds")
      ->check(CLI::Range(2, 1000));
  power->add_option("--seed", opts.seed, "master seed");
  power->add_option("--target", opts.target, "type II error target")
      ->check(CLI::Range(1e-9, 1.0));
  power->add_option("--out", opts.out_path, "result JSON path");

  CLI::App* samplesize = app.add_subcommand(
      "samplesize", "smallest n meeting a type II error target");
  samplesize->add_option("--L", opts.L, "signal size")->required();
  samplesize->add_option("--M0", opts.M0, "loss bound")->required();
  samplesize->add_option("--k", opts.bound_k, "cross-validation folds")
      ->check(CLI::Range(2, 1000));
  samplesize->add_option("--target", opts.target, "type II error target")
      ->check(CLI::Range(1e-9, 1.0));
  samplesize->add_option("--R", r_factor,
                         "reinstate the randomization-count factor");
  samplesize->add_option("--config", config_path, "JSON config file");
  samplesize->add_option("--out", opts.out_path, "result JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();

  try {
    // Config file fills anything the command line left alone.
    if (!config_path.empty()) {
      RunOptions merged;
      apply_config_file(merged, config_path);
      if (passed(sub, "--data")) merged.data_path = opts.data_path;
      if (passed(sub, "--edges")) merged.edges_path = opts.edges_path;
      if (passed(sub, "--index-base")) merged.index_base = opts.index_base;
      if (passed(sub, "--R") && sub != samplesize) merged.R = opts.R;
      if (passed(sub, "--folds")) merged.folds = opts.folds;
      if (passed(sub, "--alpha")) merged.alpha = opts.alpha;
      if (passed(sub, "--seed")) merged.seed = opts.seed;
      if (passed(sub, "--workers")) merged.workers = opts.workers;
      if (passed(sub, "--study")) merged.study = opts.study;
      if (passed(sub, "--reps")) merged.reps = opts.reps;
      if (passed(sub, "--trees")) merged.trees = opts.trees;
      if (passed(sub, "--L")) merged.L = opts.L;
      if (passed(sub, "--M0")) merged.M0 = opts.M0;
      if (passed(sub, "--k")) merged.bound_k = opts.bound_k;
      if (passed(sub, "--target")) merged.target = opts.target;
      merged.out_path = opts.out_path;
      merged.null_dist_path = opts.null_dist_path;
      opts = std::move(merged);
    }
    if (sub == samplesize && passed(sub, "--R")) opts.R_factor = r_factor;

    if (sub == test) return dispatch_test(test_kind, opts);
    if (sub == simulate) return dispatch_simulate(opts);
    if (sub == power) return dispatch_power(opts);
    return dispatch_samplesize(opts);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace randomlab
