#include "randomlab/config.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace randomlab {

using nlohmann::json;

namespace {

std::string family_name(ModelFamily family) {
  switch (family) {
    case ModelFamily::Constant: return "constant";
    case ModelFamily::Linear: return "linear";
    case ModelFamily::LinearInteraction: return "linear_interaction";
    case ModelFamily::RandomForest: return "forest";
  }
  fail("config: unknown model family");
}

ModelFamily family_from_name(const std::string& name) {
  if (name == "constant") return ModelFamily::Constant;
  if (name == "linear") return ModelFamily::Linear;
  if (name == "linear_interaction") return ModelFamily::LinearInteraction;
  if (name == "forest") return ModelFamily::RandomForest;
  fail("config: unknown model family '" + name + "'");
}

std::string recipe_name(FeatureRecipe recipe) {
  switch (recipe) {
    case FeatureRecipe::CovariatesOnly: return "covariates_only";
    case FeatureRecipe::CovariatesTreatment: return "covariates_treatment";
    case FeatureRecipe::CovariatesTreatmentExposure:
      return "covariates_treatment_exposure";
    case FeatureRecipe::TreatmentOnly: return "treatment_only";
    case FeatureRecipe::InterceptOnly: return "intercept_only";
    case FeatureRecipe::FullInteraction: return "full_interaction";
  }
  fail("config: unknown feature recipe");
}

FeatureRecipe recipe_from_name(const std::string& name) {
  if (name == "covariates_only") return FeatureRecipe::CovariatesOnly;
  if (name == "covariates_treatment") return FeatureRecipe::CovariatesTreatment;
  if (name == "covariates_treatment_exposure")
    return FeatureRecipe::CovariatesTreatmentExposure;
  if (name == "treatment_only") return FeatureRecipe::TreatmentOnly;
  if (name == "intercept_only") return FeatureRecipe::InterceptOnly;
  if (name == "full_interaction") return FeatureRecipe::FullInteraction;
  fail("config: unknown feature recipe '" + name + "'");
}

void reject_unknown_keys(const json& j, const std::string& where,
                         std::initializer_list<const char*> allowed) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* key : allowed)
      if (item.key() == key) ok = true;
    check(ok, "config: unknown key '" + item.key() + "' in " + where);
  }
}

PredictorSpec predictor_from_json(const json& j, const std::string& where) {
  reject_unknown_keys(j, where, {"family", "recipe", "trees", "bootstrap",
                                 "mtry", "min_node_size"});
  PredictorSpec spec;
  spec.family = family_from_name(j.value("family", std::string("forest")));
  spec.recipe =
      recipe_from_name(j.value("recipe", std::string("covariates_treatment")));
  spec.trees = j.value("trees", spec.trees);
  spec.bootstrap = j.value("bootstrap", spec.bootstrap);
  if (j.contains("mtry")) spec.grid_mtry = j["mtry"].get<std::vector<int>>();
  if (j.contains("min_node_size"))
    spec.grid_min_node_size = j["min_node_size"].get<std::vector<int>>();
  return spec;
}

json predictor_to_json(const PredictorSpec& spec) {
  json j;
  j["family"] = family_name(spec.family);
  j["recipe"] = recipe_name(spec.recipe);
  if (spec.family == ModelFamily::RandomForest) {
    j["trees"] = spec.trees;
    j["bootstrap"] = spec.bootstrap;
    j["mtry"] = spec.grid_mtry;            // empty means per-fit defaults
    j["min_node_size"] = spec.grid_min_node_size;
  }
  return j;
}

json design_to_json(const Design& design) {
  json j;
  if (const auto* b = std::get_if<BernoulliDesign>(&design)) {
    j["kind"] = "bernoulli";
    j["pi"] = b->pi;
  } else if (const auto* c = std::get_if<CompleteDesign>(&design)) {
    j["kind"] = "complete";
    j["m"] = c->m;
  } else {
    const auto& t = std::get<TwoStageClusterDesign>(design);
    j["kind"] = "two_stage_cluster";
    j["cluster_fraction"] = t.cluster_fraction;
    j["treated_per_cluster"] = t.treated_per_cluster;
    j["clusters"] = static_cast<int>(t.clusters.size());
  }
  return j;
}

json het_to_json(const HetGrid& het) {
  json j;
  j["points"] = het.points;
  j["span_se"] = het.span_se;
  j["tau0"] = het.tau0;
  j["berger_boos_gamma"] =
      het.berger_boos_gamma ? json(*het.berger_boos_gamma) : json(nullptr);
  return j;
}

json schema_to_json(const CsvSchema& schema) {
  json j;
  j["outcome"] = schema.outcome;
  j["treatment"] = schema.treatment;
  j["covariates"] = schema.covariates;  // empty means all remaining columns
  j["cluster"] = schema.cluster;
  return j;
}

json config_echo(const ResolvedTest& resolved, const RunOptions& opts) {
  json j;
  j["data"] = opts.data_path;
  if (!opts.edges_path.empty()) {
    j["edges"] = opts.edges_path;
    j["index_base"] = opts.index_base;
  }
  j["schema"] = schema_to_json(opts.schema);
  j["design"] = design_to_json(resolved.design);
  if (resolved.null_model) j["null_model"] = predictor_to_json(*resolved.null_model);
  if (resolved.full_model) j["full_model"] = predictor_to_json(*resolved.full_model);
  if (resolved.kind == "het") j["het"] = het_to_json(opts.het);
  if (resolved.covariate_index) j["covariate_index"] = *resolved.covariate_index;
  j["R"] = opts.R;
  j["folds"] = opts.folds;
  j["alpha"] = opts.alpha;
  j["seed"] = opts.seed;
  return j;
}

}  // namespace

Design resolve_design(const DesignConfig& config, const ExperimentData& data) {
  if (config.kind == "bernoulli") return BernoulliDesign{data.n(), config.pi};
  if (config.kind == "complete") {
    const int m = config.m ? *config.m : data.observed().treated_count();
    return CompleteDesign{data.n(), m};
  }
  if (config.kind == "two_stage_cluster") {
    check(!data.cluster_ids.empty(),
          "design: two_stage_cluster needs a cluster column in the data");
    return TwoStageClusterDesign::create(data.cluster_ids,
                                         config.cluster_fraction,
                                         config.treated_per_cluster);
  }
  fail("design: unknown kind '" + config.kind + "'");
}

void apply_config_file(RunOptions& opts, const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "config: cannot read '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();

  json j;
  try {
    j = json::parse(buffer.str());
  } catch (const json::exception& e) {
    fail("config: " + path + ": " + e.what());
  }
  check(j.is_object(), "config: top level must be a JSON object");

  try {
    reject_unknown_keys(
        j, "config",
        {"data", "edges", "index_base", "schema", "design", "null_model",
         "full_model", "het", "covariate_index", "focal", "R", "folds",
         "alpha", "seed", "workers", "study", "reps", "trees", "L", "M0", "k",
         "target", "R_factor"});

    opts.data_path = j.value("data", opts.data_path);
    opts.edges_path = j.value("edges", opts.edges_path);
    opts.index_base = j.value("index_base", opts.index_base);

    if (j.contains("schema")) {
      const json& s = j["schema"];
      reject_unknown_keys(s, "schema",
                          {"outcome", "treatment", "covariates", "cluster"});
      opts.schema.outcome = s.value("outcome", opts.schema.outcome);
      opts.schema.treatment = s.value("treatment", opts.schema.treatment);
      if (s.contains("covariates"))
        opts.schema.covariates = s["covariates"].get<std::vector<std::string>>();
      opts.schema.cluster = s.value("cluster", opts.schema.cluster);
    }
    if (j.contains("design")) {
      const json& d = j["design"];
      reject_unknown_keys(
          d, "design",
          {"kind", "pi", "m", "cluster_fraction", "treated_per_cluster"});
      opts.design.kind = d.value("kind", opts.design.kind);
      opts.design.pi = d.value("pi", opts.design.pi);
      if (d.contains("m")) opts.design.m = d["m"].get<int>();
      opts.design.cluster_fraction =
          d.value("cluster_fraction", opts.design.cluster_fraction);
      opts.design.treated_per_cluster =
          d.value("treated_per_cluster", opts.design.treated_per_cluster);
    }
    if (j.contains("null_model"))
      opts.null_model = predictor_from_json(j["null_model"], "null_model");
    if (j.contains("full_model"))
      opts.full_model = predictor_from_json(j["full_model"], "full_model");
    if (j.contains("het")) {
      const json& h = j["het"];
      reject_unknown_keys(h, "het",
                          {"tau0", "points", "span_se", "berger_boos_gamma"});
      if (h.contains("tau0"))
        opts.het.tau0 = h["tau0"].get<std::vector<double>>();
      opts.het.points = h.value("points", opts.het.points);
      opts.het.span_se = h.value("span_se", opts.het.span_se);
      if (h.contains("berger_boos_gamma"))
        opts.het.berger_boos_gamma = h["berger_boos_gamma"].get<double>();
    }
    opts.covariate_index = j.value("covariate_index", opts.covariate_index);
    if (j.contains("focal"))
      opts.focal = j["focal"].get<std::vector<int>>();

    opts.R = j.value("R", opts.R);
    opts.folds = j.value("folds", opts.folds);
    opts.alpha = j.value("alpha", opts.alpha);
    opts.seed = j.value("seed", opts.seed);
    opts.workers = j.value("workers", opts.workers);
    opts.study = j.value("study", opts.study);
    opts.reps = j.value("reps", opts.reps);
    opts.trees = j.value("trees", opts.trees);
    opts.L = j.value("L", opts.L);
    opts.M0 = j.value("M0", opts.M0);
    opts.bound_k = j.value("k", opts.bound_k);
    opts.target = j.value("target", opts.target);
    if (j.contains("R_factor")) opts.R_factor = j["R_factor"].get<double>();
  } catch (const json::exception& e) {
    fail("config: " + path + ": " + e.what());
  }
}

std::string test_result_json(const TestResult& result,
                             const ResolvedTest& resolved,
                             const RunOptions& opts) {
  json j;
  j["command"] = "test";
  j["kind"] = resolved.kind;
  j["p_value"] = result.p_value;
  j["observed_statistic"] = result.observed_statistic;
  j["sobol_index"] = result.sobol ? json(*result.sobol) : json(nullptr);
  j["delta_hat"] = result.delta_hat ? json(*result.delta_hat) : json(nullptr);
  j["R"] = result.randomized_statistics.size();
  j["k"] = opts.folds;
  j["seed"] = opts.seed;
  j["exceed_count"] = result.exceed_count;
  j["tie_count"] = result.tie_count;
  j["uniform_draw"] = result.uniform_draw;
  if (!result.tau0_grid.empty()) {
    j["tau0_grid"] = result.tau0_grid;
    j["tau0_pvalues"] = result.tau0_pvalues;
    if (result.berger_boos_gamma) {
      j["berger_boos_gamma"] = *result.berger_boos_gamma;
      j["sup_pvalue"] = *result.sup_pvalue;
    }
  }
  if (resolved.focal) j["focal"] = *resolved.focal;
  j["config"] = config_echo(resolved, opts);
  j["generated_at"] = timestamp_utc();
  return j.dump(2) + "\n";
}

std::string power_result_json(const DeltaEstimate& estimate, long long n,
                              const RunOptions& opts) {
  json j;
  j["command"] = "power";
  j["delta_hat"] = estimate.delta_hat;
  j["L_hat"] = estimate.L_hat;
  j["M0_hat"] = estimate.M0_hat;
  j["null_loss"] = estimate.null_loss;
  j["full_loss"] = estimate.full_loss;
  j["k"] = estimate.k;
  j["target"] = opts.target;
  j["R_factor"] = opts.R_factor ? json(*opts.R_factor) : json(nullptr);
  j["sample_size"] = n;
  j["seed"] = opts.seed;
  json echo;
  echo["data"] = opts.data_path;
  echo["schema"] = schema_to_json(opts.schema);
  if (opts.null_model) echo["null_model"] = predictor_to_json(*opts.null_model);
  if (opts.full_model) echo["full_model"] = predictor_to_json(*opts.full_model);
  echo["folds"] = opts.folds;
  echo["seed"] = opts.seed;
  j["config"] = echo;
  j["generated_at"] = timestamp_utc();
  return j.dump(2) + "\n";
}

std::string samplesize_result_json(long long n, const RunOptions& opts) {
  json j;
  j["command"] = "samplesize";
  j["L"] = opts.L;
  j["M0"] = opts.M0;
  j["k"] = opts.bound_k;
  j["target"] = opts.target;
  j["R_factor"] = opts.R_factor ? json(*opts.R_factor) : json(nullptr);
  j["n"] = n;
  j["generated_at"] = timestamp_utc();
  return j.dump(2) + "\n";
}

void write_null_dist_csv(const std::string& path,
                         const std::vector<double>& randomized_statistics) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  check(f != nullptr, "output: cannot open '" + path + "' for writing");
  std::fprintf(f, "randomized_statistic\n");
  for (double s : randomized_statistics) std::fprintf(f, "%.17g\n", s);
  std::fclose(f);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  check(f != nullptr, "output: cannot open '" + path + "' for writing");
  std::fwrite(text.data(), 1, text.size(), f);
  std::fclose(f);
}

std::string timestamp_utc() {
  const std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

}  // namespace randomlab
