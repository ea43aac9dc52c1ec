#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "randomlab/dataset.hpp"
#include "randomlab/design.hpp"
#include "randomlab/frt.hpp"
#include "randomlab/power.hpp"

namespace randomlab {

// Design description that can be written down before the dataset is loaded;
// two-stage designs pick up their cluster labels from the data.
struct DesignConfig {
  std::string kind = "complete";  // bernoulli | complete | two_stage_cluster
  double pi = 0.5;
  std::optional<int> m;  // complete; defaults to the observed treated count
  double cluster_fraction = 0.5;
  int treated_per_cluster = 1;
};

Design resolve_design(const DesignConfig& config, const ExperimentData& data);

// Everything a command run needs, merged from defaults, the JSON config
// file, and command-line flags (flags win).
struct RunOptions {
  std::string data_path;
  std::string edges_path;
  std::string out_path;
  std::string null_dist_path;
  int index_base = 0;

  CsvSchema schema;
  DesignConfig design;
  std::optional<PredictorSpec> null_model;
  std::optional<PredictorSpec> full_model;
  HetGrid het;
  int covariate_index = 0;
  std::optional<std::vector<int>> focal;

  int R = 1000;
  int folds = 5;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  int workers = 1;

  std::string study;
  int reps = 200;
  int trees = 25;

  double L = 0.0;
  double M0 = 0.0;
  int bound_k = 5;
  double target = 0.2;
  std::optional<double> R_factor;
};

// Reads a JSON config file into opts (unknown keys rejected).
void apply_config_file(RunOptions& opts, const std::string& path);

// The fully resolved ingredients of one test run, echoed into the result.
struct ResolvedTest {
  std::string kind;  // global | het | spillover | imbalance
  Design design;
  std::optional<PredictorSpec> null_model;
  std::optional<PredictorSpec> full_model;
  std::optional<int> covariate_index;
  std::optional<std::vector<int>> focal;
};

// Result serializers: pretty-printed JSON, sorted keys, trailing newline.
// generated_at is the only field that varies between identical runs; the
// worker count and output paths are never echoed.
std::string test_result_json(const TestResult& result, const ResolvedTest& resolved,
                             const RunOptions& opts);
std::string power_result_json(const DeltaEstimate& estimate, long long n,
                              const RunOptions& opts);
std::string samplesize_result_json(long long n, const RunOptions& opts);

void write_null_dist_csv(const std::string& path,
                         const std::vector<double>& randomized_statistics);

void write_text_file(const std::string& path, const std::string& text);

std::string timestamp_utc();

}  // namespace randomlab
