#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "randomlab/dataset.hpp"
#include "randomlab/design.hpp"
#include "randomlab/power.hpp"
#include "randomlab/rng.hpp"

using namespace randomlab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct RunOutcome {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "randomlab_cli_tests";
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunOutcome run(const std::string& args) {
  static int counter = 0;
  const fs::path out = work_dir() / ("stdout_" + std::to_string(counter));
  const fs::path err = work_dir() / ("stderr_" + std::to_string(counter));
  ++counter;
  const std::string cmd = std::string(RANDOMLAB_BIN) + " " + args + " > " +
                          out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  RunOutcome r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

// Everything but the timestamp, for byte-level comparisons of reruns.
std::string strip_generated_at(const std::string& text) {
  std::stringstream in(text);
  std::string line, kept;
  while (std::getline(in, line)) {
    if (line.find("\"generated_at\"") != std::string::npos) continue;
    kept += line;
    kept += '\n';
  }
  return kept;
}

// A flat experiment with a mild treatment effect, written as CSV.
fs::path flat_csv() {
  static const fs::path path = [] {
    RngStream rng(7001);
    const int n = 24;
    Eigen::VectorXd y(n);
    Eigen::VectorXi z(n);
    Eigen::MatrixXd x(n, 2);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i < n / 2;
    rng.shuffle(labels);
    for (int i = 0; i < n; ++i) {
      z(i) = labels[static_cast<std::size_t>(i)];
      x(i, 0) = rng.normal();
      x(i, 1) = rng.normal();
      y(i) = 0.7 * x(i, 0) + 0.8 * z(i) + rng.normal();
    }
    const fs::path p = work_dir() / "flat.csv";
    write_csv(p.string(), ExperimentData::create(y, z, x), CsvSchema{});
    return p;
  }();
  return path;
}

// Clustered experiment under a two-stage design, plus its block edge list.
struct ClusteredFixture {
  fs::path data;
  fs::path edges0;  // 0-based endpoints
  fs::path edges1;  // the same edges, 1-based
};

ClusteredFixture clustered_csv() {
  static const ClusteredFixture fx = [] {
    RngStream rng(7013);
    const int clusters = 4, per = 6, n = clusters * per;
    std::vector<int> ids(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = i / per;
    const TwoStageClusterDesign design =
        TwoStageClusterDesign::create(ids, 0.5, 1);
    RngStream draw_rng = rng.substream("assign");
    const Assignment z = draw(Design{design}, draw_rng);

    std::vector<std::pair<int, int>> edges;
    for (int c = 0; c < clusters; ++c)
      for (int a = 0; a < per; ++a)
        for (int b = a + 1; b < per; ++b)
          edges.emplace_back(c * per + a, c * per + b);
    const Network net(n, edges);
    const Eigen::VectorXd expo = net.exposures(z.z);

    Eigen::VectorXd y(n);
    Eigen::MatrixXd x(n, 1);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = rng.normal();
      y(i) = 0.5 * x(i, 0) + z.z(i) + 0.8 * (1 - z.z(i)) * expo(i) +
             rng.normal(0.0, 0.3);
    }

    ClusteredFixture f;
    f.data = work_dir() / "clustered.csv";
    write_csv(f.data.string(),
              ExperimentData::create(y, z.z, x, ids, net), CsvSchema{});
    f.edges0 = work_dir() / "edges0.csv";
    f.edges1 = work_dir() / "edges1.csv";
    std::ofstream e0(f.edges0), e1(f.edges1);
    e0 << "u,v\n";
    e1 << "u,v\n";
    for (const auto& [a, b] : edges) {
      e0 << a << "," << b << "\n";
      e1 << a + 1 << "," << b + 1 << "\n";
    }
    return f;
  }();
  return fx;
}

fs::path linear_models_config() {
  static const fs::path path = [] {
    json cfg;
    cfg["null_model"] = {{"family", "linear"}, {"recipe", "covariates_only"}};
    cfg["full_model"] = {{"family", "linear"},
                         {"recipe", "covariates_treatment"}};
    const fs::path p = work_dir() / "linear.json";
    std::ofstream out(p);
    out << cfg.dump(2);
    return p;
  }();
  return path;
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(run("").code == 2);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("test global").code == 2);                       // --data required
  CHECK(run("test sideways --data x.csv").code == 2);        // bad kind
  CHECK(run("test global --data x.csv --bogus 1").code == 2);
  CHECK(run("simulate --study nope --out r.csv").code == 2);
  CHECK(run("samplesize --M0 1").code == 2);                 // --L required
  CHECK(run("samplesize --L 1 --M0 1 --target 2").code == 2);
  CHECK(run("--help").code == 0);

  const RunOutcome spill =
      run("test spillover --data " + flat_csv().string());
  CHECK(spill.code == 2);
  CHECK(spill.err.find("adjacency required") != std::string::npos);
}

TEST_CASE("runtime failures exit with code 1") {
  const RunOutcome missing = run("test global --data /no/such/file.csv --R 5");
  CHECK(missing.code == 1);
  CHECK(missing.err.find("error:") != std::string::npos);

  // Config problems are runtime failures, not usage errors.
  const fs::path bad = work_dir() / "bad.json";
  std::ofstream(bad) << "{\"no_such_key\": 1}";
  const RunOutcome cfg = run("test global --data " + flat_csv().string() +
                             " --config " + bad.string() + " --R 5");
  CHECK(cfg.code == 1);
  CHECK(cfg.err.find("unknown key") != std::string::npos);
}

TEST_CASE("global test: result JSON carries the whole story") {
  const fs::path out = work_dir() / "global.json";
  const fs::path nulls = work_dir() / "nulls.csv";
  const RunOutcome r = run("test global --data " + flat_csv().string() +
                           " --config " + linear_models_config().string() +
                           " --R 30 --folds 3 --seed 5 --out " + out.string() +
                           " --emit-null-dist " + nulls.string());
  REQUIRE(r.code == 0);

  const json j = json::parse(slurp(out));
  CHECK(j["command"] == "test");
  CHECK(j["kind"] == "global");
  CHECK(j["R"] == 30);
  CHECK(j["k"] == 3);
  CHECK(j["seed"] == 5);
  CHECK(j.contains("generated_at"));
  const double p = j["p_value"].get<double>();
  CHECK(p > 0.0);
  CHECK(p <= 1.0);
  // The stored pieces reproduce the p-value exactly.
  const double expected = (j["exceed_count"].get<int>() +
                           j["uniform_draw"].get<double>() *
                               (1.0 + j["tie_count"].get<int>())) /
                          31.0;
  CHECK(p == expected);
  CHECK(j["delta_hat"].is_number());
  CHECK(j["sobol_index"].is_number());
  CHECK(j["config"]["design"]["kind"] == "complete");
  CHECK(j["config"]["design"]["m"] == 12);
  CHECK(j["config"]["null_model"]["family"] == "linear");
  CHECK(j["config"]["null_model"]["recipe"] == "covariates_only");
  CHECK(j["config"]["full_model"]["recipe"] == "covariates_treatment");
  CHECK(j["config"]["schema"]["outcome"] == "Y");

  // Null distribution file: header plus exactly R rows.
  std::ifstream nd(nulls);
  std::string line;
  std::getline(nd, line);
  CHECK(line == "randomized_statistic");
  int rows = 0;
  while (std::getline(nd, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 30);
}

TEST_CASE("default forest models drive the test when no config is given") {
  const fs::path out = work_dir() / "forest.json";
  const RunOutcome r = run("test global --data " + flat_csv().string() +
                           " --R 5 --folds 2 --seed 3 --out " + out.string());
  REQUIRE(r.code == 0);
  const json j = json::parse(slurp(out));
  CHECK(j["config"]["null_model"]["family"] == "forest");
  CHECK(j["config"]["full_model"]["family"] == "forest");
  CHECK(j["config"]["null_model"]["trees"] == 100);
  CHECK(j["p_value"].get<double>() > 0.0);
}

TEST_CASE("reruns are identical for any worker count, except the timestamp") {
  const std::string base = "test global --data " + flat_csv().string() +
                           " --config " + linear_models_config().string() +
                           " --R 40 --seed 17 --out ";
  const fs::path a = work_dir() / "det_a.json";
  const fs::path b = work_dir() / "det_b.json";
  REQUIRE(run(base + a.string() + " --workers 1").code == 0);
  REQUIRE(run(base + b.string() + " --workers 3").code == 0);
  CHECK(strip_generated_at(slurp(a)) == strip_generated_at(slurp(b)));

  // A different seed genuinely changes the run.
  const fs::path c = work_dir() / "det_c.json";
  REQUIRE(run("test global --data " + flat_csv().string() + " --config " +
              linear_models_config().string() + " --R 40 --seed 18 --out " +
              c.string())
              .code == 0);
  CHECK(json::parse(slurp(a))["uniform_draw"] !=
        json::parse(slurp(c))["uniform_draw"]);
}

TEST_CASE("heterogeneity test via CLI: grid echo and sup p-value") {
  json cfg;
  cfg["null_model"] = {{"family", "linear"}, {"recipe", "covariates_only"}};
  cfg["full_model"] = {{"family", "linear"}, {"recipe", "covariates_treatment"}};
  cfg["het"] = {{"tau0", {0.0, 0.8, 1.6}}};
  const fs::path cfg_path = work_dir() / "het.json";
  std::ofstream(cfg_path) << cfg.dump(2);

  const fs::path out = work_dir() / "het_result.json";
  const RunOutcome r = run("test het --data " + flat_csv().string() +
                           " --config " + cfg_path.string() +
                           " --R 25 --seed 2 --out " + out.string());
  REQUIRE(r.code == 0);
  const json j = json::parse(slurp(out));
  CHECK(j["kind"] == "het");
  REQUIRE(j["tau0_grid"].size() == 3);
  CHECK(j["tau0_grid"][1] == 0.8);
  REQUIRE(j["tau0_pvalues"].size() == 3);
  double sup = 0.0;
  for (const auto& v : j["tau0_pvalues"]) sup = std::max(sup, v.get<double>());
  CHECK(j["p_value"].get<double>() == sup);
  CHECK(j["config"]["het"]["tau0"].size() == 3);
}

TEST_CASE("imbalance test via CLI") {
  const fs::path out = work_dir() / "imb.json";
  const RunOutcome r = run("test imbalance --data " + flat_csv().string() +
                           " --config " + linear_models_config().string() +
                           " --R 20 --seed 4 --out " + out.string());
  REQUIRE(r.code == 0);
  const json j = json::parse(slurp(out));
  CHECK(j["kind"] == "imbalance");
  CHECK(j["config"]["covariate_index"] == 0);
  CHECK(j["p_value"].get<double>() > 0.0);
}

TEST_CASE("spillover test via CLI: cluster focal rule and edge index bases") {
  const ClusteredFixture fx = clustered_csv();
  json cfg;
  cfg["null_model"] = {{"family", "linear"}, {"recipe", "covariates_treatment"}};
  cfg["full_model"] = {{"family", "linear"},
                       {"recipe", "covariates_treatment_exposure"}};
  cfg["schema"] = {{"cluster", "C"}};
  cfg["design"] = {{"kind", "two_stage_cluster"},
                   {"cluster_fraction", 0.5},
                   {"treated_per_cluster", 1}};
  const fs::path cfg_path = work_dir() / "spill.json";
  std::ofstream(cfg_path) << cfg.dump(2);

  const std::string base = "test spillover --data " + fx.data.string() +
                           " --config " + cfg_path.string() +
                           " --R 20 --seed 6 --out ";
  const fs::path a = work_dir() / "spill_a.json";
  const RunOutcome ra = run(base + a.string() + " --edges " + fx.edges0.string());
  REQUIRE(ra.code == 0);
  const json ja = json::parse(slurp(a));
  CHECK(ja["kind"] == "spillover");
  CHECK(ja["config"]["design"]["kind"] == "two_stage_cluster");
  CHECK(ja["config"]["design"]["clusters"] == 4);
  REQUIRE(ja.contains("focal"));
  CHECK(!ja["focal"].empty());
  int last = -1;
  for (const auto& f : ja["focal"]) {
    CHECK(f.get<int>() > last);
    last = f.get<int>();
  }

  // One-based edge files land on the same result.
  const fs::path b = work_dir() / "spill_b.json";
  const RunOutcome rb = run(base + b.string() + " --edges " +
                            fx.edges1.string() + " --index-base 1");
  REQUIRE(rb.code == 0);
  const std::string ja_text = strip_generated_at(slurp(a));
  std::string jb_text = strip_generated_at(slurp(b));
  // The echoed edge path differs; everything else must match.
  const std::string from = fx.edges1.string();
  const std::string to = fx.edges0.string();
  const std::size_t at = jb_text.find(from);
  REQUIRE(at != std::string::npos);
  jb_text = jb_text.substr(0, at) + to + jb_text.substr(at + from.size());
  const std::size_t base_at = jb_text.find("\"index_base\": 1");
  REQUIRE(base_at != std::string::npos);
  jb_text.replace(base_at, std::string("\"index_base\": 1").size(),
                  "\"index_base\": 0");
  CHECK(jb_text == ja_text);
}

TEST_CASE("simulate: report rows for every method-effect cell, any workers") {
  const fs::path a = work_dir() / "report_a.csv";
  const fs::path b = work_dir() / "report_b.csv";
  const std::string base =
      "simulate --study const_linear --reps 2 --R 5 --trees 2 --seed 3 --out ";
  REQUIRE(run(base + a.string() + " --workers 1").code == 0);
  REQUIRE(run(base + b.string() + " --workers 3").code == 0);
  CHECK(slurp(a) == slurp(b));  // no timestamp in reports

  std::ifstream in(a);
  std::string line;
  std::getline(in, line);
  CHECK(line == "study,method,effect,rejection_rate,mean_delta_hat,reps,R,seed");
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 11 * 5);  // 11 effect values, 5 methods
}

TEST_CASE("samplesize: prints the integer and matches the library") {
  const RunOutcome r = run("samplesize --L 4.98 --M0 9.98 --k 10 --target 0.2");
  REQUIRE(r.code == 0);
  const long long n = std::stoll(r.out);
  CHECK(n >= 7400);
  CHECK(n <= 8200);
  SampleSizeInput in;
  in.L = 4.98;
  in.M0 = 9.98;
  in.k = 10;
  in.target = 0.2;
  CHECK(n == sample_size(in));

  // Reinstating the randomization-count factor can only increase n.
  const RunOutcome rr =
      run("samplesize --L 4.98 --M0 9.98 --k 10 --target 0.2 --R 100");
  REQUIRE(rr.code == 0);
  CHECK(std::stoll(rr.out) > n);

  // JSON sidecar.
  const fs::path out = work_dir() / "ss.json";
  REQUIRE(run("samplesize --L 4.98 --M0 9.98 --k 10 --target 0.2 --out " +
              out.string())
              .code == 0);
  const json j = json::parse(slurp(out));
  CHECK(j["command"] == "samplesize");
  CHECK(j["n"] == n);
  CHECK(j["L"] == 4.98);
  CHECK(j["R_factor"].is_null());
}

TEST_CASE("power: pilot-data estimate feeds the planner") {
  // The pilot needs a signal the model class can see, or the planner
  // rightly refuses to size the experiment.
  const fs::path pilot = work_dir() / "pilot.csv";
  {
    RngStream rng(7027);
    const int n = 60;
    Eigen::VectorXd y(n);
    Eigen::VectorXi z(n);
    Eigen::MatrixXd x(n, 1);
    for (int i = 0; i < n; ++i) {
      z(i) = i % 2;
      x(i, 0) = rng.normal();
      y(i) = 2.0 * z(i) + 0.3 * x(i, 0) + rng.normal(0.0, 0.4);
    }
    write_csv(pilot.string(), ExperimentData::create(y, z, x), CsvSchema{});
  }
  const fs::path out = work_dir() / "power.json";
  const RunOutcome r = run("power --data " + pilot.string() + " --config " +
                           linear_models_config().string() +
                           " --folds 4 --seed 9 --target 0.2 --out " +
                           out.string());
  REQUIRE(r.code == 0);
  const json j = json::parse(slurp(out));
  CHECK(j["command"] == "power");
  CHECK(j["k"] == 4);
  CHECK(j["delta_hat"].get<double>() > 0.0);
  CHECK(j["M0_hat"].get<double>() >= j["delta_hat"].get<double>());
  CHECK(j["sample_size"].get<long long>() >= 1);
  CHECK(j["config"]["null_model"]["family"] == "linear");
}

TEST_CASE("config file fills gaps, flags win") {
  json cfg;
  cfg["null_model"] = {{"family", "linear"}, {"recipe", "covariates_only"}};
  cfg["full_model"] = {{"family", "linear"}, {"recipe", "covariates_treatment"}};
  cfg["R"] = 25;
  cfg["seed"] = 9;
  const fs::path cfg_path = work_dir() / "merge.json";
  std::ofstream(cfg_path) << cfg.dump(2);

  const fs::path out1 = work_dir() / "merge1.json";
  REQUIRE(run("test global --data " + flat_csv().string() + " --config " +
              cfg_path.string() + " --seed 11 --out " + out1.string())
              .code == 0);
  const json j1 = json::parse(slurp(out1));
  CHECK(j1["R"] == 25);    // from config
  CHECK(j1["seed"] == 11); // flag beats config

  const fs::path out2 = work_dir() / "merge2.json";
  REQUIRE(run("test global --data " + flat_csv().string() + " --config " +
              cfg_path.string() + " --R 40 --out " + out2.string())
              .code == 0);
  const json j2 = json::parse(slurp(out2));
  CHECK(j2["R"] == 40);   // flag beats config
  CHECK(j2["seed"] == 9); // config beats default
}
