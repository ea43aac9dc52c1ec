#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "randomlab/design.hpp"
#include "randomlab/frt.hpp"

namespace randomlab {

// Built-in data-generating processes for the benchmark studies. Effects are
// a constant shift (Const*), a covariate-dependent multiplier (Het*), or a
// neighborhood spillover on controls (Spill*).
enum class Dgp {
  HetHyperbolic,   // multiplier tau * (1 + clamp(2/x1, -10, 10))
  HetLinear,       // multiplier linear in x
  HetNonlinear,    // multiplier from two indicator bumps
  SpillConst,      // constant spillover, clustered noise
  SpillNonlinear,  // indicator spillover, heteroskedastic clustered noise
  ConstLinear,     // linear baseline
  ConstPiecewise,  // two-step baseline
  ConstCosine,     // cosine baseline
};

struct DgpSpec {
  Dgp kind = Dgp::HetHyperbolic;
  int n = 0;  // 0 picks the setup default
  int p = 0;
};

int default_n(Dgp kind);
int default_p(Dgp kind);
std::vector<double> default_effect_grid(Dgp kind);

struct Generated {
  ExperimentData data;
  Design design;
};

// Lower-triangular factor of a random correlation matrix: each row lies on
// the unit sphere, with hyperspherical angles drawn from the density
// proportional to sin^(p-j) on (0, pi), j the 1-based column.
Eigen::MatrixXd random_correlation_cholesky(int p, const RngStream& rng);
Eigen::MatrixXd random_correlation(int p, const RngStream& rng);

// One dataset realized under a fresh draw of the setup's design. Effects
// outside the setup's usual grid are allowed but warn on stderr.
Generated generate(const DgpSpec& spec, double effect, const RngStream& rng);

// Focal selection for the spillover studies: half the control units of each
// cluster (rounded up), chosen uniformly; returned sorted.
std::vector<int> half_controls_per_cluster(const ExperimentData& data,
                                           const RngStream& rng);

enum class MethodKind {
  GlobalCv,
  Residualized,  // null_spec doubles as the covariate adjuster
  HetCv,
  HetVr,
  HetSks,
  SpillCv,
  SpillElc,
  GlobalNeyman,
  GlobalLin,
};

struct MethodSpec {
  std::string name;
  MethodKind kind = MethodKind::GlobalCv;
  PredictorSpec null_spec;
  PredictorSpec full_spec;
  HetGrid het_grid;  // Het* kinds only
  int folds = 5;
};

struct StudySpec {
  std::string name;
  DgpSpec dgp;
  std::vector<double> effects;
  std::vector<MethodSpec> methods;
};

// One (method, effect) cell of a study report.
struct CellResult {
  std::string study;
  std::string method;
  double effect = 0.0;
  double rejection_rate = 0.0;
  double mean_delta_hat = 0.0;  // NaN when the method reports no delta
  int reps = 0;
  int R = 0;
  std::uint64_t seed = 0;
};

std::vector<std::string> study_names();

// Named study with its standard method lineup. forest_trees scales the
// forest size so desk runs stay quick; other knobs can be edited on the
// returned spec.
StudySpec make_study(const std::string& name, int forest_trees = 25);

// Runs reps independent datasets per effect value and aggregates rejection
// rates at level alpha. Bit-identical output for any worker count at a fixed
// seed; a failing replication aborts the study with cell context.
std::vector<CellResult> run_study(const StudySpec& study, int reps, int R,
                                  double alpha, std::uint64_t seed,
                                  int workers);

void write_report_csv(const std::string& path,
                      const std::vector<CellResult>& cells);

}  // namespace randomlab
