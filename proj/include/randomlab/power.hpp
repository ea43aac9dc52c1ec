#pragma once

#include <optional>

#include "randomlab/cv.hpp"
#include "randomlab/dataset.hpp"

namespace randomlab {

struct DeltaEstimate {
  double delta_hat = 0.0;  // CV(null) - CV(full)
  double L_hat = 0.0;      // plug-in signal size, = delta_hat
  double M0_hat = 0.0;     // plug-in loss bound, max of the two CV losses
  double null_loss = 0.0;
  double full_loss = 0.0;
  int k = 0;
};

DeltaEstimate estimate_delta(const ExperimentData& data,
                             const PredictorSpec& null_spec,
                             const PredictorSpec& full_spec, int k,
                             const RngStream& rng);

enum class OracleKind {
  Residualized,     // pi (1-pi) (E h)^2 — what outcome residualization keeps
  MachineLearning,  // pi (1-pi) E h^2 — what a rich model class keeps
};

double delta_oracle(OracleKind kind, double pi, double mean_h, double mean_h_sq);

// Closed-form minimizers c* of E(Y - bX - cZ')^2 (Z' an independent copy of
// the assignment) for three worked designs of the prediction class:
//   1 linear baseline plus constant unit effect, intercept-free class;
//   2 pure interaction effect (no main effect left to pick up);
//   3 class without the covariate term, exposing a sign violation.
enum class WorkedExample { LinearBaseline = 1, PureInteraction = 2, NoCovariate = 3 };

double example_cstar(WorkedExample example, double pi, double mu1, double mu2,
                     double B);

struct SampleSizeInput {
  double L = 0.0;
  double M0 = 0.0;
  int k = 5;
  double target = 0.2;
  // When present, multiplies the bound by the number of randomizations; by
  // default that constant is dropped.
  std::optional<double> R;
};

// Type-II error bound 4[R](2k e^{-nL^2/(32kM0^2)} + e^{-(k-1)nL^2/(128kM0^2)}),
// evaluated in log space.
double power_bound_log(double n, const SampleSizeInput& in);

// Smallest integer n in [1, 1e9] with bound(n) <= target.
long long sample_size(const SampleSizeInput& in);

}  // namespace randomlab
