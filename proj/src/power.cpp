#include "randomlab/power.hpp"

#include <algorithm>
#include <cmath>

namespace randomlab {

DeltaEstimate estimate_delta(const ExperimentData& data,
                             const PredictorSpec& null_spec,
                             const PredictorSpec& full_spec, int k,
                             const RngStream& rng) {
  data.validate();
  const FoldPlan plan = FoldPlan::create(data.n(), k, rng.substream("folds"));
  const Assignment observed = data.observed();
  DeltaEstimate est;
  est.k = k;
  est.null_loss =
      cv_loss(null_spec, data.outcomes,
              assemble_features(data, observed, null_spec.recipe), plan,
              rng.substream("m0"));
  est.full_loss =
      cv_loss(full_spec, data.outcomes,
              assemble_features(data, observed, full_spec.recipe), plan,
              rng.substream("m1"));
  est.delta_hat = est.null_loss - est.full_loss;
  est.L_hat = est.delta_hat;
  est.M0_hat = std::max(est.null_loss, est.full_loss);
  return est;
}

double delta_oracle(OracleKind kind, double pi, double mean_h,
                    double mean_h_sq) {
  check(pi > 0.0 && pi < 1.0, "delta oracle: pi must be in (0,1)");
  check(mean_h_sq >= mean_h * mean_h - 1e-12,
        "delta oracle: E[h^2] cannot be below (E h)^2");
  if (kind == OracleKind::Residualized) {
    return pi * (1.0 - pi) * mean_h * mean_h;
  }
  return pi * (1.0 - pi) * mean_h_sq;
}

double example_cstar(WorkedExample example, double pi, double mu1, double mu2,
                     double B) {
  check(pi > 0.0 && pi < 1.0, "example c*: pi must be in (0,1)");
  switch (example) {
    case WorkedExample::LinearBaseline: {
      check(mu2 > 0.0, "example c*: second moment must be positive");
      const double r = mu1 * mu1 / mu2;
      check(r <= 1.0, "example c*: moments violate Cauchy-Schwarz");
      check(1.0 - pi * r > 0.0, "example c*: degenerate moment combination");
      return pi * (1.0 - r) / (1.0 - pi * r);
    }
    case WorkedExample::PureInteraction:
      return 0.0;
    case WorkedExample::NoCovariate:
      return B * mu1 + pi;
  }
  fail("example c*: unknown example");
}

double power_bound_log(double n, const SampleSizeInput& in) {
  check(in.L > 0.0, "sample size: L must be positive");
  check(in.M0 > 0.0, "sample size: M0 must be positive");
  check(in.k >= 2, "sample size: k must be at least 2");
  const double k = static_cast<double>(in.k);
  const double ratio = in.L * in.L / (in.M0 * in.M0);
  const double log_a = std::log(2.0 * k) - n * ratio / (32.0 * k);
  const double log_b = -(k - 1.0) * n * ratio / (128.0 * k);
  const double hi = std::max(log_a, log_b);
  double log_sum = hi + std::log(std::exp(log_a - hi) + std::exp(log_b - hi));
  log_sum += std::log(4.0);
  if (in.R.has_value()) {
    check(*in.R >= 1.0, "sample size: R must be at least 1");
    log_sum += std::log(*in.R);
  }
  return log_sum;
}

long long sample_size(const SampleSizeInput& in) {
  check(in.target > 0.0 && in.target < 1.0,
        "sample size: target must be in (0,1)");
  const double log_target = std::log(in.target);
  const long long n_max = 1000000000LL;
  if (power_bound_log(1.0, in) <= log_target) return 1;
  check(power_bound_log(static_cast<double>(n_max), in) <= log_target,
        "sample size: target unattainable below n = 1e9");

  // The bound is strictly decreasing in n; binary search the crossing.
  long long lo = 1, hi = n_max;  // bound(lo) > target >= bound(hi)
  while (hi - lo > 1) {
    const long long mid = lo + (hi - lo) / 2;
    if (power_bound_log(static_cast<double>(mid), in) <= log_target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace randomlab
