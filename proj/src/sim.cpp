#include "randomlab/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <utility>

#include "randomlab/parallel.hpp"

namespace randomlab {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Density proportional to sin^k on (0, pi), sampled by rejection against a
// uniform proposal (sin^k <= 1 everywhere).
double sin_power_angle(int k, RngStream& rng) {
  for (;;) {
    const double theta = rng.uniform() * kPi;
    if (k <= 0) return theta;
    if (rng.uniform() < std::pow(std::sin(theta), k)) return theta;
  }
}

std::vector<double> linspace_grid(double lo, double hi, double step) {
  std::vector<double> g;
  for (int i = 0;; ++i) {
    const double v = lo + step * i;
    if (v > hi + step / 2) break;
    g.push_back(v);
  }
  return g;
}

}  // namespace

int default_n(Dgp kind) {
  switch (kind) {
    case Dgp::HetHyperbolic:
    case Dgp::HetLinear:
    case Dgp::HetNonlinear:
      return 100;
    case Dgp::SpillConst:
    case Dgp::SpillNonlinear:
      return 300;
    case Dgp::ConstLinear:
    case Dgp::ConstPiecewise:
    case Dgp::ConstCosine:
      return 200;
  }
  fail("dgp: unknown kind");
}

int default_p(Dgp kind) {
  switch (kind) {
    case Dgp::HetHyperbolic:
      return 2;
    case Dgp::HetLinear:
    case Dgp::HetNonlinear:
      return 5;
    case Dgp::SpillConst:
    case Dgp::SpillNonlinear:
      return 2;
    case Dgp::ConstLinear:
      return 5;
    case Dgp::ConstPiecewise:
    case Dgp::ConstCosine:
      return 1;
  }
  fail("dgp: unknown kind");
}

std::vector<double> default_effect_grid(Dgp kind) {
  switch (kind) {
    case Dgp::HetHyperbolic:
      return {0, 0.1, 0.2, 0.3, 0.4, 0.5, 1.0, 1.5, 2.0};
    case Dgp::HetLinear:
      return linspace_grid(0, 1, 0.1);
    case Dgp::HetNonlinear:
      return linspace_grid(0, 3, 0.5);
    case Dgp::SpillConst:
      return linspace_grid(0, 1, 0.1);
    case Dgp::SpillNonlinear:
      return linspace_grid(0, 2, 0.2);
    case Dgp::ConstLinear:
      return linspace_grid(0, 10, 1);
    case Dgp::ConstPiecewise:
    case Dgp::ConstCosine:
      return linspace_grid(0, 1, 0.2);
  }
  fail("dgp: unknown kind");
}

Eigen::MatrixXd random_correlation_cholesky(int p, const RngStream& rng) {
  check(p >= 1, "random correlation: dimension must be positive");
  RngStream angles = rng.substream("angles");
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(p, p);
  b(0, 0) = 1.0;
  for (int i = 1; i < p; ++i) {
    double sin_prod = 1.0;
    for (int j = 0; j < i; ++j) {
      const double theta = sin_power_angle(p - (j + 1), angles);
      b(i, j) = std::cos(theta) * sin_prod;
      sin_prod *= std::sin(theta);
    }
    b(i, i) = sin_prod;  // strictly positive: angles live in the open interval
  }
  return b;
}

Eigen::MatrixXd random_correlation(int p, const RngStream& rng) {
  const Eigen::MatrixXd b = random_correlation_cholesky(p, rng);
  Eigen::MatrixXd s = b * b.transpose();
  s = ((s + s.transpose()) / 2).eval();
  s.diagonal().setOnes();
  return s;
}

namespace {

// Rows are iid N(0, chol * chol^T).
Eigen::MatrixXd correlated_normals(int n, const Eigen::MatrixXd& chol,
                                   RngStream& rng) {
  const int p = static_cast<int>(chol.rows());
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd xi(p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) xi(j) = rng.normal();
    x.row(i) = (chol * xi).transpose();
  }
  return x;
}

Eigen::MatrixXd iid_normals(int n, int p, double sd, RngStream& rng) {
  Eigen::MatrixXd x(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) x(i, j) = rng.normal(0.0, sd);
  return x;
}

Eigen::VectorXd uniform_coeffs(int p, double lo, double hi, RngStream& rng) {
  Eigen::VectorXd beta(p);
  for (int j = 0; j < p; ++j) beta(j) = rng.uniform(lo, hi);
  return beta;
}

// Uniform cluster labels in {0..count-1}, redrawn until no cluster is empty.
std::vector<int> random_cluster_labels(int n, int count, RngStream& rng) {
  for (;;) {
    std::vector<int> ids(n);
    std::vector<int> size(count, 0);
    for (int i = 0; i < n; ++i) {
      ids[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(count)));
      ++size[ids[i]];
    }
    if (std::all_of(size.begin(), size.end(), [](int s) { return s > 0; }))
      return ids;
  }
}

Network complete_block_network(const std::vector<int>& cluster_ids) {
  const int n = static_cast<int>(cluster_ids.size());
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (cluster_ids[i] == cluster_ids[j]) edges.emplace_back(i, j);
  return Network(n, std::move(edges));
}

void warn_if_outside_grid(Dgp kind, double effect) {
  const std::vector<double> grid = default_effect_grid(kind);
  const double lo = grid.front();
  const double hi = grid.back();
  if (effect < lo - 1e-12 || effect > hi + 1e-12)
    std::fprintf(stderr,
                 "warning: effect %g outside the usual range [%g, %g] for "
                 "this setup\n",
                 effect, lo, hi);
}

}  // namespace

Generated generate(const DgpSpec& spec, double effect, const RngStream& rng) {
  const int n = spec.n > 0 ? spec.n : default_n(spec.kind);
  const int p = spec.p > 0 ? spec.p : default_p(spec.kind);
  check(n >= 2, "dgp: need at least two units");
  check(p >= 1, "dgp: need at least one covariate");
  warn_if_outside_grid(spec.kind, effect);

  RngStream xs = rng.substream("x");
  RngStream bs = rng.substream("beta");
  RngStream as = rng.substream("assign");
  RngStream es = rng.substream("noise");

  switch (spec.kind) {
    case Dgp::HetHyperbolic: {
      const Eigen::MatrixXd chol =
          random_correlation_cholesky(p, rng.substream("sigma"));
      const Eigen::MatrixXd x = correlated_normals(n, chol, xs);
      const Eigen::VectorXd beta = uniform_coeffs(p, 1.0, 5.0, bs);
      Design design = BernoulliDesign{n, 0.5};
      Assignment z = draw(design, as);
      Eigen::VectorXd y(n);
      for (int i = 0; i < n; ++i) {
        const double x1 = x(i, 0);
        double h = effect;
        if (x1 > 0)
          h = effect + effect * std::min(2.0 / x1, 10.0);
        else if (x1 < 0)
          h = effect + effect * std::max(2.0 / x1, -10.0);
        y(i) = 0.1 * x.row(i).dot(beta) + z.z(i) * h + es.normal(0.0, 0.1);
      }
      return {ExperimentData::create(std::move(y), std::move(z.z), x), design};
    }

    case Dgp::HetLinear: {
      const Eigen::MatrixXd chol =
          random_correlation_cholesky(p, rng.substream("sigma"));
      const Eigen::MatrixXd x = correlated_normals(n, chol, xs);
      const Eigen::VectorXd beta0 = uniform_coeffs(p, 1.0, 30.0, bs);
      const Eigen::VectorXd beta1 = uniform_coeffs(p, 1.0, 30.0, bs);
      Design design = BernoulliDesign{n, 0.5};
      Assignment z = draw(design, as);
      Eigen::VectorXd y(n);
      for (int i = 0; i < n; ++i)
        y(i) = -0.05 * x.row(i).dot(beta0) +
               0.5 * effect * z.z(i) * x.row(i).dot(beta1) + es.normal();
      return {ExperimentData::create(std::move(y), std::move(z.z), x), design};
    }

    case Dgp::HetNonlinear: {
      const Eigen::MatrixXd chol =
          random_correlation_cholesky(p, rng.substream("sigma"));
      const Eigen::MatrixXd x = correlated_normals(n, chol, xs);
      Design design = BernoulliDesign{n, 0.5};
      Assignment z = draw(design, as);
      Eigen::VectorXd y(n);
      for (int i = 0; i < n; ++i) {
        const double lo1 = x(i, 0) < 0.5 ? 1.0 : 0.0;
        const double hi2 = x(i, std::min(1, p - 1)) > -0.5 ? 1.0 : 0.0;
        y(i) = lo1 - 1.5 * hi2 + effect * z.z(i) * (2 * lo1 - 3 * hi2) +
               es.normal();
      }
      return {ExperimentData::create(std::move(y), std::move(z.z), x), design};
    }

    case Dgp::SpillConst:
    case Dgp::SpillNonlinear: {
      RngStream cs = rng.substream("clusters");
      const int n_clusters = 20;
      std::vector<int> ids = random_cluster_labels(n, n_clusters, cs);
      Network net = complete_block_network(ids);
      const Eigen::MatrixXd x = iid_normals(n, p, 1.0, xs);
      Design design = TwoStageClusterDesign::create(ids, 0.5, 1);
      Assignment z = draw(design, as);
      const Eigen::VectorXd expo = net.exposures(z.z);

      RngStream cn = rng.substream("cluster-noise");
      Eigen::VectorXd ec0(n_clusters), ec1(n_clusters);
      for (int c = 0; c < n_clusters; ++c) {
        ec0(c) = cn.normal(0.0, 0.1);
        ec1(c) = cn.normal(0.0, 0.1);
      }

      Eigen::VectorXd y(n);
      for (int i = 0; i < n; ++i) {
        const int zi = z.z(i);
        const double r = expo(i);
        double signal, eps;
        if (spec.kind == Dgp::SpillConst) {
          signal = effect * (1 - zi) * r;
          eps = ec0(ids[i]) + zi * ec1(ids[i]) + es.normal(0.0, 0.5);
        } else {
          const double x1 = x(i, 0);
          const double x2 = x(i, std::min(1, p - 1));
          const double bump =
              3.0 * (x2 > -0.5 ? 1.0 : 0.0) - 2.0 * (x1 < 0.5 ? 1.0 : 0.0);
          signal = 0.5 * effect * (1 - zi) * r * bump;
          const double e_ctrl = es.normal(0.0, std::abs(x1) / 3.0);
          const double e_trt = es.normal(x2, 0.5 * std::abs(x2));
          eps = ec0(ids[i]) + zi * ec1(ids[i]) + (1 - zi) * e_ctrl +
                zi * e_trt;
        }
        y(i) = 2.0 + 1.5 * zi + signal + eps;
      }
      return {ExperimentData::create(std::move(y), std::move(z.z), x,
                                     std::move(ids), std::move(net)),
              design};
    }

    case Dgp::ConstLinear: {
      const Eigen::MatrixXd chol =
          random_correlation_cholesky(p, rng.substream("sigma"));
      const Eigen::MatrixXd x = correlated_normals(n, chol, xs);
      const Eigen::VectorXd beta = uniform_coeffs(p, 1.0, 30.0, bs);
      Design design = BernoulliDesign{n, 0.5};
      Assignment z = draw(design, as);
      Eigen::VectorXd y(n);
      for (int i = 0; i < n; ++i)
        y(i) = 0.5 * x.row(i).dot(beta) + effect * z.z(i) +
               es.normal(0.0, 2.0);
      return {ExperimentData::create(std::move(y), std::move(z.z), x), design};
    }

    case Dgp::ConstPiecewise:
    case Dgp::ConstCosine: {
      const Eigen::MatrixXd x = iid_normals(n, p, 2.0, xs);
      Design design = BernoulliDesign{n, 0.5};
      Assignment z = draw(design, as);
      Eigen::VectorXd y(n);
      for (int i = 0; i < n; ++i) {
        const double x1 = x(i, 0);
        const double b = spec.kind == Dgp::ConstCosine
                             ? 2.0 * std::cos(x1)
                             : 2.0 * (x1 < 0.5 ? 1.0 : 0.0) -
                                   3.0 * (x1 > -0.5 ? 1.0 : 0.0);
        y(i) = b + effect * z.z(i) + es.normal(0.0, 0.1);
      }
      return {ExperimentData::create(std::move(y), std::move(z.z), x), design};
    }
  }
  fail("dgp: unknown kind");
}

std::vector<int> half_controls_per_cluster(const ExperimentData& data,
                                           const RngStream& rng) {
  check(!data.cluster_ids.empty(), "focal selection: dataset has no clusters");
  std::map<int, std::vector<int>> controls;
  for (int i = 0; i < data.n(); ++i)
    if (data.treatments(i) == 0) controls[data.cluster_ids[i]].push_back(i);
  check(!controls.empty(), "focal selection: no control units");

  RngStream pick = rng.substream("pick");
  std::vector<int> focal;
  for (const auto& [cluster, members] : controls) {
    const int count = static_cast<int>(members.size());
    const int take = (count + 1) / 2;
    for (int idx : pick.choose_k(count, take)) focal.push_back(members[idx]);
  }
  std::sort(focal.begin(), focal.end());
  return focal;
}

namespace {

MethodSpec cv_method(std::string name, MethodKind kind, PredictorSpec null_spec,
                     PredictorSpec full_spec) {
  MethodSpec m;
  m.name = std::move(name);
  m.kind = kind;
  m.null_spec = std::move(null_spec);
  m.full_spec = std::move(full_spec);
  return m;
}

MethodSpec stat_method(std::string name, MethodKind kind) {
  MethodSpec m;
  m.name = std::move(name);
  m.kind = kind;
  return m;
}

}  // namespace

std::vector<std::string> study_names() {
  return {"fig1",        "het_linear",      "het_nonlinear",
          "spill_const", "spill_nonlinear", "const_linear",
          "const_piecewise", "const_cosine"};
}

StudySpec make_study(const std::string& name, int forest_trees) {
  check(forest_trees >= 1, "study: forest size must be positive");
  const auto rf = [&](FeatureRecipe recipe) {
    return PredictorSpec::forest(recipe, forest_trees);
  };

  StudySpec s;
  s.name = name;

  if (name == "fig1" || name == "fig1_heterog") {
    s.name = "fig1";
    s.dgp.kind = Dgp::HetHyperbolic;
    s.methods = {
        cv_method("rf", MethodKind::GlobalCv, rf(FeatureRecipe::CovariatesOnly),
                  rf(FeatureRecipe::CovariatesTreatment)),
        cv_method("lm_int", MethodKind::GlobalCv,
                  PredictorSpec::linear(FeatureRecipe::CovariatesOnly),
                  PredictorSpec::linear_interaction()),
        cv_method("lm", MethodKind::GlobalCv,
                  PredictorSpec::linear(FeatureRecipe::CovariatesOnly),
                  PredictorSpec::linear(FeatureRecipe::CovariatesTreatment)),
    };
  } else if (name == "het_linear" || name == "het_nonlinear") {
    s.dgp.kind = name == "het_linear" ? Dgp::HetLinear : Dgp::HetNonlinear;
    s.methods = {
        cv_method("ml_rf", MethodKind::HetCv, rf(FeatureRecipe::CovariatesOnly),
                  rf(FeatureRecipe::CovariatesTreatment)),
        cv_method("lm_int", MethodKind::HetCv,
                  PredictorSpec::linear(FeatureRecipe::CovariatesTreatment),
                  PredictorSpec::linear_interaction()),
        stat_method("vr", MethodKind::HetVr),
        stat_method("sks", MethodKind::HetSks),
    };
  } else if (name == "spill_const" || name == "spill_nonlinear") {
    s.dgp.kind = name == "spill_const" ? Dgp::SpillConst : Dgp::SpillNonlinear;
    s.methods = {
        cv_method("ml_rf", MethodKind::SpillCv,
                  rf(FeatureRecipe::CovariatesTreatment),
                  rf(FeatureRecipe::CovariatesTreatmentExposure)),
        cv_method("lm", MethodKind::SpillCv,
                  PredictorSpec::linear(FeatureRecipe::CovariatesTreatment),
                  PredictorSpec::linear(FeatureRecipe::CovariatesTreatmentExposure)),
        stat_method("elc", MethodKind::SpillElc),
    };
  } else if (name == "const_linear" || name == "const_piecewise" ||
             name == "const_cosine") {
    s.dgp.kind = name == "const_linear"      ? Dgp::ConstLinear
                 : name == "const_piecewise" ? Dgp::ConstPiecewise
                                             : Dgp::ConstCosine;
    MethodSpec res = stat_method("res", MethodKind::Residualized);
    res.null_spec = PredictorSpec::linear(FeatureRecipe::CovariatesOnly);
    s.methods = {
        cv_method("ml_rf", MethodKind::GlobalCv,
                  rf(FeatureRecipe::CovariatesOnly),
                  rf(FeatureRecipe::CovariatesTreatment)),
        cv_method("lm", MethodKind::GlobalCv,
                  PredictorSpec::linear(FeatureRecipe::CovariatesOnly),
                  PredictorSpec::linear(FeatureRecipe::CovariatesTreatment)),
        std::move(res),
        stat_method("neyman", MethodKind::GlobalNeyman),
        stat_method("lin", MethodKind::GlobalLin),
    };
  } else {
    fail("study: unknown name '" + name + "'");
  }

  s.effects = default_effect_grid(s.dgp.kind);
  return s;
}

namespace {

TestResult run_method(const MethodSpec& m, const Generated& g,
                      const std::vector<int>& focal, int R,
                      const RngStream& rng) {
  switch (m.kind) {
    case MethodKind::GlobalCv:
      return test_global(g.data, g.design, m.null_spec, m.full_spec, R,
                         m.folds, rng);
    case MethodKind::Residualized:
      return test_residualized(g.data, g.design, m.null_spec, R, m.folds, rng);
    case MethodKind::HetCv:
      return test_heterogeneity(g.data, g.design, m.null_spec, m.full_spec,
                                m.het_grid, R, m.folds, rng);
    case MethodKind::HetVr:
      return test_heterogeneity_stat(g.data, g.design,
                                     HetStatistic::VarianceRatio, m.het_grid,
                                     R, rng);
    case MethodKind::HetSks:
      return test_heterogeneity_stat(g.data, g.design, HetStatistic::ShiftedKs,
                                     m.het_grid, R, rng);
    case MethodKind::SpillCv:
      return test_spillover(g.data, g.design, focal, m.null_spec, m.full_spec,
                            R, m.folds, rng);
    case MethodKind::SpillElc:
      return test_exposed_contrast(g.data, g.design, focal, R, rng);
    case MethodKind::GlobalNeyman: {
      const Eigen::VectorXd& y = g.data.outcomes;
      StatisticFn stat = [&y](const Assignment& z, const RngStream&) {
        return std::abs(neyman_t(y, z.z));
      };
      return test_with_statistic(g.data, g.design, stat, R, rng);
    }
    case MethodKind::GlobalLin: {
      const ExperimentData& d = g.data;
      StatisticFn stat = [&d](const Assignment& z, const RngStream&) {
        return std::abs(lin_t(d, z));
      };
      return test_with_statistic(g.data, g.design, stat, R, rng);
    }
  }
  fail("study: unknown method kind");
}

}  // namespace

std::vector<CellResult> run_study(const StudySpec& study, int reps, int R,
                                  double alpha, std::uint64_t seed,
                                  int workers) {
  check(reps >= 1, "study: need at least one replication");
  check(R >= 1, "study: need at least one randomization");
  check(alpha > 0 && alpha < 1, "study: alpha must lie in (0,1)");
  check(!study.effects.empty(), "study: empty effect grid");
  check(!study.methods.empty(), "study: no methods");

  const std::size_t n_eff = study.effects.size();
  const std::size_t n_m = study.methods.size();
  const bool needs_focal = std::any_of(
      study.methods.begin(), study.methods.end(), [](const MethodSpec& m) {
        return m.kind == MethodKind::SpillCv || m.kind == MethodKind::SpillElc;
      });

  const RngStream root(seed);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> pvals(n_eff * static_cast<std::size_t>(reps) * n_m, nan);
  std::vector<double> deltas(pvals.size(), nan);

  parallel_for(n_eff * static_cast<std::size_t>(reps), workers,
               [&](std::size_t job) {
                 const std::size_t ei = job / reps;
                 const std::size_t rep = job % reps;
                 const double effect = study.effects[ei];
                 try {
                   const Generated g = generate(study.dgp, effect,
                                                root.substream("gen", job));
                   std::vector<int> focal;
                   if (needs_focal)
                     focal = half_controls_per_cluster(
                         g.data, root.substream("focal", job));
                   for (std::size_t mi = 0; mi < n_m; ++mi) {
                     const TestResult res =
                         run_method(study.methods[mi], g, focal, R,
                                    root.substream("test", job * n_m + mi));
                     pvals[job * n_m + mi] = res.p_value;
                     if (res.delta_hat)
                       deltas[job * n_m + mi] = *res.delta_hat;
                   }
                 } catch (const std::exception& e) {
                   fail("study " + study.name + ", effect " +
                        std::to_string(effect) + ", replication " +
                        std::to_string(rep) + ": " + e.what());
                 }
               });

  std::vector<CellResult> cells;
  cells.reserve(n_m * n_eff);
  for (std::size_t mi = 0; mi < n_m; ++mi) {
    for (std::size_t ei = 0; ei < n_eff; ++ei) {
      CellResult cell;
      cell.study = study.name;
      cell.method = study.methods[mi].name;
      cell.effect = study.effects[ei];
      cell.reps = reps;
      cell.R = R;
      cell.seed = seed;
      int rejections = 0;
      double delta_sum = 0.0;
      int delta_count = 0;
      for (int rep = 0; rep < reps; ++rep) {
        const std::size_t at =
            (ei * reps + rep) * n_m + mi;
        if (pvals[at] <= alpha) ++rejections;
        if (!std::isnan(deltas[at])) {
          delta_sum += deltas[at];
          ++delta_count;
        }
      }
      cell.rejection_rate = static_cast<double>(rejections) / reps;
      cell.mean_delta_hat = delta_count > 0 ? delta_sum / delta_count : nan;
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

void write_report_csv(const std::string& path,
                      const std::vector<CellResult>& cells) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  check(f != nullptr, "report: cannot open '" + path + "' for writing");
  std::fprintf(f,
               "study,method,effect,rejection_rate,mean_delta_hat,reps,R,seed\n");
  for (const CellResult& c : cells) {
    std::fprintf(f, "%s,%s,%.17g,%.17g,", c.study.c_str(), c.method.c_str(),
                 c.effect, c.rejection_rate);
    if (std::isnan(c.mean_delta_hat))
      std::fprintf(f, "nan");
    else
      std::fprintf(f, "%.17g", c.mean_delta_hat);
    std::fprintf(f, ",%d,%d,%llu\n", c.reps, c.R,
                 static_cast<unsigned long long>(c.seed));
  }
  std::fclose(f);
}

}  // namespace randomlab
