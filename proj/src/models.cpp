#include "randomlab/models.hpp"

#include <algorithm>
#include <cmath>

namespace randomlab {

PredictorSpec PredictorSpec::constant() {
  PredictorSpec s;
  s.family = ModelFamily::Constant;
  s.recipe = FeatureRecipe::InterceptOnly;
  return s;
}

PredictorSpec PredictorSpec::linear(FeatureRecipe recipe) {
  PredictorSpec s;
  s.family = ModelFamily::Linear;
  s.recipe = recipe;
  return s;
}

PredictorSpec PredictorSpec::linear_interaction() {
  PredictorSpec s;
  s.family = ModelFamily::LinearInteraction;
  s.recipe = FeatureRecipe::FullInteraction;
  return s;
}

PredictorSpec PredictorSpec::forest(FeatureRecipe recipe, int trees) {
  PredictorSpec s;
  s.family = ModelFamily::RandomForest;
  s.recipe = recipe;
  s.trees = trees;
  return s;
}

std::vector<ForestHyper> resolve_grid(const PredictorSpec& spec, int n_features) {
  if (spec.family != ModelFamily::RandomForest) {
    return {ForestHyper{}};
  }
  check(n_features >= 1, "forest: needs at least one feature");
  check(spec.trees >= 1, "forest: tree count must be positive");

  std::vector<int> mtry = spec.grid_mtry;
  if (mtry.empty()) {
    const int third = (n_features + 2) / 3;  // ceil(f/3)
    mtry = {third, n_features};
    if (mtry[0] == mtry[1]) mtry.pop_back();
  }
  std::vector<int> node_sizes = spec.grid_min_node_size;
  if (node_sizes.empty()) node_sizes = {5};
  std::vector<SplitRule> rules = spec.grid_split_rule;
  if (rules.empty()) rules = {SplitRule::Variance};

  std::vector<ForestHyper> grid;
  for (SplitRule rule : rules) {
    for (int m : mtry) {
      check(m >= 1 && m <= n_features,
            "forest: mtry must be between 1 and the feature count");
      for (int ns : node_sizes) {
        check(ns >= 1, "forest: min_node_size must be positive");
        grid.push_back(ForestHyper{m, ns, rule});
      }
    }
  }
  return grid;
}

Eigen::MatrixXd assemble_features(const ExperimentData& data,
                                  const Assignment& assignment,
                                  FeatureRecipe recipe) {
  const int n = data.n();
  const int p = data.p();
  check(assignment.n() == n, "features: assignment length mismatch");

  auto treatment_col = [&] {
    return assignment.z.cast<double>();
  };

  switch (recipe) {
    case FeatureRecipe::InterceptOnly:
      return Eigen::MatrixXd(n, 0);
    case FeatureRecipe::TreatmentOnly: {
      Eigen::MatrixXd f(n, 1);
      f.col(0) = treatment_col();
      return f;
    }
    case FeatureRecipe::CovariatesOnly:
      return data.covariates;
    case FeatureRecipe::CovariatesTreatment: {
      Eigen::MatrixXd f(n, p + 1);
      f.leftCols(p) = data.covariates;
      f.col(p) = treatment_col();
      return f;
    }
    case FeatureRecipe::CovariatesTreatmentExposure: {
      check(data.network.has_value(),
            "features: exposure recipe requires adjacency");
      Eigen::MatrixXd f(n, p + 2);
      f.leftCols(p) = data.covariates;
      f.col(p) = treatment_col();
      f.col(p + 1) = data.network->exposures(assignment.z);
      return f;
    }
    case FeatureRecipe::FullInteraction: {
      Eigen::MatrixXd f(n, 2 * p + 1);
      f.leftCols(p) = data.covariates;
      const Eigen::VectorXd z = treatment_col();
      f.col(p) = z;
      for (int j = 0; j < p; ++j) {
        f.col(p + 1 + j) = data.covariates.col(j).cwiseProduct(z);
      }
      return f;
    }
  }
  fail("features: unknown recipe");
}

double Tree::predict_row(const Eigen::MatrixXd& x, int row) const {
  int node = 0;
  while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const TreeNode& nd = nodes[static_cast<std::size_t>(node)];
    node = x(row, nd.feature) <= nd.threshold ? nd.left : nd.right;
  }
  return nodes[static_cast<std::size_t>(node)].value;
}

namespace {

ConstantModel fit_constant(const Eigen::VectorXd& y) {
  check(y.size() > 0, "fit: empty training set");
  return ConstantModel{y.mean()};
}

// Least squares with intercept; minimum-norm solution when rank deficient.
LinearModel fit_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  check(y.size() > 0, "fit: empty training set");
  Eigen::MatrixXd aug(x.rows(), x.cols() + 1);
  aug.col(0).setOnes();
  aug.rightCols(x.cols()) = x;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(aug);
  return LinearModel{cod.solve(y)};
}

struct TreeGrower {
  const Eigen::MatrixXd& x;
  const Eigen::VectorXd& y;
  const ForestHyper& hyper;
  RngStream& rng;
  Tree tree;

  std::vector<int> idx;
  std::vector<std::pair<double, int>> scratch;
  std::vector<std::pair<double, int>> best_order;
  std::vector<int> feature_pool;

  void grow(std::vector<int> sample) {
    idx = std::move(sample);
    feature_pool.resize(static_cast<std::size_t>(x.cols()));
    for (int j = 0; j < x.cols(); ++j) feature_pool[static_cast<std::size_t>(j)] = j;
    tree.nodes.clear();
    build(0, static_cast<int>(idx.size()));
  }

  // Builds the subtree over idx[begin, end); returns its node id.
  int build(int begin, int end) {
    const int m = end - begin;
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    double sum = 0.0, y_min = y[idx[static_cast<std::size_t>(begin)]],
           y_max = y_min;
    for (int i = begin; i < end; ++i) {
      const double v = y[idx[static_cast<std::size_t>(i)]];
      sum += v;
      y_min = std::min(y_min, v);
      y_max = std::max(y_max, v);
    }

    const int mns = hyper.min_node_size;
    if (m < 2 * mns || y_min == y_max || !try_split(begin, end, sum)) {
      tree.nodes[static_cast<std::size_t>(node_id)].feature = -1;
      tree.nodes[static_cast<std::size_t>(node_id)].value = sum / m;
      return node_id;
    }

    // try_split left the winning order in best_order and its split point in
    // split_pos_/split_feature_/split_threshold_.
    for (int i = begin; i < end; ++i) {
      idx[static_cast<std::size_t>(i)] =
          best_order[static_cast<std::size_t>(i - begin)].second;
    }
    const int mid = begin + split_pos_;
    const int feature = split_feature_;
    const double threshold = split_threshold_;
    const int left = build(begin, mid);
    const int right = build(mid, end);
    TreeNode& nd = tree.nodes[static_cast<std::size_t>(node_id)];
    nd.feature = feature;
    nd.threshold = threshold;
    nd.left = left;
    nd.right = right;
    return node_id;
  }

  // Scans mtry random features for the variance-maximizing split with both
  // children of at least min_node_size. Returns false when nothing splits.
  bool try_split(int begin, int end, double y_sum) {
    const int m = end - begin;
    const int f = static_cast<int>(x.cols());
    const int mns = hyper.min_node_size;

    for (int i = 0; i < hyper.mtry; ++i) {
      const int j =
          i + static_cast<int>(rng.below(static_cast<std::uint64_t>(f - i)));
      std::swap(feature_pool[static_cast<std::size_t>(i)],
                feature_pool[static_cast<std::size_t>(j)]);
    }

    bool found = false;
    double best_gain = -1.0;
    for (int t = 0; t < hyper.mtry; ++t) {
      const int feature = feature_pool[static_cast<std::size_t>(t)];
      scratch.resize(static_cast<std::size_t>(m));
      for (int i = 0; i < m; ++i) {
        const int row = idx[static_cast<std::size_t>(begin + i)];
        scratch[static_cast<std::size_t>(i)] = {x(row, feature), row};
      }
      std::sort(scratch.begin(), scratch.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });

      double left_sum = 0.0;
      for (int cut = 1; cut < m; ++cut) {
        left_sum += y[scratch[static_cast<std::size_t>(cut - 1)].second];
        if (cut < mns || m - cut < mns) continue;
        const double lo = scratch[static_cast<std::size_t>(cut - 1)].first;
        const double hi = scratch[static_cast<std::size_t>(cut)].first;
        if (lo == hi) continue;
        const double right_sum = y_sum - left_sum;
        const double gain =
            left_sum * left_sum / cut + right_sum * right_sum / (m - cut);
        if (gain > best_gain) {
          best_gain = gain;
          split_feature_ = feature;
          split_pos_ = cut;
          split_threshold_ = lo + (hi - lo) / 2.0;
          best_order = scratch;
          found = true;
        }
      }
    }
    return found;
  }

  int split_feature_ = -1;
  int split_pos_ = 0;
  double split_threshold_ = 0.0;
};

ForestModel fit_forest(const PredictorSpec& spec, const ForestHyper& hyper,
                       const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       RngStream& rng) {
  const int n = static_cast<int>(y.size());
  check(n > 0, "fit: empty training set");
  check(x.rows() == n, "fit: feature/target row mismatch");
  check(hyper.mtry >= 1 && hyper.mtry <= x.cols(),
        "forest: mtry must be between 1 and the feature count");

  ForestModel forest;
  forest.trees.reserve(static_cast<std::size_t>(spec.trees));
  std::vector<int> sample(static_cast<std::size_t>(n));
  for (int t = 0; t < spec.trees; ++t) {
    RngStream tree_rng = rng.substream("tree", static_cast<std::uint64_t>(t));
    if (spec.bootstrap) {
      for (int i = 0; i < n; ++i) {
        sample[static_cast<std::size_t>(i)] =
            static_cast<int>(tree_rng.below(static_cast<std::uint64_t>(n)));
      }
    } else {
      for (int i = 0; i < n; ++i) sample[static_cast<std::size_t>(i)] = i;
    }
    TreeGrower grower{x, y, hyper, tree_rng};
    grower.grow(sample);
    forest.trees.push_back(std::move(grower.tree));
  }
  return forest;
}

}  // namespace

FittedModel fit_model(const PredictorSpec& spec, const ForestHyper& hyper,
                      const Eigen::MatrixXd& features,
                      const Eigen::VectorXd& targets, RngStream& rng) {
  check(features.rows() == targets.size(), "fit: feature/target row mismatch");
  check(targets.size() > 0, "fit: empty training set");
  switch (spec.family) {
    case ModelFamily::Constant:
      return fit_constant(targets);
    case ModelFamily::Linear:
    case ModelFamily::LinearInteraction:
      return fit_linear(features, targets);
    case ModelFamily::RandomForest:
      return fit_forest(spec, hyper, features, targets, rng);
  }
  fail("fit: unknown model family");
}

Eigen::VectorXd predict(const FittedModel& model, const Eigen::MatrixXd& features) {
  const int n = static_cast<int>(features.rows());
  if (const auto* c = std::get_if<ConstantModel>(&model)) {
    return Eigen::VectorXd::Constant(n, c->value);
  }
  if (const auto* lm = std::get_if<LinearModel>(&model)) {
    check(lm->beta.size() == features.cols() + 1,
          "predict: feature count does not match fitted model");
    Eigen::VectorXd out = Eigen::VectorXd::Constant(n, lm->beta[0]);
    out += features * lm->beta.tail(features.cols());
    return out;
  }
  const auto& forest = std::get<ForestModel>(model);
  check(!forest.trees.empty(), "predict: empty forest");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (const Tree& tree : forest.trees) {
    for (int i = 0; i < n; ++i) out[i] += tree.predict_row(features, i);
  }
  return out / static_cast<double>(forest.trees.size());
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<int>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<int>(i)) = m.row(rows[i]);
  }
  return out;
}

Eigen::VectorXd select_rows(const Eigen::VectorXd& v, const std::vector<int>& rows) {
  Eigen::VectorXd out(static_cast<int>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<int>(i)] = v[rows[i]];
  return out;
}

}  // namespace randomlab
