#include "randomlab/design.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace randomlab {
namespace {

constexpr const char* kZeroProb =
    "focal conditioning: event has probability zero under the base design";

// C(n, k) as a double; only used for ratio weights on desk-scale clusters.
double binom(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double v = 1.0;
  for (int i = 1; i <= k; ++i) v = v * (n - k + i) / i;
  return v;
}

// Samples an s-subset of {0..m-1} with probability proportional to the
// product of per-element weights (conditional Bernoulli sampling), via
// suffix elementary symmetric polynomials e[i][r].
std::vector<int> weighted_fixed_size_subset(const std::vector<double>& w,
                                            int s, RngStream& rng) {
  const int m = static_cast<int>(w.size());
  check(s >= 0 && s <= m, kZeroProb);
  std::vector<std::vector<double>> e(
      static_cast<std::size_t>(m + 1),
      std::vector<double>(static_cast<std::size_t>(s + 1), 0.0));
  e[static_cast<std::size_t>(m)][0] = 1.0;
  for (int i = m - 1; i >= 0; --i) {
    e[i][0] = 1.0;
    for (int r = 1; r <= s; ++r) {
      e[i][r] = e[i + 1][r] + w[static_cast<std::size_t>(i)] * e[i + 1][r - 1];
    }
  }
  check(e[0][static_cast<std::size_t>(s)] > 0.0, kZeroProb);

  std::vector<int> chosen;
  int need = s;
  for (int i = 0; i < m && need > 0; ++i) {
    const double p_take =
        w[static_cast<std::size_t>(i)] * e[i + 1][need - 1] / e[i][need];
    if (rng.uniform() < p_take) {
      chosen.push_back(i);
      --need;
    }
  }
  check(need == 0, kZeroProb);
  return chosen;
}

}  // namespace

TwoStageClusterDesign TwoStageClusterDesign::create(std::vector<int> cluster_ids,
                                                    double cluster_fraction,
                                                    int treated_per_cluster) {
  TwoStageClusterDesign d;
  check(!cluster_ids.empty(), "two-stage design: cluster ids required");
  check(cluster_fraction > 0.0 && cluster_fraction <= 1.0,
        "two-stage design: cluster fraction must be in (0,1]");
  check(treated_per_cluster >= 1,
        "two-stage design: treated count per cluster must be >= 1");
  d.cluster_ids = std::move(cluster_ids);
  d.cluster_fraction = cluster_fraction;
  d.treated_per_cluster = treated_per_cluster;

  std::map<int, std::vector<int>> groups;
  for (std::size_t i = 0; i < d.cluster_ids.size(); ++i) {
    groups[d.cluster_ids[i]].push_back(static_cast<int>(i));
  }
  for (auto& [id, members] : groups) d.clusters.push_back(std::move(members));

  const int k = static_cast<int>(d.clusters.size());
  d.selected_count = static_cast<int>(std::floor(cluster_fraction * k + 0.5));
  d.selected_count = std::max(1, std::min(k, d.selected_count));
  for (const auto& members : d.clusters) {
    check(static_cast<int>(members.size()) >= treated_per_cluster,
          "two-stage design: cluster smaller than treated count");
  }
  return d;
}

int design_n(const Design& design) {
  return std::visit(
      [](const auto& d) -> int {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, TwoStageClusterDesign>) {
          return static_cast<int>(d.cluster_ids.size());
        } else {
          return d.n;
        }
      },
      design);
}

void validate_design(const Design& design) {
  std::visit(
      [](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, BernoulliDesign>) {
          check(d.n >= 2, "bernoulli design: need n >= 2");
          check(d.pi > 0.0 && d.pi < 1.0,
                "bernoulli design: pi must be in (0,1)");
        } else if constexpr (std::is_same_v<T, CompleteDesign>) {
          check(d.n >= 2, "complete design: need n >= 2");
          check(d.m >= 1 && d.m <= d.n - 1,
                "complete design: treated count must be in [1, n-1]");
        } else {
          check(!d.clusters.empty(), "two-stage design: not initialized");
        }
      },
      design);
}

Assignment draw(const Design& design, RngStream& rng) {
  validate_design(design);
  const int n = design_n(design);
  Eigen::VectorXi z = Eigen::VectorXi::Zero(n);
  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, BernoulliDesign>) {
          for (int i = 0; i < n; ++i) z[i] = rng.bernoulli(d.pi) ? 1 : 0;
        } else if constexpr (std::is_same_v<T, CompleteDesign>) {
          for (int i : rng.choose_k(d.n, d.m)) z[i] = 1;
        } else {
          const int k = static_cast<int>(d.clusters.size());
          for (int c : rng.choose_k(k, d.selected_count)) {
            const auto& members = d.clusters[static_cast<std::size_t>(c)];
            for (int pick : rng.choose_k(static_cast<int>(members.size()),
                                         d.treated_per_cluster)) {
              z[members[static_cast<std::size_t>(pick)]] = 1;
            }
          }
        }
      },
      design);
  return Assignment{std::move(z)};
}

namespace {

Assignment draw_focal(const Design& base, const FocalConstraint& fc,
                      RngStream& rng) {
  const int n = design_n(base);
  check(static_cast<int>(fc.realized.size()) == n,
        "focal conditioning: realized assignment length mismatch");
  check(!fc.focal.empty(), "focal conditioning: empty focal set");
  std::vector<char> is_focal(static_cast<std::size_t>(n), 0);
  for (int i : fc.focal) {
    check(i >= 0 && i < n, "focal conditioning: focal index out of range");
    is_focal[static_cast<std::size_t>(i)] = 1;
  }

  Eigen::VectorXi z = Eigen::VectorXi::Zero(n);
  for (int i : fc.focal) z[i] = fc.realized[i];

  if (const auto* bd = std::get_if<BernoulliDesign>(&base)) {
    for (int i = 0; i < n; ++i) {
      if (!is_focal[static_cast<std::size_t>(i)]) {
        z[i] = rng.bernoulli(bd->pi) ? 1 : 0;
      }
    }
    return Assignment{std::move(z)};
  }

  if (const auto* cd = std::get_if<CompleteDesign>(&base)) {
    int fixed_treated = 0;
    std::vector<int> free_units;
    for (int i = 0; i < n; ++i) {
      if (is_focal[static_cast<std::size_t>(i)]) {
        fixed_treated += fc.realized[i];
      } else {
        free_units.push_back(i);
      }
    }
    const int remaining = cd->m - fixed_treated;
    check(remaining >= 0 && remaining <= static_cast<int>(free_units.size()),
          kZeroProb);
    for (int pick : rng.choose_k(static_cast<int>(free_units.size()), remaining)) {
      z[free_units[static_cast<std::size_t>(pick)]] = 1;
    }
    return Assignment{std::move(z)};
  }

  // Two-stage: condition cluster selection and within-cluster treated sets
  // on the focal pattern. Selection stays a fixed-size subset, but clusters
  // are reweighted by the probability that a uniform treated set reproduces
  // the focal pattern, w_c = C(n_c - f_c, t - a_c) / C(n_c, t).
  const auto& ts = std::get<TwoStageClusterDesign>(base);
  const int t = ts.treated_per_cluster;
  const int k = static_cast<int>(ts.clusters.size());

  std::vector<int> forced;              // clusters with a treated focal unit
  std::vector<int> selectable;          // clusters with no treated focal unit
  std::vector<double> selectable_w;
  std::vector<std::vector<int>> focal_treated(static_cast<std::size_t>(k));
  std::vector<std::vector<int>> nonfocal(static_cast<std::size_t>(k));

  for (int c = 0; c < k; ++c) {
    const auto& members = ts.clusters[static_cast<std::size_t>(c)];
    int f_c = 0;
    for (int u : members) {
      if (is_focal[static_cast<std::size_t>(u)]) {
        ++f_c;
        if (fc.realized[u] == 1) {
          focal_treated[static_cast<std::size_t>(c)].push_back(u);
        }
      } else {
        nonfocal[static_cast<std::size_t>(c)].push_back(u);
      }
    }
    const int a_c = static_cast<int>(focal_treated[static_cast<std::size_t>(c)].size());
    const int n_c = static_cast<int>(members.size());
    check(a_c <= t, kZeroProb);
    const double w = binom(n_c - f_c, t - a_c) / binom(n_c, t);
    if (a_c > 0) {
      check(w > 0.0, kZeroProb);
      forced.push_back(c);
    } else {
      selectable.push_back(c);
      selectable_w.push_back(w);
    }
  }

  const int s_rem = ts.selected_count - static_cast<int>(forced.size());
  check(s_rem >= 0, kZeroProb);
  std::vector<int> selected = forced;
  for (int idx : weighted_fixed_size_subset(selectable_w, s_rem, rng)) {
    selected.push_back(selectable[static_cast<std::size_t>(idx)]);
  }

  for (int c : selected) {
    const auto& extra_pool = nonfocal[static_cast<std::size_t>(c)];
    const int a_c = static_cast<int>(focal_treated[static_cast<std::size_t>(c)].size());
    for (int u : focal_treated[static_cast<std::size_t>(c)]) z[u] = 1;
    for (int pick : rng.choose_k(static_cast<int>(extra_pool.size()), t - a_c)) {
      z[extra_pool[static_cast<std::size_t>(pick)]] = 1;
    }
  }
  return Assignment{std::move(z)};
}

Assignment draw_imbalance(const Design& base, const ImbalanceConstraint& ic,
                          RngStream& rng) {
  check(static_cast<bool>(ic.pvalue),
        "imbalance conditioning: missing p-value function");
  check(ic.max_attempts >= 1, "imbalance conditioning: bad attempt budget");
  for (int attempt = 0; attempt < ic.max_attempts; ++attempt) {
    Assignment z = draw(base, rng);
    if (ic.pvalue(z) <= ic.threshold) return z;
  }
  fail("imbalance conditioning: rejection budget exhausted after " +
       std::to_string(ic.max_attempts) + " attempts");
}

}  // namespace

Assignment draw(const ConditionalDesign& design, RngStream& rng) {
  validate_design(design.base);
  if (const auto* fc = std::get_if<FocalConstraint>(&design.constraint)) {
    return draw_focal(design.base, *fc, rng);
  }
  return draw_imbalance(design.base,
                        std::get<ImbalanceConstraint>(design.constraint), rng);
}

AssignmentSampler make_sampler(const Design& design) {
  return [design](RngStream& rng) { return draw(design, rng); };
}

AssignmentSampler make_sampler(const ConditionalDesign& design) {
  return [design](RngStream& rng) { return draw(design, rng); };
}

}  // namespace randomlab
