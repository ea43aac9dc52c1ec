#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "doctest.h"
#include "randomlab/rng.hpp"

using namespace randomlab;

TEST_CASE("identical seeds reproduce the exact draw sequence") {
  RngStream a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

  RngStream c(42), d(43);
  bool all_equal = true;
  for (int i = 0; i < 16; ++i) all_equal &= (c.next_u64() == d.next_u64());
  CHECK_FALSE(all_equal);
}

TEST_CASE("substreams are deterministic and label/index sensitive") {
  RngStream root(7);
  RngStream s1 = root.substream("fit", 3);
  RngStream s2 = root.substream("fit", 3);
  CHECK(s1.seed() == s2.seed());
  CHECK(s1.next_u64() == s2.next_u64());

  CHECK(root.substream("fit", 3).seed() != root.substream("fit", 4).seed());
  CHECK(root.substream("fit", 3).seed() != root.substream("gen", 3).seed());
  // substream() is const: deriving children must not disturb the parent.
  RngStream p(9), q(9);
  (void)p.substream("x", 1);
  CHECK(p.next_u64() == q.next_u64());
}

TEST_CASE("uniform draws are strictly inside (0,1) with a sane mean") {
  RngStream rng(11);
  double sum = 0.0;
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) {
    const double u = rng.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  // SE of the mean is about 0.00065; allow 5 of them.
  CHECK(std::abs(sum / draws - 0.5) < 0.0033);
}

TEST_CASE("uniform(lo,hi) stays inside the interval") {
  RngStream rng(5);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform(-3.0, 2.0);
    REQUIRE(u > -3.0);
    REQUIRE(u < 2.0);
  }
}

TEST_CASE("normal() has roughly standard moments") {
  RngStream rng(17);
  double sum = 0.0, sumsq = 0.0;
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) {
    const double x = rng.normal();
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / draws;
  const double var = sumsq / draws - mean * mean;
  CHECK(std::abs(mean) < 0.012);       // ~5 SE
  CHECK(std::abs(var - 1.0) < 0.025);  // ~5 SE of the variance estimate
}

TEST_CASE("below(bound) covers [0,bound) and nothing else") {
  RngStream rng(23);
  std::vector<int> counts(7, 0);
  const int draws = 70000;
  for (int i = 0; i < draws; ++i) {
    const std::uint64_t x = rng.below(7);
    REQUIRE(x < 7);
    ++counts[static_cast<int>(x)];
  }
  for (int c : counts) {
    // Expected 10000 each; 5 SE of binomial(70000, 1/7) is about 460.
    CHECK(std::abs(c - 10000) < 500);
  }
  CHECK(rng.below(1) == 0);
  CHECK_THROWS_AS((void)rng.below(0), Error);
}

TEST_CASE("bernoulli(p) frequency tracks p") {
  RngStream rng(29);
  int hits = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) hits += rng.bernoulli(0.3) ? 1 : 0;
  CHECK(std::abs(hits / static_cast<double>(draws) - 0.3) < 0.0073);  // 5 SE
}

TEST_CASE("choose_k returns a sorted k-subset without duplicates") {
  RngStream rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(30));
    const int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(n) + 1));
    const std::vector<int> s = rng.choose_k(n, k);
    REQUIRE(static_cast<int>(s.size()) == k);
    CHECK(std::is_sorted(s.begin(), s.end()));
    std::set<int> uniq(s.begin(), s.end());
    CHECK(static_cast<int>(uniq.size()) == k);
    for (int v : s) {
      CHECK(v >= 0);
      CHECK(v < n);
    }
  }
  CHECK(rng.choose_k(5, 0).empty());
  CHECK(rng.choose_k(4, 4) == std::vector<int>{0, 1, 2, 3});
  CHECK_THROWS_AS((void)rng.choose_k(3, 4), Error);
}

TEST_CASE("choose_k is close to uniform over subsets") {
  // All C(4,2)=6 subsets of {0..3} should appear with frequency ~1/6.
  RngStream rng(37);
  std::map<std::vector<int>, int> counts;
  const int draws = 60000;
  for (int i = 0; i < draws; ++i) ++counts[rng.choose_k(4, 2)];
  CHECK(counts.size() == 6);
  for (const auto& [subset, c] : counts) {
    CHECK(std::abs(c - 10000) < 600);  // ~6.5 SE of binomial(60000, 1/6)
  }
}

TEST_CASE("shuffle permutes in place and keeps multiset") {
  RngStream rng(41);
  std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> orig = v;
  rng.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == orig);
}
