#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <vector>

#include "randomlab/common.hpp"

namespace randomlab {

// All randomness in the library flows through RngStream, a xoshiro256++
// generator whose seed is derived by hashing (master seed, label, index).
// Streams are never advanced across work items; every replicate / draw /
// tree gets its own stream keyed by indices, which is what makes results
// independent of scheduling and worker count.

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_label(std::string_view label) {
  // FNV-1a over the label bytes.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view label,
                                 std::uint64_t index = 0) {
  std::uint64_t s = seed ^ (hash_label(label) + 0x9e3779b97f4a7c15ULL);
  std::uint64_t mixed = splitmix64_next(s);
  s ^= index * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL;
  return mixed ^ splitmix64_next(s);
}

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed) {
    std::uint64_t s = seed;
    for (auto& word : state_) word = splitmix64_next(s);
  }

  std::uint64_t seed() const { return seed_; }

  RngStream substream(std::string_view label, std::uint64_t index = 0) const {
    return RngStream(derive_seed(seed_, label, index));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Strictly inside (0,1); the offset keeps 0 (and 1) unreachable so that
  // tie-breaking uniforms never collapse a p-value to zero.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Unbiased integer in [0, bound) via masked rejection.
  std::uint64_t below(std::uint64_t bound) {
    check(bound > 0, "rng: below() requires positive bound");
    if (bound == 1) return 0;
    std::uint64_t mask = ~std::uint64_t{0};
    mask >>= __builtin_clzll(bound - 1);
    for (;;) {
      const std::uint64_t x = next_u64() & mask;
      if (x < bound) return x;
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  // Uniform k-subset of {0,...,n-1} via partial Fisher-Yates; result sorted.
  std::vector<int> choose_k(int n, int k);

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t seed_;
  std::uint64_t state_[4];
};

inline std::vector<int> RngStream::choose_k(int n, int k) {
  check(k >= 0 && k <= n, "rng: choose_k needs 0 <= k <= n");
  std::vector<int> pool(n);
  for (int i = 0; i < n; ++i) pool[i] = i;
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(below(static_cast<std::uint64_t>(n - i)));
    std::swap(pool[i], pool[j]);
  }
  std::vector<int> out(pool.begin(), pool.begin() + k);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace randomlab
