#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <vector>

#include "habtox/models.hpp"
#include "habtox/rng.hpp"

namespace habtox::test {

// Random tree with leaf covers drawn independently; internal covers are the
// sums of their children. Thresholds are drawn from the same range as x.
inline models::TreeModel fuzz_tree(Rng& rng, std::size_t n_features, std::size_t max_depth) {
  models::TreeModel t;
  t.n_features = n_features;
  struct Grow {
    Rng& rng;
    models::TreeModel& t;
    std::size_t n_features;
    std::size_t max_depth;
    int operator()(std::size_t depth) {
      const int id = static_cast<int>(t.nodes.size());
      t.nodes.emplace_back();
      const bool leaf = depth >= max_depth || (depth > 0 && rng.bernoulli(0.25));
      if (leaf) {
        models::TreeNode n;
        n.counts = {static_cast<double>(1 + rng.below(20)), static_cast<double>(rng.below(20))};
        n.value = n.counts[1] / (n.counts[0] + n.counts[1]);
        t.nodes[static_cast<std::size_t>(id)] = n;
        return id;
      }
      models::TreeNode n;
      n.feature = static_cast<int>(rng.below(n_features));
      n.threshold = rng.uniform(0.0, 10.0);
      n.left = (*this)(depth + 1);
      n.right = (*this)(depth + 1);
      const auto& l = t.nodes[static_cast<std::size_t>(n.left)];
      const auto& r = t.nodes[static_cast<std::size_t>(n.right)];
      n.counts = {l.counts[0] + r.counts[0], l.counts[1] + r.counts[1]};
      n.value = n.counts[1] / (n.counts[0] + n.counts[1]);
      t.nodes[static_cast<std::size_t>(id)] = n;
      return id;
    }
  };
  Grow{rng, t, n_features, max_depth}(0);
  return t;
}

// v(S): follow splits on known features, average unknown ones by cover.
inline double oracle_value(const models::TreeModel& t, std::span<const double> x, std::uint32_t known,
                           int node = 0) {
  const auto& n = t.nodes[static_cast<std::size_t>(node)];
  if (n.is_leaf()) return n.value;
  if (known >> n.feature & 1U) {
    return oracle_value(t, x, known, x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  const auto& l = t.nodes[static_cast<std::size_t>(n.left)];
  const auto& r = t.nodes[static_cast<std::size_t>(n.right)];
  return (l.cover() * oracle_value(t, x, known, n.left) + r.cover() * oracle_value(t, x, known, n.right)) /
         (l.cover() + r.cover());
}

// Shapley values by subset enumeration.
inline std::vector<double> oracle_shapley(const models::TreeModel& t, std::span<const double> x) {
  const std::size_t d = x.size();
  std::vector<double> fact(d + 1, 1.0);
  for (std::size_t i = 1; i <= d; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);
  std::vector<double> v(std::size_t{1} << d);
  for (std::uint32_t s = 0; s < v.size(); ++s) v[s] = oracle_value(t, x, s);
  std::vector<double> phi(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::uint32_t s = 0; s < v.size(); ++s) {
      if (s >> j & 1U) continue;
      const auto size = static_cast<std::size_t>(std::popcount(s));
      const double w = fact[size] * fact[d - size - 1] / fact[d];
      phi[j] += w * (v[s | (1U << j)] - v[s]);
    }
  }
  return phi;
}

}  // namespace habtox::test
