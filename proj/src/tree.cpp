#include <algorithm>
#include <cmath>
#include <numeric>

#include "habtox/error.hpp"
#include "habtox/models.hpp"
#include "habtox/parallel.hpp"
#include "habtox/rng.hpp"

namespace habtox::models {
namespace {

// Gains closer than this are treated as ties.
constexpr double kGainTieTolerance = 1e-12;

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& x, std::span<const int> y, const TreeConfig& cfg,
              std::array<double, 2> weights, Rng& rng)
      : x_(x), y_(y), cfg_(cfg), weights_(weights), rng_(rng) {}

  std::vector<TreeNode> build(std::vector<std::size_t> rows) {
    grow(rows, 0);
    return std::move(nodes_);
  }

 private:
  int grow(std::vector<std::size_t>& rows, std::size_t depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    TreeNode node;
    for (std::size_t r : rows) node.counts[static_cast<std::size_t>(y_[r])] += 1.0;
    const std::array<double, 2> w = weighted(node.counts);
    node.value = w[1] / (w[0] + w[1]);

    const bool pure = node.counts[0] == 0.0 || node.counts[1] == 0.0;
    const bool depth_cap = cfg_.max_depth && depth >= *cfg_.max_depth;
    if (pure || depth_cap || rows.size() < cfg_.min_samples_split) {
      nodes_[static_cast<std::size_t>(id)] = node;
      return id;
    }
    const SplitCandidate split = best_split(rows, w);
    if (split.feature < 0) {
      nodes_[static_cast<std::size_t>(id)] = node;
      return id;
    }
    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (std::size_t r : rows) {
      (x_(r, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = grow(left, depth + 1);
    node.right = grow(right, depth + 1);
    nodes_[static_cast<std::size_t>(id)] = node;
    return id;
  }

  std::array<double, 2> weighted(const std::array<double, 2>& counts) const {
    return {counts[0] * weights_[0], counts[1] * weights_[1]};
  }

  std::vector<std::size_t> candidate_features() {
    const std::size_t d = x_.cols();
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (cfg_.max_features && *cfg_.max_features < d) rng_.shuffle(order);
    return order;
  }

  SplitCandidate best_split(const std::vector<std::size_t>& rows, const std::array<double, 2>& parent_w) {
    const double parent_total = parent_w[0] + parent_w[1];
    const double parent_imp = impurity(parent_w, cfg_.criterion);
    const std::size_t budget = cfg_.max_features.value_or(x_.cols());
    std::vector<SplitCandidate> per_feature;
    std::vector<std::pair<double, int>> column(rows.size());
    std::size_t visited = 0;
    // Constant features do not use up the per-split budget.
    for (std::size_t f : candidate_features()) {
      if (visited >= budget) break;
      for (std::size_t i = 0; i < rows.size(); ++i) column[i] = {x_(rows[i], f), y_[rows[i]]};
      std::ranges::sort(column, {}, &std::pair<double, int>::first);
      if (column.front().first == column.back().first) continue;
      ++visited;
      SplitCandidate best{static_cast<int>(f), 0.0, -1.0};
      std::array<double, 2> left{0.0, 0.0};
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        left[static_cast<std::size_t>(column[i].second)] += weights_[static_cast<std::size_t>(column[i].second)];
        const double lo = column[i].first;
        const double hi = column[i + 1].first;
        if (!(lo < hi)) continue;
        double threshold = (lo + hi) / 2.0;
        if (threshold >= hi || threshold < lo) threshold = lo;
        const std::array<double, 2> right{parent_w[0] - left[0], parent_w[1] - left[1]};
        const double wl = left[0] + left[1];
        const double wr = right[0] + right[1];
        const double child = (wl * impurity(left, cfg_.criterion) + wr * impurity(right, cfg_.criterion)) /
                             parent_total;
        const double gain = parent_imp - child;
        if (gain > best.gain + kGainTieTolerance) {
          best.gain = gain;
          best.threshold = threshold;
        }
      }
      per_feature.push_back(best);
    }
    SplitCandidate chosen;
    chosen.gain = -1.0;
    std::ranges::sort(per_feature, {}, &SplitCandidate::feature);
    for (const auto& c : per_feature) {
      if (c.gain > chosen.gain + kGainTieTolerance) chosen = c;
    }
    return chosen;
  }

  const FeatureMatrix& x_;
  std::span<const int> y_;
  const TreeConfig& cfg_;
  std::array<double, 2> weights_;
  Rng& rng_;
  std::vector<TreeNode> nodes_;
};

TreeModel fit_rows(const LabeledData& train, const TreeConfig& cfg, std::array<double, 2> weights,
                   std::vector<std::size_t> rows, Rng& rng) {
  TreeModel model;
  model.n_features = train.x.cols();
  model.config = cfg;
  TreeBuilder builder(train.x, train.y, cfg, weights, rng);
  model.nodes = builder.build(std::move(rows));
  return model;
}

}  // namespace

double impurity(std::span<const double> counts, Criterion criterion) {
  double total = 0.0;
  for (double c : counts) {
    if (c < 0.0) throw Error(ErrorKind::InvalidArgument, "negative class count");
    total += c;
  }
  if (!(total > 0.0)) throw Error(ErrorKind::AllZero, "impurity of an empty node");
  double acc = 0.0;
  if (criterion == Criterion::gini) {
    for (double c : counts) {
      const double p = c / total;
      acc += p * p;
    }
    return 1.0 - acc;
  }
  for (double c : counts) {
    if (c > 0.0) {
      const double p = c / total;
      acc -= p * std::log2(p);
    }
  }
  return acc;
}

std::array<double, 2> class_weights(std::span<const int> y, ClassWeight mode) {
  if (mode == ClassWeight::none) return {1.0, 1.0};
  std::array<double, 2> n{0.0, 0.0};
  for (int v : y) n[static_cast<std::size_t>(v)] += 1.0;
  const double total = n[0] + n[1];
  std::array<double, 2> w{1.0, 1.0};
  for (std::size_t c = 0; c < 2; ++c) {
    if (n[c] > 0.0) w[c] = total / (2.0 * n[c]);
  }
  return w;
}

std::size_t TreeModel::depth() const {
  std::size_t best = 0;
  std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    const auto [id, d] = stack.back();
    stack.pop_back();
    const TreeNode& n = nodes[static_cast<std::size_t>(id)];
    best = std::max(best, d);
    if (!n.is_leaf()) {
      stack.emplace_back(n.left, d + 1);
      stack.emplace_back(n.right, d + 1);
    }
  }
  return best;
}

std::size_t TreeModel::leaf_of(std::span<const double> x) const {
  std::size_t id = 0;
  while (!nodes[id].is_leaf()) {
    const TreeNode& n = nodes[id];
    id = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return id;
}

TreeModel fit_tree(const LabeledData& train, const TreeConfig& config, std::uint64_t seed) {
  train.validate();
  if (train.size() == 0) throw Error(ErrorKind::EmptyTrain, "cannot fit a tree on no rows");
  std::vector<std::size_t> rows(train.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  Rng rng(seed);
  return fit_rows(train, config, class_weights(train.y, config.class_weight), std::move(rows), rng);
}

double ForestModel::score(std::span<const double> x) const {
  double sum = 0.0;
  for (const auto& t : trees) sum += t.score(x);
  return sum / static_cast<double>(trees.size());
}

ForestModel fit_forest(const LabeledData& train, const ForestConfig& config, std::uint64_t seed) {
  train.validate();
  if (train.size() == 0) throw Error(ErrorKind::EmptyTrain, "cannot fit a forest on no rows");
  if (config.n_estimators == 0) throw Error(ErrorKind::InvalidArgument, "n_estimators must be >= 1");
  ForestModel forest;
  forest.n_features = train.x.cols();
  forest.config = config;
  TreeConfig tc;
  tc.criterion = config.criterion;
  tc.max_depth = config.max_depth;
  tc.class_weight = config.class_weight;
  tc.min_samples_split = config.min_samples_split;
  tc.max_features = config.max_features.value_or(
      std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(train.x.cols()))))));
  const auto weights = class_weights(train.y, config.class_weight);

  forest.trees.resize(config.n_estimators);
  forest.tree_seeds.resize(config.n_estimators);
  for (std::size_t t = 0; t < config.n_estimators; ++t) forest.tree_seeds[t] = derive_seed(seed, "tree", t);
  parallel_for(config.n_estimators, config.threads, [&](std::size_t t) {
    Rng rng(forest.tree_seeds[t]);
    std::vector<std::size_t> rows(train.size());
    if (config.bootstrap) {
      for (auto& r : rows) r = rng.below(train.size());
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    forest.trees[t] = fit_rows(train, tc, weights, std::move(rows), rng);
  });
  return forest;
}

}  // namespace habtox::models
