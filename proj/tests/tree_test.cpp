#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "habtox/error.hpp"
#include "habtox/models.hpp"
#include "habtox/rng.hpp"
#include "support.hpp"

namespace habtox::models {
namespace {

TEST(Impurity, KnownValues) {
  const std::array<double, 2> even{50, 50}, pure{30, 0};
  EXPECT_DOUBLE_EQ(impurity(even, Criterion::gini), 0.5);
  EXPECT_DOUBLE_EQ(impurity(even, Criterion::entropy), 1.0);
  EXPECT_EQ(impurity(pure, Criterion::gini), 0.0);
  EXPECT_EQ(impurity(pure, Criterion::entropy), 0.0);
  const std::array<double, 2> q{1, 3};
  EXPECT_DOUBLE_EQ(impurity(q, Criterion::gini), 0.375);
  EXPECT_NEAR(impurity(q, Criterion::entropy), 0.8112781244591328, 1e-15);
  try {
    impurity(std::array<double, 2>{0, 0}, Criterion::gini);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::AllZero);
  }
}

TEST(ClassWeights, Balanced) {
  const std::vector<int> y = {0, 0, 0, 1};
  const auto w = class_weights(y, ClassWeight::balanced);
  EXPECT_DOUBLE_EQ(w[0], 4.0 / 6.0);
  EXPECT_DOUBLE_EQ(w[1], 2.0);
  EXPECT_EQ(class_weights(y, ClassWeight::none), (std::array<double, 2>{1.0, 1.0}));
}

TEST(FitTree, OneDimensionalRootSplit) {
  const auto d = test::labeled({{1}, {2}, {3}, {10}, {11}, {12}}, {0, 0, 0, 1, 1, 1});
  const auto t = fit_tree(d, TreeConfig{});
  ASSERT_EQ(t.nodes.size(), 3u);
  EXPECT_EQ(t.nodes[0].feature, 0);
  EXPECT_EQ(t.nodes[0].threshold, 6.5);
  EXPECT_EQ(t.nodes[static_cast<std::size_t>(t.nodes[0].left)].value, 0.0);
  EXPECT_EQ(t.nodes[static_cast<std::size_t>(t.nodes[0].right)].value, 1.0);
}

TEST(FitTree, SingleClassIsLeaf) {
  const auto d = test::labeled({{1, 5}, {2, 4}, {3, 3}}, {1, 1, 1});
  const auto t = fit_tree(d, TreeConfig{});
  ASSERT_EQ(t.nodes.size(), 1u);
  EXPECT_EQ(t.depth(), 0u);
  EXPECT_EQ(t.nodes[0].value, 1.0);
}

TEST(FitTree, EmptyTrain) {
  LabeledData d;
  d.x = FeatureMatrix(0, 2);
  try {
    fit_tree(d, TreeConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyTrain);
  }
}

// Independent exhaustive scan of the root split.
struct RootSplit {
  int feature = -1;
  double threshold = 0.0;
  double gain = -1.0;
};

double plain_impurity(double n0, double n1, Criterion c) {
  const double n = n0 + n1;
  const double p0 = n0 / n, p1 = n1 / n;
  if (c == Criterion::gini) return 1.0 - p0 * p0 - p1 * p1;
  double h = 0.0;
  if (p0 > 0) h -= p0 * std::log2(p0);
  if (p1 > 0) h -= p1 * std::log2(p1);
  return h;
}

RootSplit scan_root(const LabeledData& d, Criterion c) {
  double n0 = 0, n1 = 0;
  for (int v : d.y) (v ? n1 : n0) += 1;
  const double parent = plain_impurity(n0, n1, c);
  RootSplit best;
  for (std::size_t f = 0; f < d.x.cols(); ++f) {
    std::set<double> values;
    for (std::size_t r = 0; r < d.size(); ++r) values.insert(d.x(r, f));
    for (auto it = values.begin(); std::next(it) != values.end(); ++it) {
      const double t = (*it + *std::next(it)) / 2.0;
      double l0 = 0, l1 = 0;
      for (std::size_t r = 0; r < d.size(); ++r) {
        if (d.x(r, f) <= t) (d.y[r] ? l1 : l0) += 1;
      }
      const double r0 = n0 - l0, r1 = n1 - l1;
      const double child = ((l0 + l1) * plain_impurity(l0, l1, c) + (r0 + r1) * plain_impurity(r0, r1, c)) /
                           (n0 + n1);
      const double gain = parent - child;
      if (gain > best.gain + 1e-12) best = {static_cast<int>(f), t, gain};
    }
  }
  return best;
}

TEST(FitTree, RootMatchesExhaustiveScan) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto d = test::random_data(60, 4, 0.35, seed);
    for (Criterion c : {Criterion::gini, Criterion::entropy}) {
      TreeConfig cfg;
      cfg.criterion = c;
      cfg.max_depth = 1;
      const auto t = fit_tree(d, cfg);
      const auto want = scan_root(d, c);
      ASSERT_FALSE(t.nodes[0].is_leaf());
      EXPECT_EQ(t.nodes[0].feature, want.feature) << seed;
      EXPECT_DOUBLE_EQ(t.nodes[0].threshold, want.threshold) << seed;
    }
  }
}

TEST(FitTree, CoversAndRoutingInvariants) {
  const auto d = test::random_data(150, 5, 0.3, 77);
  for (auto depth : {std::optional<std::size_t>{3}, std::optional<std::size_t>{}}) {
    TreeConfig cfg;
    cfg.max_depth = depth;
    const auto t = fit_tree(d, cfg);
    if (depth) EXPECT_LE(t.depth(), *depth);
    EXPECT_EQ(t.nodes[0].counts[0], static_cast<double>(d.count(0)));
    EXPECT_EQ(t.nodes[0].counts[1], static_cast<double>(d.count(1)));
    std::vector<std::array<double, 2>> routed(t.nodes.size(), {0.0, 0.0});
    for (std::size_t r = 0; r < d.size(); ++r) routed[t.leaf_of(d.x.row(r))][static_cast<std::size_t>(d.y[r])] += 1;
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
      const auto& n = t.nodes[i];
      if (n.is_leaf()) {
        EXPECT_EQ(routed[i], n.counts);
        continue;
      }
      const auto &l = t.nodes[static_cast<std::size_t>(n.left)], &rr = t.nodes[static_cast<std::size_t>(n.right)];
      EXPECT_EQ(l.counts[0] + rr.counts[0], n.counts[0]);
      EXPECT_EQ(l.counts[1] + rr.counts[1], n.counts[1]);
    }
    if (!depth) {
      // Unbounded trees on distinct points fit the training set exactly.
      for (std::size_t r = 0; r < d.size(); ++r) EXPECT_EQ(t.score(d.x.row(r)), d.y[r]);
    }
  }
}

TEST(FitTree, XorNeedsDepthTwo) {
  const auto d = test::labeled({{0, 0}, {0, 1}, {1, 0}, {1, 1}, {0, 0}, {0, 1}, {1, 0}, {1, 1}},
                               {0, 1, 1, 0, 0, 1, 1, 0});
  TreeConfig cfg;
  cfg.max_depth = 1;
  const auto shallow = fit_tree(d, cfg);
  cfg.max_depth = 2;
  const auto deep = fit_tree(d, cfg);
  int correct = 0;
  for (std::size_t r = 0; r < d.size(); ++r) {
    EXPECT_EQ(shallow.score(d.x.row(r)), 0.5);
    correct += (deep.score(d.x.row(r)) > 0.5) == (d.y[r] == 1);
  }
  EXPECT_EQ(correct, 8);
}

TEST(FitTree, BalancedWeightsShiftLeafValue) {
  const auto d = test::labeled({{0}, {0}, {0}, {0}, {0}, {0}, {1}, {1}}, {0, 0, 0, 0, 0, 1, 1, 1});
  TreeConfig cfg;
  cfg.max_depth = 1;
  const auto plain = fit_tree(d, cfg);
  cfg.class_weight = ClassWeight::balanced;
  const auto weighted = fit_tree(d, cfg);
  const std::array<double, 1> zero{0.0};
  EXPECT_DOUBLE_EQ(plain.score(zero), 1.0 / 6.0);
  // weights: neg 8/10, pos 8/6 -> (4/3) / (5 * 0.8 + 4/3)
  EXPECT_DOUBLE_EQ(weighted.score(zero), 0.25);
  EXPECT_EQ(weighted.nodes[1].counts, plain.nodes[1].counts);
}

TEST(FitTree, MinSamplesSplit) {
  const auto d = test::random_data(40, 3, 0.5, 3);
  TreeConfig cfg;
  cfg.min_samples_split = 41;
  EXPECT_EQ(fit_tree(d, cfg).nodes.size(), 1u);
}

TEST(FitTree, DeterministicWithFeatureSampling) {
  const auto d = test::random_data(100, 6, 0.4, 9);
  TreeConfig cfg;
  cfg.max_features = 2;
  const auto a = fit_tree(d, cfg, 5), b = fit_tree(d, cfg, 5);
  ASSERT_EQ(a.nodes.size(), b.nodes.size());
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    EXPECT_EQ(a.nodes[i].feature, b.nodes[i].feature);
    EXPECT_EQ(a.nodes[i].threshold, b.nodes[i].threshold);
  }
}

bool same_tree(const TreeModel& a, const TreeModel& b) {
  if (a.nodes.size() != b.nodes.size()) return false;
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    const auto &x = a.nodes[i], &y = b.nodes[i];
    if (x.feature != y.feature || x.threshold != y.threshold || x.left != y.left || x.counts != y.counts) return false;
  }
  return true;
}

TEST(FitForest, SingleTreeWithoutBootstrapReducesToTree) {
  const auto d = test::random_data(80, 9, 0.4, 21);
  ForestConfig fc;
  fc.n_estimators = 1;
  fc.bootstrap = false;
  const auto forest = fit_forest(d, fc, 13);
  TreeConfig tc;
  tc.max_features = 3;
  const auto tree = fit_tree(d, tc, derive_seed(13, "tree", 0));
  EXPECT_TRUE(same_tree(forest.trees[0], tree));
}

TEST(FitForest, ScoresAreMeanOfTrees) {
  const auto d = test::random_data(120, 4, 0.3, 22);
  ForestConfig fc;
  fc.n_estimators = 25;
  const auto f = fit_forest(d, fc, 4);
  ASSERT_EQ(f.trees.size(), 25u);
  auto rev = f;
  std::ranges::reverse(rev.trees);
  const auto probe = test::random_data(50, 4, 0.5, 23);
  for (std::size_t r = 0; r < probe.size(); ++r) {
    const double s = f.score(probe.x.row(r));
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
    EXPECT_NEAR(rev.score(probe.x.row(r)), s, 1e-15);
  }
}

TEST(FitForest, IdenticalTreesGiveTreeScore) {
  const auto d = test::random_data(60, 3, 0.4, 24);
  ForestModel f;
  f.n_features = 3;
  const auto t = fit_tree(d, TreeConfig{});
  f.trees.assign(4, t);
  for (std::size_t r = 0; r < d.size(); ++r) EXPECT_EQ(f.score(d.x.row(r)), t.score(d.x.row(r)));
}

TEST(FitForest, SeparableTrainingAccuracy) {
  const auto d = test::blobs(50, 50, 3, 8.0, 25);
  ForestConfig fc;
  fc.n_estimators = 50;
  const auto f = fit_forest(d, fc, 1);
  for (std::size_t r = 0; r < d.size(); ++r) EXPECT_EQ(f.score(d.x.row(r)) > 0.5, d.y[r] == 1);
}

TEST(FitForest, ThreadCountDoesNotChangeResult) {
  const auto d = test::random_data(100, 5, 0.3, 26);
  ForestConfig fc;
  fc.n_estimators = 20;
  fc.threads = 1;
  const auto a = fit_forest(d, fc, 8);
  fc.threads = 4;
  const auto b = fit_forest(d, fc, 8);
  for (std::size_t t = 0; t < 20; ++t) EXPECT_TRUE(same_tree(a.trees[t], b.trees[t]));
}

}  // namespace
}  // namespace habtox::models
