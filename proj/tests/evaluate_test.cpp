#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "habtox/csv.hpp"
#include "habtox/error.hpp"
#include "habtox/evaluate.hpp"
#include "support.hpp"

namespace habtox::evaluate {
namespace {

using models::Algorithm;

TEST(Metrics, ConfusionCounts) {
  std::vector<int> t, p;
  auto add = [&](int truth, int pred, int n) {
    for (int i = 0; i < n; ++i) {
      t.push_back(truth);
      p.push_back(pred);
    }
  };
  add(1, 1, 5);
  add(0, 1, 5);
  add(1, 0, 5);
  add(0, 0, 7);
  const auto m = compute_metrics(t, p);
  EXPECT_EQ(m.tp, 5u);
  EXPECT_EQ(m.fp, 5u);
  EXPECT_EQ(m.fn, 5u);
  EXPECT_EQ(m.tn, 7u);
  EXPECT_DOUBLE_EQ(m.precision, 0.5);
  EXPECT_DOUBLE_EQ(m.recall, 0.5);
  EXPECT_DOUBLE_EQ(m.f1, 0.5);
  EXPECT_DOUBLE_EQ(m.accuracy, 12.0 / 22.0);
}

TEST(Metrics, F1OfReportedPrecisionRecall) {
  EXPECT_NEAR(f1_score(0.74, 0.59), 0.65654135338, 1e-10);
  EXPECT_EQ(f1_score(0.0, 0.0), 0.0);
}

TEST(Metrics, NoPredictedPositivesIsZeroNotNan) {
  const std::vector<int> t = {1, 0, 1}, p = {0, 0, 0};
  const auto m = compute_metrics(t, p);
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.f1, 0.0);
  EXPECT_FALSE(std::isnan(m.f1));
}

TEST(Metrics, LengthMismatch) {
  try {
    compute_metrics(std::vector<int>{1, 0}, std::vector<int>{1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::LengthMismatch);
  }
}

TEST(Objective, ParseAndSelect) {
  Metrics m;
  m.precision = 0.1;
  m.recall = 0.2;
  m.f1 = 0.3;
  EXPECT_EQ(objective_value(m, parse_objective("recall")), 0.2);
  EXPECT_EQ(objective_value(m, parse_objective("precision")), 0.1);
  EXPECT_EQ(objective_value(m, parse_objective("f1")), 0.3);
  EXPECT_THROW(parse_objective("auc"), Error);
}

TEST(KFold, BalancedTwentyGivesTwoAndTwo) {
  std::vector<int> y(20, 0);
  std::fill(y.begin() + 10, y.end(), 1);
  const auto folds = stratified_kfold(y, 5, 1);
  ASSERT_EQ(folds.size(), 5u);
  for (const auto& f : folds) {
    EXPECT_EQ(f.size(), 4u);
    EXPECT_EQ(std::ranges::count_if(f, [&](std::size_t i) { return y[i] == 1; }), 2);
  }
}

TEST(KFold, PartitionAndProportionProperty) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng.below(6);
    const std::size_t n0 = k + rng.below(100), n1 = k + rng.below(40);
    std::vector<int> y(n0, 0);
    y.insert(y.end(), n1, 1);
    Rng(trial).shuffle(y);
    const auto folds = stratified_kfold(y, k, trial);
    std::vector<std::size_t> all;
    for (const auto& f : folds) {
      all.insert(all.end(), f.begin(), f.end());
      const double pos = static_cast<double>(std::ranges::count_if(f, [&](std::size_t i) { return y[i] == 1; }));
      EXPECT_LE(std::abs(pos - static_cast<double>(n1) / k), 1.0);
      const double neg = static_cast<double>(f.size()) - pos;
      EXPECT_LE(std::abs(neg - static_cast<double>(n0) / k), 1.0);
    }
    std::ranges::sort(all);
    std::vector<std::size_t> want(n0 + n1);
    std::iota(want.begin(), want.end(), std::size_t{0});
    ASSERT_EQ(all, want);
    EXPECT_EQ(stratified_kfold(y, k, trial), folds);
  }
}

TEST(KFold, TooFewPerClass) {
  const std::vector<int> y = {0, 0, 0, 0, 0, 0, 1, 1, 1, 1};
  try {
    stratified_kfold(y, 5, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooFewPerClass);
  }
}

// Strategies this low leave both classes untouched.
const resample::ResampleConfig kIdentity{3, 0.01, 0.01};

GridCell tree_cell(const std::string& id, std::optional<std::size_t> depth,
                   resample::ResampleConfig r = kIdentity) {
  models::TreeConfig t;
  t.max_depth = depth;
  return {id, t, r};
}

LabeledData xor_data(std::size_t per_quadrant, std::uint64_t seed) {
  Rng rng(seed);
  LabeledData d;
  d.x = FeatureMatrix(0, 2);
  for (int q = 0; q < 4; ++q) {
    const int a = q & 1, b = q >> 1;
    for (std::size_t i = 0; i < per_quadrant; ++i) {
      const std::array<double, 2> row{a + rng.uniform(-0.3, 0.3), b + rng.uniform(-0.3, 0.3)};
      d.append(row, a ^ b);
    }
  }
  return d;
}

TEST(GridSearch, SingleCellWins) {
  const auto d = xor_data(10, 1);
  const std::vector cells = {tree_cell("dt-000", 2)};
  const auto g = grid_search(d, Algorithm::dt, cells, 4);
  EXPECT_EQ(g.best, 0u);
  EXPECT_TRUE(g.any_succeeded);
  EXPECT_EQ(g.results[0].fold_values.size(), 5u);
}

// Positives sit in the middle of three clusters along feature 0; feature 1 is noise.
LabeledData band_data(std::size_t per_cluster, std::uint64_t seed) {
  Rng rng(seed);
  LabeledData d;
  d.x = FeatureMatrix(0, 2);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < per_cluster; ++i) {
      const std::array<double, 2> row{c + rng.uniform(-0.2, 0.2), rng.uniform(0.0, 1.0)};
      d.append(row, c == 1 ? 1 : 0);
    }
  }
  return d;
}

TEST(GridSearch, DeeperTreeWinsOnBand) {
  // One threshold leaves a half-negative leaf: precision 1/2 at best.
  const auto d = band_data(20, 2);
  const std::vector cells = {tree_cell("dt-000", 1), tree_cell("dt-001", 3)};
  const auto g = grid_search(d, Algorithm::dt, cells, 5);
  EXPECT_EQ(g.best, 1u);
  EXPECT_GT(g.results[1].mean, 0.95);
  EXPECT_LT(g.results[0].mean, 0.75);
}

TEST(GridSearch, FailedCellIsIsolated) {
  const auto d = test::blobs(60, 12, 3, 2.0, 3);
  const std::vector cells = {tree_cell("dt-000", 2, {20, 0.5, 0.5}), tree_cell("dt-001", 2, {3, 0.5, 0.5})};
  const auto g = grid_search(d, Algorithm::dt, cells, 6);
  EXPECT_TRUE(g.results[0].failed);
  EXPECT_TRUE(std::isinf(g.results[0].mean));
  EXPECT_FALSE(g.results[0].error.empty());
  EXPECT_FALSE(g.results[1].failed);
  EXPECT_EQ(g.best, 1u);
}

TEST(GridSearch, TiesGoToFirstCell) {
  const auto d = test::blobs(40, 20, 2, 6.0, 4);
  const std::vector cells = {tree_cell("dt-000", 3), tree_cell("dt-001", 3), tree_cell("dt-002", 4)};
  const auto g = grid_search(d, Algorithm::dt, cells, 7);
  EXPECT_EQ(g.results[0].mean, g.results[1].mean);
  EXPECT_LE(g.best, 2u);
  EXPECT_NE(g.best, 1u);
}

TEST(GridSearch, ThreadCountDoesNotChangeResults) {
  const auto d = test::blobs(50, 20, 3, 1.0, 5);
  const auto spec = GridSpec::small();
  const auto cells = spec.cells(Algorithm::dt);
  GridOptions one;
  GridOptions many;
  many.threads = 4;
  const auto a = grid_search(d, Algorithm::dt, cells, 11, one);
  const auto b = grid_search(d, Algorithm::dt, cells, 11, many);
  ASSERT_EQ(a.results.size(), b.results.size());
  for (std::size_t c = 0; c < a.results.size(); ++c) EXPECT_EQ(a.results[c].fold_values, b.results[c].fold_values);
  EXPECT_EQ(a.best, b.best);
}

TEST(FoldData, ValidationRowsAreUntouchedOriginals) {
  const auto d = test::blobs(80, 15, 3, 1.0, 6);
  const auto folds = stratified_kfold(d.y, 5, 1);
  for (const auto& f : folds) {
    const auto [tr, va] = fold_data(d, f, {3, 0.6, 0.7}, 9);
    ASSERT_EQ(va.size(), f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
      EXPECT_TRUE(va.origin.empty() || va.origin[i] == RowOrigin::original);
      EXPECT_TRUE(std::ranges::equal(va.x.row(i), d.x.row(f[i])));
      EXPECT_EQ(va.y[i], d.y[f[i]]);
    }
    EXPECT_GT(std::ranges::count(tr.origin, RowOrigin::synthetic), 0);
  }
}

TEST(FoldData, RejectsSyntheticValidationRows) {
  auto d = test::blobs(30, 10, 2, 1.0, 7);
  const auto aug = resample_train(d, {3, 0.6, 1.0}, 1);
  std::vector<std::size_t> rows{aug.size() - 1};
  ASSERT_EQ(aug.origin.back(), RowOrigin::synthetic);
  EXPECT_THROW(fold_data(aug, rows, kIdentity, 1), Error);
}

TEST(PrCurve, HandSweep) {
  const std::vector<double> s = {0.6, 0.9, 0.4, 0.8, 0.5, 0.7};
  const std::vector<int> y = {1, 1, 0, 0, 0, 1};
  // Descending: 0.9(+) 0.8(-) 0.7(+) 0.6(+) -> stops at full recall.
  const auto c = pr_curve(s, y);
  ASSERT_EQ(c.size(), 4u);
  const double want[4][3] = {{0.9, 1.0 / 3, 1.0}, {0.8, 1.0 / 3, 0.5}, {0.7, 2.0 / 3, 2.0 / 3}, {0.6, 1.0, 0.75}};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(c[i].threshold, want[i][0]);
    EXPECT_DOUBLE_EQ(c[i].recall, want[i][1]);
    EXPECT_DOUBLE_EQ(c[i].precision, want[i][2]);
  }
  EXPECT_EQ(interpolated_precision(c, 0.0), 1.0);
  EXPECT_EQ(interpolated_precision(c, 0.4), 2.0 / 3);
  EXPECT_EQ(interpolated_precision(c, 1.0), 0.75);
}

TEST(PrCurve, PerfectScorer) {
  const std::vector<double> s = {0.9, 0.8, 0.2, 0.1, 0.95};
  const std::vector<int> y = {1, 1, 0, 0, 1};
  for (const auto& p : pr_curve(s, y)) EXPECT_EQ(p.precision, 1.0);
}

TEST(PrCurve, ConstantScorer) {
  const std::vector<double> s(8, 0.3);
  const std::vector<int> y = {1, 0, 0, 1, 0, 0, 0, 0};
  const auto c = pr_curve(s, y);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].recall, 1.0);
  EXPECT_EQ(c[0].precision, 0.25);
}

TEST(PrCurve, NoPositives) {
  try {
    pr_curve(std::vector<double>{0.1, 0.2}, std::vector<int>{0, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoPositives);
  }
}

TEST(PrCurve, AverageOnFixedGrid) {
  const std::vector<std::vector<PrPoint>> curves = {{{0.9, 0.5, 1.0}, {0.5, 1.0, 0.5}}, {{0.7, 1.0, 0.25}}};
  const auto avg = average_pr(curves);
  ASSERT_EQ(avg.size(), 101u);
  EXPECT_DOUBLE_EQ(avg[0].second, (1.0 + 0.25) / 2);
  EXPECT_DOUBLE_EQ(avg[50].second, (1.0 + 0.25) / 2);
  EXPECT_DOUBLE_EQ(avg[51].second, (0.5 + 0.25) / 2);
  EXPECT_DOUBLE_EQ(avg[100].first, 1.0);
}

TEST(Grid, DefaultsContainReferenceWinners) {
  const auto def = GridSpec::defaults();
  const auto ref = GridSpec::reference();
  for (Algorithm a : {Algorithm::dt, Algorithm::rf, Algorithm::svm, Algorithm::mlp}) {
    const auto all = def.cells(a);
    std::set<std::string> described;
    for (const auto& c : all) described.insert(c.description());
    for (const auto& c : ref.cells(a)) EXPECT_TRUE(described.contains(c.description())) << c.description();
  }
  EXPECT_EQ(def.cells(Algorithm::dt).size(), 20u * 24u);
  EXPECT_EQ(def.cells(Algorithm::rf).size(), 6u * 24u);
}

TEST(Grid, CellIdsAreUniqueAndOrdered) {
  const auto cells = GridSpec::defaults().cells(Algorithm::svm);
  EXPECT_EQ(cells.front().id, "svm-000");
  std::set<std::string> ids;
  for (const auto& c : cells) EXPECT_TRUE(ids.insert(c.id).second);
}

EvalOptions quick_options() {
  EvalOptions o;
  o.iterations = 2;
  o.algorithms = {Algorithm::dt, Algorithm::svm};
  o.grid.folds = 3;
  return o;
}

TEST(RepeatedEval, SingleIterationHasZeroStd) {
  const auto d = test::blobs(70, 30, 4, 1.5, 8);
  auto o = quick_options();
  o.iterations = 1;
  const auto r = repeated_eval(d, GridSpec::small(), o, 3);
  ASSERT_EQ(r.summaries.size(), 2u);
  for (const auto& s : r.summaries) {
    EXPECT_EQ(s.iterations, 1u);
    EXPECT_EQ(s.f1_std, 0.0);
    EXPECT_EQ(s.precision_std, 0.0);
    const auto it = std::ranges::find(r.iterations, s.algorithm, &IterationResult::algorithm);
    EXPECT_EQ(s.f1_mean, it->metrics.f1);
  }
}

TEST(RepeatedEval, SummaryRecomputableFromRows) {
  const auto d = test::blobs(70, 30, 4, 1.5, 9);
  auto o = quick_options();
  o.iterations = 3;
  const auto r = repeated_eval(d, GridSpec::small(), o, 4);
  EXPECT_EQ(r.iterations.size(), 6u);
  for (const auto& s : r.summaries) {
    std::vector<double> f;
    for (const auto& row : r.iterations) {
      if (row.algorithm == s.algorithm) f.push_back(row.metrics.f1);
    }
    const double mean = std::accumulate(f.begin(), f.end(), 0.0) / f.size();
    double var = 0.0;
    for (double v : f) var += (v - mean) * (v - mean);
    EXPECT_NEAR(s.f1_mean, mean, 1e-15);
    EXPECT_NEAR(s.f1_std, std::sqrt(var / f.size()), 1e-15);
    EXPECT_NEAR(s.f1_of_means, f1_score(s.precision_mean, s.recall_mean), 1e-15);
  }
  // Test split is 30% of 100 rows.
  for (const auto& row : r.iterations) {
    const auto& m = row.metrics;
    EXPECT_EQ(m.tp + m.fp + m.fn + m.tn, 30u);
    EXPECT_EQ(m.tp + m.fn, 9u);
  }
}

TEST(RepeatedEval, DeterministicAcrossThreads) {
  const auto d = test::blobs(60, 25, 3, 1.5, 10);
  auto o = quick_options();
  const auto a = repeated_eval(d, GridSpec::small(), o, 5);
  o.grid.threads = 3;
  const auto b = repeated_eval(d, GridSpec::small(), o, 5);
  ASSERT_EQ(a.iterations.size(), b.iterations.size());
  for (std::size_t i = 0; i < a.iterations.size(); ++i) {
    EXPECT_EQ(a.iterations[i].cell_id, b.iterations[i].cell_id);
    EXPECT_EQ(a.iterations[i].metrics.f1, b.iterations[i].metrics.f1);
  }
}

TEST(RepeatedEval, WritersProduceExpectedShapes) {
  const auto d = test::blobs(60, 25, 3, 1.5, 11);
  const auto r = repeated_eval(d, GridSpec::small(), quick_options(), 6);
  test::TempDir dir("eval_writers");
  write_eval_report(r, dir / "eval_report.csv");
  write_eval_summary(r, dir / "eval_summary.csv");
  write_pr_curves(r, dir / "pr_curve.csv");
  write_grid_table(r, dir / "grid_table.csv");
  const auto report = csv::parse(csv::read_file(dir / "eval_report.csv"));
  EXPECT_EQ(report.rows.size(), 4u);
  EXPECT_EQ(report.header.front(), "iteration");
  const auto summary = csv::parse(csv::read_file(dir / "eval_summary.csv"));
  EXPECT_EQ(summary.rows.size(), 2u);
  const auto curves = csv::parse(csv::read_file(dir / "pr_curve.csv"));
  EXPECT_GT(curves.rows.size(), 101u);
  const auto grid = csv::parse(csv::read_file(dir / "grid_table.csv"));
  const std::size_t cells = GridSpec::small().cells(Algorithm::dt).size() + GridSpec::small().cells(Algorithm::svm).size();
  EXPECT_EQ(grid.rows.size(), 2 * cells);
}

}  // namespace
}  // namespace habtox::evaluate
