#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "habtox/error.hpp"
#include "habtox/resample.hpp"
#include "support.hpp"

namespace habtox::resample {
namespace {

TEST(Knn, OneDimensional) {
  const FeatureMatrix p(3, 1, {0.0, 1.0, 10.0});
  EXPECT_EQ(knn(p, 0, 1), std::vector<std::size_t>{1});
  EXPECT_EQ(knn(p, 2, 2), (std::vector<std::size_t>{1, 0}));
}

TEST(Knn, TiesGoToLowerIndex) {
  const FeatureMatrix p(3, 1, {5.0, 6.0, 4.0});
  EXPECT_EQ(knn(p, 0, 1), std::vector<std::size_t>{1});
}

TEST(Knn, ScopeRestrictsCandidates) {
  const FeatureMatrix p(4, 1, {0.0, 1.0, 2.0, 3.0});
  const std::vector<int> y = {1, 0, 0, 1};
  EXPECT_EQ(knn(p, 0, 1, y, 1), std::vector<std::size_t>{3});
  try {
    knn(p, 0, 2, y, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooFewNeighbors);
  }
}

TEST(Knn, AgreesWithExhaustiveScan) {
  const auto data = test::random_data(50, 5, 0.5, 8);
  for (std::size_t q = 0; q < 50; ++q) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t j = 0; j < 50; ++j) {
      if (j == q) continue;
      double d = 0.0;
      for (std::size_t c = 0; c < 5; ++c) d += std::pow(data.x(j, c) - data.x(q, c), 2);
      all.emplace_back(d, j);
    }
    std::ranges::sort(all);
    std::vector<std::size_t> want;
    for (std::size_t i = 0; i < 7; ++i) want.push_back(all[i].second);
    EXPECT_EQ(knn(data.x, q, 7), want);
  }
}

TEST(RoundCount, HalfAwayFromZero) {
  EXPECT_EQ(round_count(2.5), 3u);
  EXPECT_EQ(round_count(3.5), 4u);
  EXPECT_EQ(round_count(2.4999), 2u);
}

LabeledData counts(std::size_t neg, std::size_t pos, std::uint64_t seed) {
  Rng rng(seed);
  LabeledData d;
  d.x = FeatureMatrix(0, 3);
  std::vector<double> row(3);
  for (std::size_t i = 0; i < neg + pos; ++i) {
    for (auto& v : row) v = rng.uniform(0.0, 10.0);
    d.append(row, i < neg ? 0 : 1);
  }
  return d;
}

TEST(Smote, ReachesRatioTarget) {
  const auto out = smote(counts(100, 20, 1), ResampleConfig{3, 0.4, 0.5}, 7);
  EXPECT_EQ(out.count(1), 40u);
  EXPECT_EQ(out.count(0), 100u);
  EXPECT_EQ(std::ranges::count(out.origin, RowOrigin::synthetic), 20);
}

TEST(Smote, IdentityWhenAlreadyAboveTarget) {
  const auto in = counts(100, 20, 2);
  const auto out = smote(in, ResampleConfig{3, 0.1, 0.5}, 7);
  EXPECT_EQ(out.y, in.y);
  EXPECT_EQ(std::ranges::count(out.origin, RowOrigin::synthetic), 0);
}

TEST(Smote, IdenticalMinorityIsFixedPoint) {
  auto d = counts(50, 0, 3);
  const std::array<double, 3> p{1.5, -2.0, 7.25};
  for (int i = 0; i < 6; ++i) d.append(p, 1);
  const auto out = smote(d, ResampleConfig{3, 0.5, 0.5}, 1);
  for (std::size_t r = 56; r < out.size(); ++r) {
    EXPECT_TRUE(std::ranges::equal(out.x.row(r), p));
  }
}

TEST(Smote, SyntheticPointsLieOnParentSegment) {
  const auto in = counts(200, 30, 4);
  const auto res = smote_detailed(in, 5, 0.6, 9);
  ASSERT_EQ(res.data.size(), 200u + 30u + 90u);
  for (std::size_t s = 0; s < res.parents.size(); ++s) {
    const auto [a, b] = res.parents[s];
    EXPECT_EQ(in.y[a], 1);
    EXPECT_EQ(in.y[b], 1);
    const auto nn = knn(in.x, a, 5, in.y, 1);
    EXPECT_NE(std::ranges::find(nn, b), nn.end());
    const auto row = res.data.x.row(in.size() + s);
    // Common parameter u along the segment for every coordinate.
    std::optional<double> u;
    for (std::size_t c = 0; c < 3; ++c) {
      const double lo = std::min(in.x(a, c), in.x(b, c)), hi = std::max(in.x(a, c), in.x(b, c));
      EXPECT_GE(row[c], lo);
      EXPECT_LE(row[c], hi);
      const double span = in.x(b, c) - in.x(a, c);
      if (std::abs(span) > 1e-6) {
        const double uc = (row[c] - in.x(a, c)) / span;
        if (u) EXPECT_NEAR(uc, *u, 1e-9);
        u = uc;
      }
    }
  }
}

TEST(Smote, TooFewMinority) {
  try {
    smote(counts(20, 3, 5), ResampleConfig{3, 0.5, 0.5}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooFewMinority);
  }
}

TEST(Smote, DeterministicPerSeed) {
  const auto in = counts(100, 20, 6);
  const ResampleConfig cfg{3, 0.5, 0.5};
  EXPECT_EQ(smote(in, cfg, 4).x.data()[400], smote(in, cfg, 4).x.data()[400]);
  const auto a = smote(in, cfg, 4), b = smote(in, cfg, 5);
  EXPECT_FALSE(std::ranges::equal(a.x.data(), b.x.data()));
}

TEST(Undersample, ReachesRatioTarget) {
  const auto out = random_undersample(counts(100, 40, 7), 0.5, 3);
  EXPECT_EQ(out.count(0), 80u);
  EXPECT_EQ(out.count(1), 40u);
  EXPECT_EQ(random_undersample(counts(100, 40, 7), 1.0, 3).count(0), 40u);
}

TEST(Undersample, IdentityWhenTargetNotBelowCurrent) {
  const auto in = counts(50, 40, 8);
  const auto out = random_undersample(in, 0.7, 3);
  EXPECT_EQ(out.y, in.y);
}

TEST(Undersample, KeepsOriginalRowsInOrder) {
  const auto in = counts(100, 10, 9);
  const auto out = random_undersample(in, 0.5, 3);
  std::size_t cursor = 0;
  for (std::size_t r = 0; r < out.size(); ++r) {
    while (cursor < in.size() && !std::ranges::equal(in.x.row(cursor), out.x.row(r))) ++cursor;
    ASSERT_LT(cursor, in.size());
  }
}

TEST(Enn, HandComputedTable) {
  // neg 0.1 -> {0.0, 0.2, 0.3}; neg 0.0 -> {0.1, 0.2, 0.3}: both removed.
  const auto d = test::labeled({{0.0}, {0.1}, {0.2}, {0.3}, {0.4}}, {0, 0, 1, 1, 1});
  const auto r = enn(d, 3, 0);
  EXPECT_EQ(r.removed_indices, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(r.kept.size(), 3u);
}

TEST(Enn, SeparatedClustersIdentity) {
  const auto d = test::labeled({{0.0}, {0.1}, {0.2}, {0.3}, {9.0}, {9.1}, {9.2}, {9.3}},
                               {0, 0, 0, 0, 1, 1, 1, 1});
  EXPECT_TRUE(enn(d, 3, 0).removed_indices.empty());
}

TEST(Enn, RemovalSetIndependentOfRowOrder) {
  const auto d = test::blobs(60, 20, 2, 1.0, 12);
  const auto base = enn(d, 3, 0);
  std::vector<std::size_t> perm(d.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(3);
  for (int t = 0; t < 5; ++t) {
    rng.shuffle(perm);
    const auto shuffled = d.subset(perm);
    const auto r = enn(shuffled, 3, 0);
    std::vector<std::size_t> removed;
    for (std::size_t i : r.removed_indices) removed.push_back(perm[i]);
    std::ranges::sort(removed);
    EXPECT_EQ(removed, base.removed_indices);
  }
}

TEST(Enn, TooFewInstances) {
  const auto d = test::labeled({{0.0}, {1.0}, {2.0}}, {0, 1, 0});
  try {
    enn(d, 3, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooFewInstances);
  }
}

// Exact rounded targets over random configurations.
TEST(ResampleProperty, CardinalityContracts) {
  Rng rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = rng.bernoulli(0.5) ? 3 : 5;
    const std::size_t neg = 10 + rng.below(200);
    const std::size_t pos = k + 1 + rng.below(60);
    const double s_smote = rng.uniform(0.05, 1.0);
    const double s_under = rng.uniform(0.05, 1.0);
    const auto d = counts(neg, pos, static_cast<std::uint64_t>(trial));

    const auto o = smote(d, ResampleConfig{k, s_smote, 0.5}, trial);
    const std::size_t t1 = std::max<std::size_t>(pos, std::llround(s_smote * static_cast<double>(neg)));
    ASSERT_EQ(o.count(1), t1);
    ASSERT_EQ(o.count(0), neg);

    const auto u = random_undersample(d, s_under, trial);
    const std::size_t t2 = std::min<std::size_t>(neg, std::llround(static_cast<double>(pos) / s_under));
    ASSERT_EQ(u.count(0), t2);
    ASSERT_EQ(u.count(1), pos);

    const auto e = enn(d, 3, 0);
    ASSERT_EQ(e.kept.count(1), pos);
    for (std::size_t i : e.removed_indices) ASSERT_EQ(d.y[i], 0);
  }
}

TEST(ResampleConfig, Validation) {
  EXPECT_THROW((ResampleConfig{0, 0.4, 0.5}.validate()), Error);
  EXPECT_THROW((ResampleConfig{3, 0.0, 0.5}.validate()), Error);
  EXPECT_THROW((ResampleConfig{3, 0.4, 1.5}.validate()), Error);
  EXPECT_NO_THROW((ResampleConfig{3, 1.0, 1.0}.validate()));
}

}  // namespace
}  // namespace habtox::resample
