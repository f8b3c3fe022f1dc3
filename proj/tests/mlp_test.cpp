#include <gtest/gtest.h>

#include <cmath>

#include "habtox/error.hpp"
#include "habtox/models.hpp"
#include "support.hpp"

namespace habtox::models {
namespace {

MlpParams random_params(std::size_t inputs, std::size_t hidden, std::uint64_t seed) {
  Rng rng(seed);
  MlpParams p;
  p.inputs = inputs;
  p.hidden = hidden;
  for (std::size_t i = 0; i < inputs * hidden; ++i) p.w1.push_back(rng.uniform(-1, 1));
  for (std::size_t i = 0; i < hidden; ++i) p.b1.push_back(rng.uniform(-1, 1));
  for (std::size_t i = 0; i < hidden; ++i) p.w2.push_back(rng.uniform(-1, 1));
  p.b2 = rng.uniform(-1, 1);
  return p;
}

TEST(Mlp, GradientMatchesCentralDifferences) {
  const auto d = test::random_data(5, 4, 0.5, 3);
  FeatureMatrix x = d.x;
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 4; ++c) x(r, c) = (x(r, c) - 5.0) / 3.0;
  }
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto p = random_params(4, 3, seed);
    const auto g = mlp_gradient(p, x, d.y, 0.1);
    auto theta = p.flatten();
    ASSERT_EQ(g.size(), theta.size());
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double h = 1e-6;
      const double keep = theta[k];
      theta[k] = keep + h;
      p.unflatten(theta);
      const double up = mlp_loss(p, x, d.y, 0.1);
      theta[k] = keep - h;
      p.unflatten(theta);
      const double down = mlp_loss(p, x, d.y, 0.1);
      theta[k] = keep;
      p.unflatten(theta);
      const double fd = (up - down) / (2 * h);
      EXPECT_LE(std::abs(fd - g[k]), 1e-5 * std::max(1.0, std::abs(fd))) << "param " << k;
    }
  }
}

TEST(Mlp, FlattenRoundTrip) {
  auto p = random_params(3, 2, 1);
  const auto flat = p.flatten();
  EXPECT_EQ(flat.size(), p.size());
  MlpParams q = p;
  q.unflatten(flat);
  EXPECT_EQ(q.flatten(), flat);
  EXPECT_THROW(q.unflatten(std::vector<double>(3)), Error);
}

TEST(Mlp, ZeroVarianceFeatureScalesToZero) {
  auto d = test::random_data(20, 3, 0.5, 4);
  for (std::size_t r = 0; r < 20; ++r) d.x(r, 1) = 7.0;
  MlpConfig cfg;
  cfg.excluded_column.reset();
  cfg.max_iter = 3;
  const auto m = fit_mlp(d, cfg, 1);
  EXPECT_EQ(m.scale[1], 1.0);
  EXPECT_EQ(m.transform(d.x.row(5))[1], 0.0);
}

TEST(Mlp, MonthColumnExcludedByDefault) {
  const auto d = test::random_data(20, kFeatureCount, 0.5, 5);
  MlpConfig cfg;
  cfg.max_iter = 2;
  const auto m = fit_mlp(d, cfg, 1);
  EXPECT_EQ(m.input_columns.size(), kFeatureCount - 1);
  EXPECT_EQ(m.input_columns.front(), 1u);
  // Changing the month does not change the output.
  auto row = std::vector<double>(d.x.row(0).begin(), d.x.row(0).end());
  const double s = m.score(row);
  row[0] += 100.0;
  EXPECT_EQ(m.score(row), s);
}

TEST(Mlp, AndFixtureIsLearned) {
  LabeledData d;
  d.x = FeatureMatrix(0, 2);
  Rng rng(6);
  for (int i = 0; i < 80; ++i) {
    const double a = rng.bernoulli(0.5), b = rng.bernoulli(0.5);
    const std::array<double, 2> row{a + 0.05 * rng.normal(), b + 0.05 * rng.normal()};
    d.append(row, a > 0.5 && b > 0.5 ? 1 : 0);
  }
  MlpConfig cfg;
  cfg.excluded_column.reset();
  cfg.hidden = 3;
  cfg.learning_rate = 1e-2;
  const auto m = fit_mlp(d, cfg, 11);
  EXPECT_LE(m.epochs, 5000u);
  for (std::size_t r = 0; r < d.size(); ++r) EXPECT_EQ(m.score(d.x.row(r)) > 0.5, d.y[r] == 1) << r;
}

TEST(Mlp, FullBatchLossNonIncreasingAtSmallRate) {
  const auto d = test::blobs(30, 20, 4, 1.0, 7);
  MlpConfig cfg;
  cfg.excluded_column.reset();
  cfg.batch_size = d.size();
  cfg.learning_rate = 1e-4;
  cfg.max_iter = 50;
  cfg.n_iter_no_change = 1000;
  const auto m = fit_mlp(d, cfg, 3);
  ASSERT_EQ(m.loss_curve.size(), 50u);
  for (std::size_t e = 1; e < 50; ++e) EXPECT_LE(m.loss_curve[e], m.loss_curve[e - 1] + 1e-12) << e;
}

TEST(Mlp, DeterministicPerSeed) {
  const auto d = test::blobs(30, 20, 4, 1.0, 8);
  MlpConfig cfg;
  cfg.max_iter = 20;
  cfg.excluded_column.reset();
  EXPECT_EQ(fit_mlp(d, cfg, 4).params.flatten(), fit_mlp(d, cfg, 4).params.flatten());
  EXPECT_NE(fit_mlp(d, cfg, 4).params.flatten(), fit_mlp(d, cfg, 5).params.flatten());
}

TEST(Mlp, ArityChecked) {
  const auto d = test::blobs(10, 10, 3, 1.0, 9);
  MlpConfig cfg;
  cfg.max_iter = 1;
  cfg.excluded_column.reset();
  const auto m = fit_mlp(d, cfg, 1);
  EXPECT_THROW(m.score(std::vector<double>(2)), Error);
}

}  // namespace
}  // namespace habtox::models
