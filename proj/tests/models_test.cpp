#include <gtest/gtest.h>

#include <bit>

#include <json.hpp>

#include "habtox/error.hpp"
#include "habtox/models.hpp"
#include "support.hpp"

namespace habtox::models {
namespace {

std::vector<ModelConfig> small_configs() {
  TreeConfig dt;
  dt.criterion = Criterion::entropy;
  dt.max_depth = 4;
  ForestConfig rf;
  rf.n_estimators = 15;
  SvmConfig svm;
  MlpConfig mlp;
  mlp.max_iter = 50;
  return {dt, rf, svm, mlp};
}

TEST(Models, ParseAlgorithm) {
  EXPECT_EQ(parse_algorithm("dt"), Algorithm::dt);
  EXPECT_EQ(parse_algorithm("rf"), Algorithm::rf);
  EXPECT_EQ(parse_algorithm("svm"), Algorithm::svm);
  EXPECT_EQ(parse_algorithm("mlp"), Algorithm::mlp);
  EXPECT_EQ(parse_algorithm("ann"), Algorithm::mlp);
  EXPECT_THROW(parse_algorithm("knn"), Error);
}

TEST(Models, LabelFromScoreTiesPredictNegative) {
  EXPECT_EQ(label_from_score(Algorithm::dt, 0.5), 0);
  EXPECT_EQ(label_from_score(Algorithm::rf, 0.5000001), 1);
  EXPECT_EQ(label_from_score(Algorithm::svm, 0.0), 0);
  EXPECT_EQ(label_from_score(Algorithm::svm, 0.3), 1);
  EXPECT_EQ(label_from_score(Algorithm::mlp, 0.3), 0);
}

TEST(Models, DescribeNamesHyperparameters) {
  const auto text = describe(small_configs()[0]);
  EXPECT_NE(text.find("criterion=entropy"), std::string::npos);
  EXPECT_NE(text.find("max_depth=4"), std::string::npos);
}

TEST(Models, PredictAgreesWithScore) {
  const auto d = test::blobs(60, 30, kFeatureCount, 1.0, 1);
  const auto probe = test::blobs(20, 20, kFeatureCount, 1.0, 2);
  for (const auto& cfg : small_configs()) {
    const Model m = fit(d, cfg, 3);
    EXPECT_EQ(algorithm_of(m), algorithm_of(cfg));
    EXPECT_EQ(n_features(m), kFeatureCount);
    const auto scores = score(m, probe.x);
    const auto labels = predict(m, probe.x);
    for (std::size_t r = 0; r < probe.size(); ++r) {
      EXPECT_EQ(scores[r], score(m, probe.x.row(r)));
      EXPECT_EQ(labels[r], label_from_score(algorithm_of(m), scores[r]));
      if (algorithm_of(m) != Algorithm::svm) {
        EXPECT_GE(scores[r], 0.0);
        EXPECT_LE(scores[r], 1.0);
      }
    }
  }
}

TEST(Models, PureLeafTreeScoresAreZeroOrOne) {
  const auto d = test::random_data(50, 3, 0.4, 4);
  const Model m = fit(d, TreeConfig{}, 0);
  for (double s : score(m, d.x)) EXPECT_TRUE(s == 0.0 || s == 1.0);
}

TEST(Models, ArityMismatch) {
  const auto d = test::blobs(20, 20, 3, 1.0, 5);
  for (const auto& cfg : small_configs()) {
    const Model m = fit(d, cfg, 1);
    try {
      score(m, std::vector<double>(4));
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::ArityMismatch);
    }
  }
}

TEST(Models, SaveLoadRoundTripIsExact) {
  const auto d = test::blobs(60, 30, kFeatureCount, 0.8, 6);
  const auto probe = test::random_data(40, kFeatureCount, 0.5, 7);
  for (const auto& cfg : small_configs()) {
    const Model m = fit(d, cfg, 9);
    const std::string text = save_model(m);
    const Model back = load_model(text);
    EXPECT_EQ(save_model(back), text);
    EXPECT_EQ(algorithm_of(back), algorithm_of(m));
    EXPECT_EQ(score(back, probe.x), score(m, probe.x));
    const auto j = nlohmann::json::parse(text);
    EXPECT_EQ(j["format"], "habtox-model");
    EXPECT_EQ(j["version"], 1);
  }
}

TEST(Models, TreeThresholdsAndCoversSurviveBitExact) {
  auto d = test::random_data(80, 3, 0.4, 8);
  for (std::size_t r = 0; r < d.size(); ++r) d.x(r, 0) = d.x(r, 0) / 3.0 + 1e-17 * r;
  const auto t = std::get<TreeModel>(fit(d, TreeConfig{}, 0));
  const auto back = std::get<TreeModel>(load_model(save_model(t)));
  ASSERT_EQ(back.nodes.size(), t.nodes.size());
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    EXPECT_EQ(std::bit_cast<std::uint64_t>(back.nodes[i].threshold), std::bit_cast<std::uint64_t>(t.nodes[i].threshold));
    EXPECT_EQ(back.nodes[i].counts, t.nodes[i].counts);
    EXPECT_EQ(back.nodes[i].feature, t.nodes[i].feature);
    EXPECT_EQ(back.nodes[i].left, t.nodes[i].left);
  }
}

TEST(Models, LoadRejectsMalformedDocuments) {
  const auto d = test::blobs(20, 20, 3, 1.0, 9);
  auto j = nlohmann::json::parse(save_model(fit(d, TreeConfig{}, 0)));
  auto expect_format_error = [](const std::string& text) {
    try {
      load_model(text);
      FAIL() << text.substr(0, 80);
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::ModelFormat);
    }
  };
  expect_format_error("not json");
  expect_format_error("{}");
  auto bad = j;
  bad["version"] = 99;
  expect_format_error(bad.dump());
  bad = j;
  bad["type"] = "knn";
  expect_format_error(bad.dump());
  bad = j;
  bad["parameters"]["nodes"][0]["left"] = 1000;
  expect_format_error(bad.dump());
}

TEST(Models, FitIsDeterministic) {
  const auto d = test::blobs(40, 20, 5, 1.0, 10);
  for (const auto& cfg : small_configs()) {
    EXPECT_EQ(save_model(fit(d, cfg, 4)), save_model(fit(d, cfg, 4)));
  }
}

}  // namespace
}  // namespace habtox::models
