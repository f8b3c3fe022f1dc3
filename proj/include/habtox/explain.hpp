#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "habtox/dataset.hpp"
#include "habtox/models.hpp"

namespace habtox::explain {

enum class Metric { f1, accuracy, recall };
std::string_view to_string(Metric m);
Metric parse_metric(std::string_view name);
double metric_value(Metric m, std::span<const int> y_true, std::span<const int> y_pred);

struct FeatureImportance {
  std::size_t feature = 0;
  std::string name;
  double mean = 0.0;
  double std = 0.0;  // population std over repeats
  std::vector<double> samples;
};

struct ImportanceReport {
  double baseline = 0.0;
  std::vector<FeatureImportance> features;  // descending mean, ties by column
};

// Sample r of feature j shuffles column j under
// derive_seed(derive_seed(seed, "permute", j), "repeat", r).
ImportanceReport permutation_importance(const models::Model& model, const FeatureMatrix& x,
                                        std::span<const int> y, Metric metric, std::size_t n_repeats,
                                        std::uint64_t seed, std::span<const std::string> names = {},
                                        std::size_t threads = 1);

struct Explanation {
  std::vector<double> phi;  // one per feature, model-output units
  double base = 0.0;
  double output = 0.0;
  std::vector<double> x;
};

// |base + sum(phi) - output|
double local_accuracy_gap(const Explanation& e);

// Cover-weighted mean leaf value; forests average their trees.
double expected_value(const models::TreeModel& tree);
double expected_value(const models::ForestModel& forest);

// Path-dependent TreeSHAP: the game v(S) follows splits on features in S and
// otherwise averages both children by cover.
Explanation treeshap(const models::TreeModel& tree, std::span<const double> x);
Explanation treeshap(const models::ForestModel& forest, std::span<const double> x);
// Tree or forest models only.
Explanation treeshap(const models::Model& model, std::span<const double> x);
std::vector<Explanation> treeshap_all(const models::Model& model, const FeatureMatrix& x,
                                      std::size_t threads = 1);

// v(S) of the game above; bit j of `mask` marks feature j as known.
double conditional_expectation(const models::TreeModel& tree, std::span<const double> x,
                               std::uint32_t mask);
// Exact Shapley values by subset enumeration; at most 15 features.
Explanation shap_bruteforce(const models::TreeModel& tree, std::span<const double> x);

struct Condition {
  std::size_t feature = 0;
  std::string name;
  bool greater = false;  // x > threshold, else x <= threshold
  double threshold = 0.0;
};

struct Rule {
  std::vector<Condition> conditions;
  std::string prediction;  // "pos" or "neg"
  std::array<double, 2> counts{};
  double value = 0.0;
  std::size_t leaf = 0;

  bool matches(std::span<const double> x) const;
  std::string text() const;
};

// One rule per leaf, in depth-first (left before right) order.
std::vector<Rule> extract_rules(const models::TreeModel& tree, std::span<const std::string> names = {});
std::string export_dot(const models::TreeModel& tree, std::span<const std::string> names = {});

struct BeeswarmRow {
  std::size_t instance = 0;
  std::size_t feature = 0;
  std::string name;
  double value = 0.0;
  double phi = 0.0;
};

// Features ordered by descending mean |phi|, instances in input order.
std::vector<BeeswarmRow> beeswarm_data(std::span<const Explanation> explanations,
                                       std::span<const std::string> names = {});
// Feature indices by descending mean |phi| (ties by column).
std::vector<std::size_t> shap_ranking(std::span<const Explanation> explanations);

struct Contribution {
  std::size_t feature = 0;
  std::string name;
  double value = 0.0;
  double phi = 0.0;
};

struct ForceRecord {
  std::size_t instance = 0;
  double base = 0.0;
  double output = 0.0;
  int predicted_label = 0;
  std::vector<Contribution> contributions;  // descending |phi|, ties by column
};

ForceRecord force_data(const Explanation& e, std::size_t instance,
                       std::span<const std::string> names = {});
std::string force_json(const ForceRecord& record);

void write_importance(const ImportanceReport& report, const std::filesystem::path& path);
void write_shap_values(std::span<const BeeswarmRow> rows, const std::filesystem::path& path);

}  // namespace habtox::explain
