#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "habtox/dataset.hpp"

namespace habtox::resample {

struct ResampleConfig {
  std::size_t smote_k = 3;
  double smote_strategy = 0.4;  // minority/majority ratio after oversampling
  double under_strategy = 0.5;  // minority/majority ratio after undersampling
  bool scaled_knn = false;      // z-score features before distance computations

  void validate() const;
};

// Ratio targets round half away from zero.
std::size_t round_count(double value);

// k nearest rows to `query` by Euclidean distance, excluding the query itself;
// ties go to the lower row index. When `scope` is given only rows whose label
// equals *scope are candidates.
std::vector<std::size_t> knn(const FeatureMatrix& points, std::size_t query, std::size_t k,
                             std::span<const int> labels = {},
                             std::optional<int> scope = std::nullopt);

// Column-wise z-scoring (std of a constant column taken as 1).
FeatureMatrix zscore(const FeatureMatrix& x);

struct SmoteResult {
  LabeledData data;
  // (seed row, neighbour row) for each appended synthetic row, in order.
  std::vector<std::pair<std::size_t, std::size_t>> parents;
};

// Oversamples label 1 up to round(strategy * count(0)); synthetic rows are
// appended after the originals and tagged RowOrigin::synthetic.
SmoteResult smote_detailed(const LabeledData& train, std::size_t k, double strategy,
                           std::uint64_t seed, bool scaled_knn = false);
LabeledData smote(const LabeledData& train, const ResampleConfig& cfg, std::uint64_t seed);

// Keeps round(count(1) / strategy) randomly chosen label-0 rows when that is
// fewer than the current count; rows keep their original relative order.
LabeledData random_undersample(const LabeledData& train, double strategy, std::uint64_t seed);
LabeledData random_undersample(const LabeledData& train, const ResampleConfig& cfg,
                               std::uint64_t seed);

struct EnnResult {
  LabeledData kept;
  std::vector<std::size_t> kept_indices;
  std::vector<std::size_t> removed_indices;
};

// Single-pass edited nearest neighbours: an `edited_class` row is removed when
// any of its k nearest neighbours (all classes) carries another label.
// Removals are decided against the original data and applied at once.
EnnResult enn(const LabeledData& data, std::size_t k, int edited_class, bool scaled_knn = false);

}  // namespace habtox::resample
