#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "habtox/dataset.hpp"
#include "habtox/date.hpp"

namespace habtox {

// One phytoplankton visit fused with its environment and (optionally) its
// matched toxicity label. Missing feature values are NaN until the
// missing-row filter runs.
struct ConsolidatedInstance {
  Date date;
  std::string station;
  std::array<double, kFeatureCount> features{};
  std::optional<int> label;

  ConsolidatedInstance() { features.fill(std::numeric_limits<double>::quiet_NaN()); }

  double& operator[](Feature f) { return features[index_of(f)]; }
  double operator[](Feature f) const { return features[index_of(f)]; }
  bool complete() const {
    for (double v : features) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
};

// consolidated.csv: the 14 feature columns, then label,date,station.
std::string_view consolidated_header();
std::string write_consolidated(std::span<const ConsolidatedInstance> rows);
std::vector<ConsolidatedInstance> read_consolidated(std::string_view text);

// Labelled, complete rows only (in input order).
LabeledData to_labeled(std::span<const ConsolidatedInstance> rows);
std::vector<ConsolidatedInstance> from_labeled(const LabeledData& data);

}  // namespace habtox
