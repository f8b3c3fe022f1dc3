#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "habtox/consolidated.hpp"
#include "habtox/dataset.hpp"
#include "habtox/ingest.hpp"

namespace habtox::preprocess {

enum class MatchDirection { forward, backward };

struct WindowConfig {
  int tox_match_days = 30;
  int meteo_window_days = 20;
  int river_window_days = 30;
  int interp_days = 30;
  double regulatory_limit = 176.0;  // µg OA eq. per kg
  MatchDirection match_direction = MatchDirection::forward;

  void validate() const;
};

struct SplitSpec {
  double train_fraction = 0.70;
  std::uint64_t seed = 0;
  bool stratified = true;
};

// Alternate donor stations for each station, nearest first.
using StationRanking = std::map<std::string, std::vector<std::string>>;

struct VisitKey {
  Date date;
  std::string station;
  auto operator<=>(const VisitKey&) const = default;
};

// Summed abundance of all DSP producers in a set of records.
double dsp_total(std::span<const ingest::PhytoRecord> records);

// For each (date, station), keep the records of the depth with the largest
// DSP-tot; ties go to the shallowest depth (integrated samples count as
// deeper than any numeric depth). Keys come back sorted.
std::map<VisitKey, std::vector<ingest::PhytoRecord>> select_sample_per_visit(
    std::span<const ingest::PhytoRecord> records);

// bioassay -> recorded result; lcms -> 1 iff concentration > limit.
int binarize_toxicity(const ingest::ToxTest& test, double limit);

struct ToxMatch {
  int label = 0;
  std::size_t test_index = 0;  // index into the tests span
};

// Forward: earliest same-station test dated in [obs, obs + window].
// Backward: latest same-station test dated in [obs - window, obs].
std::optional<ToxMatch> match_toxicity(Date obs_date, const std::string& station,
                                       std::span<const ingest::ToxTest> tests, int window_days,
                                       double limit,
                                       MatchDirection direction = MatchDirection::forward);

struct InterpolationResult {
  std::vector<ingest::EnvSample> samples;
  std::size_t filled = 0;
  std::size_t unfilled = 0;
};

// Fills each missing value from an alternate station's measured value of the
// same kind within ± window days: smallest date distance first, then donor
// rank, then earlier date. Only originally measured values act as donors.
InterpolationResult interpolate_station_gaps(std::span<const ingest::EnvSample> series,
                                             const StationRanking& ranking, int window_days);

struct EnvAggregates {
  std::optional<double> air_temp;    // mean over the meteo window
  std::optional<double> wind;        // mean over the meteo window
  std::optional<double> precip;      // sum over the meteo window
  std::optional<double> solar;       // sum over the meteo window
  std::optional<double> river_flow;  // sum over the river window
};

// Windows cover the days strictly before obs_date. Any missing day voids that
// aggregate.
EnvAggregates aggregate_env(Date obs_date, std::span<const ingest::EnvSample> meteo,
                            std::span<const ingest::EnvSample> river, const WindowConfig& cfg);

struct DropEntry {
  Date date;
  std::string station;
  std::string reason;  // "missing:<feature>;..." or "enn_overlap"
};

struct ConsolidationAudit {
  std::size_t visits = 0;
  std::size_t labeled = 0;
  std::size_t unlabeled = 0;
  std::size_t dropped_missing = 0;
  std::size_t interpolated_values = 0;
  std::size_t reused_tests = 0;
  std::size_t invalid_tests = 0;
  std::vector<DropEntry> drops;
};

struct Consolidated {
  std::vector<ConsolidatedInstance> labeled;    // complete features + label
  std::vector<ConsolidatedInstance> unlabeled;  // no matched test (prediction only)
  ConsolidationAudit audit;
};

// Default ranking when none is configured: every other seawater station,
// ordered by station code.
StationRanking default_ranking(std::span<const ingest::SeawaterRecord> seawater);

Consolidated consolidate(const ingest::RawSources& sources, const WindowConfig& cfg,
                         const StationRanking& ranking);

struct CleanResult {
  std::vector<ConsolidatedInstance> kept;
  std::vector<ConsolidatedInstance> removed;
};

// Edited nearest neighbours on the negative class only.
CleanResult clean_overlap(std::span<const ConsolidatedInstance> dataset, std::size_t k = 3,
                          bool scaled_knn = false);

struct SplitIndices {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

// |train| = round(fraction * n); per-class train counts follow the largest
// remainder rule so class proportions match within one instance.
SplitIndices stratified_split(std::span<const int> labels, const SplitSpec& spec);

struct Projection {
  std::vector<double> x;
  std::vector<double> y;
  std::array<double, 2> explained_variance{};
  double total_variance = 0.0;
  std::size_t rank = 0;  // nonzero components found (0, 1 or 2)
  std::vector<double> loadings_1;
  std::vector<double> loadings_2;
};

// z-scored rows projected on the first two principal components; each axis is
// signed so its largest-magnitude loading is positive.
Projection project_2d(const FeatureMatrix& x);

void write_drops_audit(const ConsolidationAudit& audit, const std::filesystem::path& path);

}  // namespace habtox::preprocess
