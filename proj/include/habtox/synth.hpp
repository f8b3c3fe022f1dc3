#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "habtox/dataset.hpp"
#include "habtox/date.hpp"
#include "habtox/ingest.hpp"
#include "habtox/preprocess.hpp"

namespace habtox::synth {

// Seasonal bloom of one taxon. Months are fractional with 1.0 = mid-January;
// the bump is a Gaussian in circular month distance.
struct SpeciesPulse {
  std::string name;
  double peak_month = 7.0;
  double dispersion = 1.0;  // months
  double amplitude = 50.0;  // typical cells per litre at the peak
  double presence = 0.7;    // detection probability at the peak
};

struct LabelModel {
  // Weights on standardized covariates:
  //   log1p(d_fortii) / 3, log1p(d_caudata) / 3,
  //   salinity - salinity_mean, river_flow / (30 * river_base) - 1.
  double w_fortii = 2.2;
  double w_caudata = 2.0;
  double w_salinity = -0.5;
  double w_river = -0.5;
  double noise = 0.4;  // std of a per-visit normal term on the logit
  double prevalence = 0.12;
  double tolerance = 0.03;
};

struct SynthConfig {
  int start_year = 2012;
  int years = 6;
  std::vector<std::string> stations{"0024", "0035"};
  std::string donor_station = "000F";  // seawater only
  std::vector<SpeciesPulse> species = default_species();
  double sst_mean = 17.0;
  double sst_amplitude = 7.5;
  double salinity_mean = 37.2;
  double river_base = 40.0;
  double river_winter_boost = 1.5;  // relative flow increase in mid-winter
  LabelModel labels;
  double test_fraction_season = 0.9;  // April to November
  double test_fraction_winter = 0.6;
  double blank_seawater = 0.05;       // per value, filled from the donor station
  double meteo_gap = 0.002;           // per day, air temperature left empty
  int lcms_from_year = 3;             // years after start_year

  static std::vector<SpeciesPulse> default_species();
  void validate() const;
};

struct GroundTruthRow {
  Date date;
  std::string station;
  std::array<double, kFeatureCount> features{};  // NaN where an aggregate is void
  double latent_probability = 0.0;
  std::optional<int> label;  // drawn label of this visit's own test
  std::optional<Date> test_date;
  std::optional<int> matched_label;  // label the forward matcher should assign
};

struct SynthOutput {
  ingest::RawSources sources;
  std::vector<GroundTruthRow> truth;
  preprocess::StationRanking ranking;
  double intercept = 0.0;
  double realized_prevalence = 0.0;
  std::size_t tests = 0;
};

// Sequential generation from one RNG stream; same seed, same output.
SynthOutput generate(const SynthConfig& cfg, std::uint64_t seed);

std::string ground_truth_csv(const SynthOutput& out, const SynthConfig& cfg);
std::string ranking_json(const preprocess::StationRanking& ranking);
preprocess::StationRanking parse_ranking_json(const std::string& text);

// The five raw CSVs, ground_truth.csv and station_ranking.json.
void write_output(const SynthOutput& out, const SynthConfig& cfg, const std::filesystem::path& dir);

}  // namespace habtox::synth
