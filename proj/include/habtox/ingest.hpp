#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "habtox/consolidated.hpp"
#include "habtox/date.hpp"

namespace habtox::ingest {

enum class Schema { phyto, tox, seawater, meteo, river };
enum class SamplingMethod { bottle, net, hose };
enum class ToxMethod { bioassay, lcms };
enum class ToxResult { neg, pos };
enum class EnvKind { sst_c, salinity, air_temp_c, wind_ms, precip_mm, solar_h, river_flow_m3s };

std::string_view to_string(SamplingMethod m);
std::string_view to_string(ToxMethod m);
std::string_view to_string(EnvKind k);

struct PhytoRecord {
  Date date;
  std::string station;
  std::optional<double> depth_m;  // nullopt = integrated (hose) sample
  SamplingMethod method = SamplingMethod::bottle;
  std::string species;
  double abundance = 0.0;  // cells per litre

  bool operator==(const PhytoRecord&) const = default;
};

struct ToxTest {
  Date date;
  std::string station;
  ToxMethod method = ToxMethod::bioassay;
  std::optional<ToxResult> result;
  std::optional<double> concentration;  // µg OA eq. per kg

  bool operator==(const ToxTest&) const = default;
};

struct SeawaterRecord {
  Date date;
  std::string station;
  std::optional<double> sst_c;
  std::optional<double> salinity;

  bool operator==(const SeawaterRecord&) const = default;
};

struct MeteoRecord {
  Date date;
  std::optional<double> air_temp_c;
  std::optional<double> wind_ms;
  std::optional<double> precip_mm;
  std::optional<double> solar_h;

  bool operator==(const MeteoRecord&) const = default;
};

struct RiverRecord {
  Date date;
  std::optional<double> flow_m3s;

  bool operator==(const RiverRecord&) const = default;
};

// One value of one environmental variable; station is empty for meteo/river.
struct EnvSample {
  Date date;
  std::string station;
  EnvKind kind = EnvKind::sst_c;
  std::optional<double> value;

  bool operator==(const EnvSample&) const = default;
};

using RecordList = std::variant<std::vector<PhytoRecord>, std::vector<ToxTest>,
                                std::vector<SeawaterRecord>, std::vector<MeteoRecord>,
                                std::vector<RiverRecord>>;

std::string_view header_of(Schema schema);
std::string_view file_name(Schema schema);

// Header-only or empty text yields an empty list. Throws SchemaMismatch for a
// wrong header and MalformedRowError for any invalid cell.
RecordList parse_table(std::string_view raw_csv, Schema schema);

std::vector<PhytoRecord> parse_phyto(std::string_view raw_csv);
std::vector<ToxTest> parse_toxicity(std::string_view raw_csv);
std::vector<SeawaterRecord> parse_seawater(std::string_view raw_csv);
std::vector<MeteoRecord> parse_meteo(std::string_view raw_csv);
std::vector<RiverRecord> parse_river(std::string_view raw_csv);

std::string serialize(std::span<const PhytoRecord> records);
std::string serialize(std::span<const ToxTest> records);
std::string serialize(std::span<const SeawaterRecord> records);
std::string serialize(std::span<const MeteoRecord> records);
std::string serialize(std::span<const RiverRecord> records);

// Net-haul abundances are scaled up by two orders of magnitude to be
// comparable with bottle and hose samples.
inline constexpr double kNetScaleFactor = 100.0;

PhytoRecord harmonize_abundance(PhytoRecord rec);

// A batch remembers whether it has been harmonized so the scaling is applied
// exactly once.
struct PhytoBatch {
  std::vector<PhytoRecord> records;
  bool harmonized = false;
};

PhytoBatch harmonize(PhytoBatch batch);

std::vector<EnvSample> to_env_samples(std::span<const SeawaterRecord> records);
std::vector<EnvSample> to_env_samples(std::span<const MeteoRecord> records);
std::vector<EnvSample> to_env_samples(std::span<const RiverRecord> records);

// The five modelled taxa, in feature order.
enum class Species { d_caudata, d_fortii, d_sacculus, d_tripos, p_rotundatum };
inline constexpr std::array<std::string_view, 5> kSpeciesNames = {
    "Dinophysis caudata", "Dinophysis fortii", "Dinophysis sacculus", "Dinophysis tripos",
    "Phalacroma rotundatum"};

// Case-insensitive whitelist lookups; unknown taxa return nullopt / false.
std::optional<Species> classify_species(std::string_view name);
bool is_dsp_producer(std::string_view name);
const std::vector<std::string>& dsp_producers();
Feature feature_of(Species s);

struct RawSources {
  PhytoBatch phyto;
  std::vector<ToxTest> tox;
  std::vector<SeawaterRecord> seawater;
  std::vector<MeteoRecord> meteo;
  std::vector<RiverRecord> river;
};

// Reads the five CSVs from a directory. A missing file raises MissingFile
// naming it.
RawSources load_directory(const std::filesystem::path& dir);

struct VariableStats {
  std::string name;
  std::size_t count = 0;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double median = 0.0;
};

struct MonthlyStats {
  unsigned month = 0;
  std::string variable;
  std::size_t count = 0;
  double mean = 0.0;
  double p10 = 0.0;
  double p90 = 0.0;
};

struct MonthlyTests {
  unsigned month = 0;
  std::size_t pos = 0;
  std::size_t neg = 0;
};

struct DescriptiveStats {
  std::vector<VariableStats> variables;  // one per feature column, feature order
  std::vector<MonthlyStats> monthly;     // months with data only
  std::array<MonthlyTests, 12> tests{};
  std::size_t total_tests = 0;
};

// Median of an even-length sample is the mean of the two central values;
// percentiles interpolate linearly between order statistics.
double median(std::vector<double> values);
double percentile(std::vector<double> values, double q);

DescriptiveStats describe(std::span<const ConsolidatedInstance> consolidated);

// variables.csv, monthly.csv, monthly_tests.csv
void write_report(const DescriptiveStats& stats, const std::filesystem::path& dir);

}  // namespace habtox::ingest
