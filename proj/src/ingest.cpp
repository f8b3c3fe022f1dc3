#include "habtox/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>

#include "habtox/csv.hpp"
#include "habtox/error.hpp"

namespace habtox::ingest {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::vector<std::string> split_header(std::string_view header) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = header.find(',', start);
    out.emplace_back(header.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

// Parses the text and checks the header; rows are handed back with their
// field count already validated.
std::vector<csv::Row> checked_rows(std::string_view text, Schema schema) {
  csv::Table table = csv::parse(text);
  if (table.header.empty()) return {};
  const auto expected = split_header(header_of(schema));
  std::vector<std::string> got;
  for (const auto& h : table.header) got.push_back(trim(h));
  if (got != expected) {
    throw Error(ErrorKind::SchemaMismatch, std::string(file_name(schema)) + ": expected header '" +
                                               std::string(header_of(schema)) + "'");
  }
  for (const auto& row : table.rows) {
    if (row.fields.size() != expected.size()) {
      throw MalformedRowError(row.line, "expected " + std::to_string(expected.size()) +
                                            " fields, got " + std::to_string(row.fields.size()));
    }
  }
  return std::move(table.rows);
}

Date parse_date(const csv::Row& row, std::size_t col) {
  const auto d = Date::parse(trim(row.fields[col]));
  if (!d) throw MalformedRowError(row.line, "invalid ISO-8601 date '" + row.fields[col] + "'");
  return *d;
}

std::string parse_station(const csv::Row& row, std::size_t col) {
  std::string s = trim(row.fields[col]);
  if (s.empty()) throw MalformedRowError(row.line, "empty station code");
  return s;
}

std::optional<double> parse_number(const csv::Row& row, std::size_t col, std::string_view what,
                                   bool required) {
  const std::string cell = trim(row.fields[col]);
  if (cell.empty()) {
    if (required) throw MalformedRowError(row.line, std::string(what) + " is required");
    return std::nullopt;
  }
  const auto v = csv::parse_double(cell);
  if (!v || !std::isfinite(*v)) {
    throw MalformedRowError(row.line, "unparseable " + std::string(what) + " '" + cell + "'");
  }
  return v;
}

std::optional<double> ranged(const csv::Row& row, std::size_t col, std::string_view what, double lo,
                             double hi) {
  auto v = parse_number(row, col, what, false);
  if (v && (*v < lo || *v > hi)) {
    throw MalformedRowError(row.line, std::string(what) + " out of range [" + csv::format_double(lo) +
                                          ", " + csv::format_double(hi) + "]");
  }
  return v;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

std::string_view to_string(SamplingMethod m) {
  switch (m) {
    case SamplingMethod::bottle: return "bottle";
    case SamplingMethod::net: return "net";
    case SamplingMethod::hose: return "hose";
  }
  return "";
}

std::string_view to_string(ToxMethod m) { return m == ToxMethod::lcms ? "lcms" : "bioassay"; }

std::string_view to_string(EnvKind k) {
  switch (k) {
    case EnvKind::sst_c: return "sst_c";
    case EnvKind::salinity: return "salinity";
    case EnvKind::air_temp_c: return "air_temp_c";
    case EnvKind::wind_ms: return "wind_ms";
    case EnvKind::precip_mm: return "precip_mm";
    case EnvKind::solar_h: return "solar_h";
    case EnvKind::river_flow_m3s: return "river_flow_m3s";
  }
  return "";
}

std::string_view header_of(Schema schema) {
  switch (schema) {
    case Schema::phyto: return "date,station,depth_m,method,species,abundance_cells_per_l";
    case Schema::tox: return "date,station,method,result,concentration_ug_kg";
    case Schema::seawater: return "date,station,sst_c,salinity";
    case Schema::meteo: return "date,air_temp_c,wind_ms,precip_mm,solar_h";
    case Schema::river: return "date,flow_m3s";
  }
  return "";
}

std::string_view file_name(Schema schema) {
  switch (schema) {
    case Schema::phyto: return "phyto.csv";
    case Schema::tox: return "toxicity.csv";
    case Schema::seawater: return "seawater.csv";
    case Schema::meteo: return "meteo.csv";
    case Schema::river: return "river.csv";
  }
  return "";
}

std::vector<PhytoRecord> parse_phyto(std::string_view raw_csv) {
  std::vector<PhytoRecord> out;
  for (const auto& row : checked_rows(raw_csv, Schema::phyto)) {
    PhytoRecord r;
    r.date = parse_date(row, 0);
    r.station = parse_station(row, 1);
    const std::string depth = lower(trim(row.fields[2]));
    if (depth != "integrated") {
      r.depth_m = parse_number(row, 2, "depth_m", true);
      if (*r.depth_m < 0.0) throw MalformedRowError(row.line, "negative depth");
    }
    const std::string method = lower(trim(row.fields[3]));
    if (method == "bottle") {
      r.method = SamplingMethod::bottle;
    } else if (method == "net") {
      r.method = SamplingMethod::net;
    } else if (method == "hose") {
      r.method = SamplingMethod::hose;
    } else {
      throw MalformedRowError(row.line, "unknown sampling method '" + row.fields[3] + "'");
    }
    r.species = trim(row.fields[4]);
    if (r.species.empty()) throw MalformedRowError(row.line, "empty species");
    r.abundance = *parse_number(row, 5, "abundance", true);
    if (r.abundance < 0.0) throw MalformedRowError(row.line, "negative abundance");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ToxTest> parse_toxicity(std::string_view raw_csv) {
  std::vector<ToxTest> out;
  for (const auto& row : checked_rows(raw_csv, Schema::tox)) {
    ToxTest t;
    t.date = parse_date(row, 0);
    t.station = parse_station(row, 1);
    const std::string method = lower(trim(row.fields[2]));
    if (method == "bioassay") {
      t.method = ToxMethod::bioassay;
    } else if (method == "lcms") {
      t.method = ToxMethod::lcms;
    } else {
      throw MalformedRowError(row.line, "unknown toxicity method '" + row.fields[2] + "'");
    }
    const std::string result = lower(trim(row.fields[3]));
    if (result == "pos") {
      t.result = ToxResult::pos;
    } else if (result == "neg") {
      t.result = ToxResult::neg;
    } else if (!result.empty()) {
      throw MalformedRowError(row.line, "result must be pos, neg or empty");
    }
    t.concentration = parse_number(row, 4, "concentration", false);
    if (t.method == ToxMethod::bioassay) {
      if (!t.result) throw MalformedRowError(row.line, "bioassay row without result");
      if (t.concentration) throw MalformedRowError(row.line, "bioassay row with concentration");
    } else {
      if (t.result) throw MalformedRowError(row.line, "lcms row with a preset result");
      if (t.concentration && *t.concentration < 0.0) {
        throw MalformedRowError(row.line, "negative concentration");
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<SeawaterRecord> parse_seawater(std::string_view raw_csv) {
  std::vector<SeawaterRecord> out;
  for (const auto& row : checked_rows(raw_csv, Schema::seawater)) {
    SeawaterRecord r;
    r.date = parse_date(row, 0);
    r.station = parse_station(row, 1);
    r.sst_c = ranged(row, 2, "sst_c", -20.0, 45.0);
    r.salinity = ranged(row, 3, "salinity", 0.0, 45.0);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<MeteoRecord> parse_meteo(std::string_view raw_csv) {
  std::vector<MeteoRecord> out;
  for (const auto& row : checked_rows(raw_csv, Schema::meteo)) {
    MeteoRecord r;
    r.date = parse_date(row, 0);
    r.air_temp_c = ranged(row, 1, "air_temp_c", -20.0, 45.0);
    r.wind_ms = ranged(row, 2, "wind_ms", 0.0, kInf);
    r.precip_mm = ranged(row, 3, "precip_mm", 0.0, kInf);
    r.solar_h = ranged(row, 4, "solar_h", 0.0, kInf);
    out.push_back(r);
  }
  return out;
}

std::vector<RiverRecord> parse_river(std::string_view raw_csv) {
  std::vector<RiverRecord> out;
  for (const auto& row : checked_rows(raw_csv, Schema::river)) {
    RiverRecord r;
    r.date = parse_date(row, 0);
    r.flow_m3s = ranged(row, 1, "flow_m3s", 0.0, kInf);
    out.push_back(r);
  }
  return out;
}

RecordList parse_table(std::string_view raw_csv, Schema schema) {
  switch (schema) {
    case Schema::phyto: return parse_phyto(raw_csv);
    case Schema::tox: return parse_toxicity(raw_csv);
    case Schema::seawater: return parse_seawater(raw_csv);
    case Schema::meteo: return parse_meteo(raw_csv);
    case Schema::river: return parse_river(raw_csv);
  }
  throw Error(ErrorKind::InvalidArgument, "unknown schema");
}

std::string serialize(std::span<const PhytoRecord> records) {
  csv::Writer w(split_header(header_of(Schema::phyto)));
  for (const auto& r : records) {
    w.field(r.date.iso()).field(r.station);
    if (r.depth_m) {
      w.field(*r.depth_m);
    } else {
      w.field("integrated");
    }
    w.field(to_string(r.method)).field(r.species).field(r.abundance);
    w.end_row();
  }
  return w.str();
}

std::string serialize(std::span<const ToxTest> records) {
  csv::Writer w(split_header(header_of(Schema::tox)));
  for (const auto& t : records) {
    w.field(t.date.iso()).field(t.station).field(to_string(t.method));
    w.field(t.result ? (*t.result == ToxResult::pos ? "pos" : "neg") : "");
    w.field(t.concentration);
    w.end_row();
  }
  return w.str();
}

std::string serialize(std::span<const SeawaterRecord> records) {
  csv::Writer w(split_header(header_of(Schema::seawater)));
  for (const auto& r : records) {
    w.field(r.date.iso()).field(r.station).field(r.sst_c).field(r.salinity);
    w.end_row();
  }
  return w.str();
}

std::string serialize(std::span<const MeteoRecord> records) {
  csv::Writer w(split_header(header_of(Schema::meteo)));
  for (const auto& r : records) {
    w.field(r.date.iso()).field(r.air_temp_c).field(r.wind_ms).field(r.precip_mm).field(r.solar_h);
    w.end_row();
  }
  return w.str();
}

std::string serialize(std::span<const RiverRecord> records) {
  csv::Writer w(split_header(header_of(Schema::river)));
  for (const auto& r : records) {
    w.field(r.date.iso()).field(r.flow_m3s);
    w.end_row();
  }
  return w.str();
}

PhytoRecord harmonize_abundance(PhytoRecord rec) {
  if (rec.method == SamplingMethod::net) rec.abundance *= kNetScaleFactor;
  return rec;
}

PhytoBatch harmonize(PhytoBatch batch) {
  if (batch.harmonized) return batch;
  for (auto& r : batch.records) r = harmonize_abundance(std::move(r));
  batch.harmonized = true;
  return batch;
}

std::vector<EnvSample> to_env_samples(std::span<const SeawaterRecord> records) {
  std::vector<EnvSample> out;
  out.reserve(records.size() * 2);
  for (const auto& r : records) {
    out.push_back({r.date, r.station, EnvKind::sst_c, r.sst_c});
    out.push_back({r.date, r.station, EnvKind::salinity, r.salinity});
  }
  return out;
}

std::vector<EnvSample> to_env_samples(std::span<const MeteoRecord> records) {
  std::vector<EnvSample> out;
  out.reserve(records.size() * 4);
  for (const auto& r : records) {
    out.push_back({r.date, {}, EnvKind::air_temp_c, r.air_temp_c});
    out.push_back({r.date, {}, EnvKind::wind_ms, r.wind_ms});
    out.push_back({r.date, {}, EnvKind::precip_mm, r.precip_mm});
    out.push_back({r.date, {}, EnvKind::solar_h, r.solar_h});
  }
  return out;
}

std::vector<EnvSample> to_env_samples(std::span<const RiverRecord> records) {
  std::vector<EnvSample> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.date, {}, EnvKind::river_flow_m3s, r.flow_m3s});
  return out;
}

std::optional<Species> classify_species(std::string_view name) {
  const std::string key = lower(trim(name));
  for (std::size_t i = 0; i < kSpeciesNames.size(); ++i) {
    if (key == lower(kSpeciesNames[i])) return static_cast<Species>(i);
  }
  return std::nullopt;
}

const std::vector<std::string>& dsp_producers() {
  static const std::vector<std::string> list = [] {
    std::vector<std::string> v(kSpeciesNames.begin(), kSpeciesNames.end());
    v.insert(v.end(), {"Dinophysis acuminata", "Dinophysis acuta", "Dinophysis infundibulus",
                       "Dinophysis ovum", "Dinophysis spp.", "Prorocentrum lima"});
    return v;
  }();
  return list;
}

bool is_dsp_producer(std::string_view name) {
  const std::string key = lower(trim(name));
  return std::ranges::any_of(dsp_producers(), [&](const std::string& s) { return lower(s) == key; });
}

Feature feature_of(Species s) {
  return static_cast<Feature>(index_of(Feature::d_caudata) + static_cast<std::size_t>(s));
}

RawSources load_directory(const std::filesystem::path& dir) {
  auto read = [&](Schema s) {
    const auto path = dir / file_name(s);
    if (!std::filesystem::exists(path)) {
      throw Error(ErrorKind::MissingFile, "missing input file " + std::string(file_name(s)));
    }
    return csv::read_file(path);
  };
  // Errors are re-raised with the offending file name attached.
  auto guarded = [&](Schema s, auto parse) {
    const std::string text = read(s);
    try {
      return parse(text);
    } catch (const MalformedRowError& e) {
      throw MalformedRowError(e.line(), std::string(file_name(s)) + ": " + e.what());
    }
  };
  RawSources src;
  src.phyto.records = guarded(Schema::phyto, [](const std::string& t) { return parse_phyto(t); });
  src.tox = guarded(Schema::tox, [](const std::string& t) { return parse_toxicity(t); });
  src.seawater = guarded(Schema::seawater, [](const std::string& t) { return parse_seawater(t); });
  src.meteo = guarded(Schema::meteo, [](const std::string& t) { return parse_meteo(t); });
  src.river = guarded(Schema::river, [](const std::string& t) { return parse_river(t); });
  return src;
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorKind::EmptyDataset, "median of empty sample");
  std::ranges::sort(values);
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorKind::EmptyDataset, "percentile of empty sample");
  std::ranges::sort(values);
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

DescriptiveStats describe(std::span<const ConsolidatedInstance> consolidated) {
  if (consolidated.empty()) throw Error(ErrorKind::EmptyDataset, "describe needs at least one instance");
  DescriptiveStats stats;
  for (std::size_t c = 0; c < kFeatureCount; ++c) {
    std::vector<double> values;
    for (const auto& inst : consolidated) {
      if (std::isfinite(inst.features[c])) values.push_back(inst.features[c]);
    }
    VariableStats v;
    v.name = std::string(kFeatureNames[c]);
    v.count = values.size();
    if (!values.empty()) {
      const auto [mn, mx] = std::ranges::minmax(values);
      v.min = mn;
      v.max = mx;
      double sum = 0.0;
      for (double x : values) sum += x;
      v.mean = sum / static_cast<double>(values.size());
      v.median = median(values);
    } else {
      v.min = v.max = v.mean = v.median = std::numeric_limits<double>::quiet_NaN();
    }
    stats.variables.push_back(std::move(v));
  }

  static constexpr std::array<Feature, 8> kMonthlyVars = {
      Feature::sst,       Feature::salinity, Feature::dsp_tot,  Feature::d_caudata,
      Feature::d_fortii,  Feature::d_sacculus, Feature::d_tripos, Feature::p_rotundatum};
  std::map<unsigned, std::vector<const ConsolidatedInstance*>> by_month;
  for (const auto& inst : consolidated) {
    const double m = inst[Feature::month];
    const unsigned month = std::isfinite(m) ? static_cast<unsigned>(m) : inst.date.month();
    by_month[month].push_back(&inst);
  }
  for (const auto& [month, members] : by_month) {
    for (Feature f : kMonthlyVars) {
      std::vector<double> values;
      for (const auto* inst : members) {
        const double v = (*inst)[f];
        if (std::isfinite(v)) values.push_back(v);
      }
      if (values.empty()) continue;
      MonthlyStats ms;
      ms.month = month;
      ms.variable = std::string(kFeatureNames[index_of(f)]);
      ms.count = values.size();
      double sum = 0.0;
      for (double x : values) sum += x;
      ms.mean = sum / static_cast<double>(values.size());
      ms.p10 = percentile(values, 0.10);
      ms.p90 = percentile(values, 0.90);
      stats.monthly.push_back(std::move(ms));
    }
  }
  for (unsigned m = 1; m <= 12; ++m) stats.tests[m - 1].month = m;
  for (const auto& inst : consolidated) {
    if (!inst.label) continue;
    const double mv = inst[Feature::month];
    const unsigned month = std::isfinite(mv) ? static_cast<unsigned>(mv) : inst.date.month();
    if (month < 1 || month > 12) continue;
    auto& t = stats.tests[month - 1];
    (*inst.label == 1 ? t.pos : t.neg) += 1;
    ++stats.total_tests;
  }
  return stats;
}

void write_report(const DescriptiveStats& stats, const std::filesystem::path& dir) {
  csv::Writer vars({"variable", "count", "min", "max", "mean", "median"});
  for (const auto& v : stats.variables) {
    vars.field(v.name).field(v.count).field(v.min).field(v.max).field(v.mean).field(v.median);
    vars.end_row();
  }
  csv::write_file(dir / "variables.csv", vars.str());

  csv::Writer monthly({"month", "variable", "count", "mean", "p10", "p90"});
  for (const auto& m : stats.monthly) {
    monthly.field(static_cast<int>(m.month)).field(m.variable).field(m.count);
    monthly.field(m.mean).field(m.p10).field(m.p90);
    monthly.end_row();
  }
  csv::write_file(dir / "monthly.csv", monthly.str());

  csv::Writer tests({"month", "pos", "neg"});
  for (const auto& t : stats.tests) {
    tests.field(static_cast<int>(t.month)).field(t.pos).field(t.neg);
    tests.end_row();
  }
  csv::write_file(dir / "monthly_tests.csv", tests.str());
}

}  // namespace habtox::ingest
