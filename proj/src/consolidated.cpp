#include "habtox/consolidated.hpp"

#include <algorithm>

#include "habtox/csv.hpp"
#include "habtox/error.hpp"

namespace habtox {

std::string_view consolidated_header() {
  return "month,dsp_tot,d_caudata,d_fortii,d_sacculus,d_tripos,p_rotundatum,sst,salinity,"
         "air_temp,wind,precip,solar,river_flow,label,date,station";
}

std::string write_consolidated(std::span<const ConsolidatedInstance> rows) {
  std::vector<std::string> header(kFeatureNames.begin(), kFeatureNames.end());
  header.insert(header.end(), {"label", "date", "station"});
  csv::Writer w(header);
  for (const auto& r : rows) {
    for (double v : r.features) {
      if (std::isfinite(v)) {
        w.field(v);
      } else {
        w.field(std::string_view{});
      }
    }
    if (r.label) {
      w.field(*r.label);
    } else {
      w.field(std::string_view{});
    }
    w.field(r.date.iso());
    w.field(r.station);
    w.end_row();
  }
  return w.str();
}

std::vector<ConsolidatedInstance> read_consolidated(std::string_view text) {
  const csv::Table table = csv::parse(text);
  std::vector<ConsolidatedInstance> out;
  if (table.header.empty()) return out;
  std::string joined;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) joined += ',';
    joined += table.header[i];
  }
  if (joined != consolidated_header()) {
    throw Error(ErrorKind::SchemaMismatch, "consolidated header mismatch: " + joined);
  }
  for (const auto& row : table.rows) {
    if (row.fields.size() != kFeatureCount + 3) {
      throw MalformedRowError(row.line, "expected " + std::to_string(kFeatureCount + 3) + " fields");
    }
    ConsolidatedInstance inst;
    for (std::size_t c = 0; c < kFeatureCount; ++c) {
      if (row.fields[c].empty()) continue;
      const auto v = csv::parse_double(row.fields[c]);
      if (!v) throw MalformedRowError(row.line, "bad number in column " + std::string(kFeatureNames[c]));
      inst.features[c] = *v;
    }
    const std::string& label = row.fields[kFeatureCount];
    if (label == "0" || label == "1") {
      inst.label = label == "1" ? 1 : 0;
    } else if (!label.empty()) {
      throw MalformedRowError(row.line, "label must be 0, 1 or empty");
    }
    const auto date = Date::parse(row.fields[kFeatureCount + 1]);
    if (!date) throw MalformedRowError(row.line, "bad date");
    inst.date = *date;
    inst.station = row.fields[kFeatureCount + 2];
    out.push_back(std::move(inst));
  }
  return out;
}

LabeledData to_labeled(std::span<const ConsolidatedInstance> rows) {
  LabeledData d;
  d.x = FeatureMatrix(0, kFeatureCount);
  for (const auto& r : rows) {
    if (!r.label || !r.complete()) continue;
    d.append(r.features, *r.label);
  }
  return d;
}

std::vector<ConsolidatedInstance> from_labeled(const LabeledData& data) {
  if (data.x.cols() != kFeatureCount) {
    throw Error(ErrorKind::ArityMismatch, "expected 14 feature columns");
  }
  std::vector<ConsolidatedInstance> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::ranges::copy(data.x.row(i), out[i].features.begin());
    out[i].label = data.y[i];
  }
  return out;
}

}  // namespace habtox
