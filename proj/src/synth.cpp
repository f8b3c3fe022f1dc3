#include "habtox/synth.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <map>
#include <numbers>
#include <set>

#include "habtox/csv.hpp"
#include "habtox/error.hpp"
#include "habtox/rng.hpp"

namespace habtox::synth {

using ingest::MeteoRecord;
using ingest::PhytoRecord;
using ingest::RiverRecord;
using ingest::SamplingMethod;
using ingest::SeawaterRecord;
using ingest::ToxTest;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kMeteoWindow = 20;
constexpr int kRiverWindow = 30;
constexpr int kMatchWindow = 30;
constexpr const char* kBackground = "Skeletonema costatum";

double round_to(double v, double step) { return std::round(v / step) * step; }

double round_dp(double v, int decimals) {
  const double f = std::pow(10.0, decimals);
  return std::round(v * f) / f;
}

int day_of_year(Date d) { return d - Date::from_ymd(d.year(), 1, 1); }

double month_position(Date d) { return (static_cast<double>(day_of_year(d)) + 0.5) / 365.25 * 12.0 + 0.5; }

double seasonal(Date d, double peak_doy) {
  return std::cos(kTwoPi * (static_cast<double>(day_of_year(d)) - peak_doy) / 365.25);
}

double bump(double month, const SpeciesPulse& p) {
  double dist = std::fmod(std::abs(month - p.peak_month), 12.0);
  dist = std::min(dist, 12.0 - dist);
  return std::exp(-0.5 * (dist / p.dispersion) * (dist / p.dispersion));
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

bool in_season(Date d) { return d.month() >= 4 && d.month() <= 11; }

struct Visit {
  Date date;
  std::string station;
  std::size_t station_index = 0;
};

// Day-indexed series with optional values, covering [first, first + size).
struct Daily {
  Date first;
  std::vector<std::optional<double>> values;

  std::optional<double> at(Date d) const {
    const auto i = d - first;
    if (i < 0 || static_cast<std::size_t>(i) >= values.size()) return std::nullopt;
    return values[static_cast<std::size_t>(i)];
  }
};

// Oldest day first, as the consolidation sums it.
double window_sum(const Daily& s, Date obs, int days) {
  double sum = 0.0;
  for (int back = days; back >= 1; --back) {
    const auto v = s.at(obs - back);
    if (!v) return kNaN;
    sum += *v;
  }
  return sum;
}

double window_mean(const Daily& s, Date obs, int days) { return window_sum(s, obs, days) / days; }

struct Sample {
  std::optional<double> depth;
  SamplingMethod method = SamplingMethod::bottle;
  std::vector<std::pair<std::string, double>> counts;  // written abundance
  double harmonized_total = 0.0;                       // DSP-tot after net scaling
};

bool deeper_or_equal(const std::optional<double>& a, const std::optional<double>& b) {
  if (!a) return true;
  if (!b) return false;
  return *a >= *b;
}

}  // namespace

std::vector<SpeciesPulse> SynthConfig::default_species() {
  return {
      {"Dinophysis caudata", 6.8, 1.0, 110.0, 0.8},
      {"Dinophysis fortii", 9.5, 1.0, 130.0, 0.85},
      {"Dinophysis sacculus", 5.8, 1.3, 80.0, 0.7},
      {"Dinophysis tripos", 9.0, 1.0, 50.0, 0.5},
      {"Phalacroma rotundatum", 7.5, 2.5, 30.0, 0.45},
      {"Dinophysis acuminata", 5.0, 1.5, 40.0, 0.4},
  };
}

void SynthConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorKind::InvalidArgument, "synth: " + what); };
  if (years < 1) bad("years must be at least 1");
  if (stations.empty()) bad("at least one station is required");
  if (std::ranges::find(stations, donor_station) != stations.end()) bad("donor station must differ from stations");
  if (!(labels.prevalence > 0.0 && labels.prevalence < 1.0)) bad("prevalence must lie in (0, 1)");
  if (!(labels.tolerance > 0.0)) bad("prevalence tolerance must be positive");
  if (labels.noise < 0.0) bad("noise must be non-negative");
  for (const auto& s : species) {
    if (s.amplitude < 0.0 || s.dispersion <= 0.0 || s.presence < 0.0 || s.presence > 1.0) {
      bad("invalid pulse for " + s.name);
    }
    if (!ingest::is_dsp_producer(s.name)) bad(s.name + " is not a DSP producer");
  }
  if (sst_amplitude < 0.0 || river_base <= 0.0 || river_winter_boost < 0.0) bad("invalid environment parameters");
  for (double f : {test_fraction_season, test_fraction_winter, blank_seawater, meteo_gap}) {
    if (f < 0.0 || f > 1.0) bad("fractions must lie in [0, 1]");
  }
}

SynthOutput generate(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  SynthOutput out;

  const Date start = Date::from_ymd(cfg.start_year, 1, 10);
  const Date end = Date::from_ymd(cfg.start_year + cfg.years, 1, 1);
  const Date env_first = Date::from_ymd(cfg.start_year, 1, 1) - 45;
  const auto env_days = static_cast<std::size_t>(end - env_first);

  // Meteorology and river flow, one row per day.
  Daily air{env_first, {}}, wind{env_first, {}}, precip{env_first, {}}, solar{env_first, {}}, flow{env_first, {}};
  double prev_precip = 0.0;
  for (std::size_t i = 0; i < env_days; ++i) {
    const Date d = env_first + static_cast<std::int32_t>(i);
    const double a = round_dp(14.0 + 9.0 * seasonal(d, 200.0) + 2.0 * rng.normal(), 1);
    const double w = round_dp(std::abs(2.5 + 1.3 * rng.normal()), 1);
    const double p = rng.bernoulli(0.28) ? round_dp(-9.0 * std::log(1.0 - rng.uniform()), 1) : 0.0;
    const double s = round_dp(std::clamp(7.0 + 4.5 * seasonal(d, 180.0) + 2.0 * rng.normal(), 0.0, 15.0), 1);
    const double winter = 0.5 * (1.0 + seasonal(d, 15.0));
    double f = cfg.river_base * (1.0 + cfg.river_winter_boost * winter) * rng.lognormal(0.0, 0.35);
    if (prev_precip > 10.0) f += 3.0 * prev_precip;
    f = round_dp(f, 1);
    prev_precip = p;
    air.values.emplace_back(rng.bernoulli(cfg.meteo_gap) ? std::nullopt : std::optional<double>(a));
    wind.values.emplace_back(w);
    precip.values.emplace_back(p);
    solar.values.emplace_back(s);
    flow.values.emplace_back(f);
    out.sources.meteo.push_back({d, air.values.back(), w, p, s});
    out.sources.river.push_back({d, f});
  }

  // Visit calendar: weekly in the bloom season, four-weekly otherwise.
  std::vector<Visit> visits;
  for (std::size_t s = 0; s < cfg.stations.size(); ++s) {
    for (Date d = start + static_cast<std::int32_t>(s); d < end; d = d + (in_season(d) ? 7 : 28)) {
      visits.push_back({d, cfg.stations[s], s});
    }
  }
  std::ranges::sort(visits, [](const Visit& a, const Visit& b) {
    return std::tie(a.date, a.station) < std::tie(b.date, b.station);
  });

  // Phytoplankton samples and the instance features they induce.
  out.truth.resize(visits.size());
  std::vector<Sample> chosen(visits.size());
  for (std::size_t v = 0; v < visits.size(); ++v) {
    const Visit& visit = visits[v];
    const double m = month_position(visit.date);
    std::vector<double> column(cfg.species.size(), 0.0);
    for (std::size_t k = 0; k < cfg.species.size(); ++k) {
      const auto& sp = cfg.species[k];
      const double b = bump(m, sp);
      if (rng.bernoulli(0.03 + sp.presence * b)) column[k] = sp.amplitude * std::sqrt(b) * rng.lognormal(0.0, 1.0);
    }
    std::vector<Sample> samples;
    auto add_sample = [&](std::optional<double> depth, SamplingMethod method, double noise_sigma) {
      Sample smp{depth, method, {}, 0.0};
      const double scale = method == SamplingMethod::net ? 1.0 / ingest::kNetScaleFactor : 1.0;
      for (std::size_t k = 0; k < cfg.species.size(); ++k) {
        if (column[k] <= 0.0) continue;
        const double raw = column[k] * rng.lognormal(0.0, noise_sigma) * scale;
        const double written = method == SamplingMethod::net ? std::round(raw) : round_to(raw, 10.0);
        if (written <= 0.0) continue;
        smp.counts.emplace_back(cfg.species[k].name, written);
        smp.harmonized_total += method == SamplingMethod::net ? written * ingest::kNetScaleFactor : written;
      }
      smp.counts.emplace_back(kBackground, round_to(2000.0 * rng.lognormal(0.0, 1.0), 100.0) + 100.0);
      samples.push_back(std::move(smp));
    };
    add_sample(0.0, SamplingMethod::bottle, 0.3);
    const double extra = rng.uniform();
    if (extra < 0.25) {
      add_sample(5.0, SamplingMethod::bottle, 0.3);
    } else if (extra < 0.35) {
      add_sample(std::nullopt, SamplingMethod::hose, 0.2);
    } else if (extra < 0.40) {
      add_sample(std::nullopt, SamplingMethod::net, 0.2);
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < samples.size(); ++i) {
      const double t = samples[i].harmonized_total;
      const double bt = samples[best].harmonized_total;
      if (t > bt || (t == bt && !deeper_or_equal(samples[i].depth, samples[best].depth))) best = i;
    }
    for (const auto& smp : samples) {
      for (const auto& [name, value] : smp.counts) {
        out.sources.phyto.records.push_back({visit.date, visit.station, smp.depth, smp.method, name, value});
      }
    }
    chosen[v] = samples[best];

    auto& f = out.truth[v].features;
    f.fill(0.0);
    f[index_of(Feature::month)] = static_cast<double>(visit.date.month());
    const double mult = chosen[v].method == SamplingMethod::net ? ingest::kNetScaleFactor : 1.0;
    double total = 0.0;
    for (const auto& [name, value] : chosen[v].counts) {
      if (!ingest::is_dsp_producer(name)) continue;
      total += value * mult;
      if (const auto sp = ingest::classify_species(name)) f[index_of(ingest::feature_of(*sp))] += value * mult;
    }
    f[index_of(Feature::dsp_tot)] = total;
    f[index_of(Feature::air_temp)] = window_mean(air, visit.date, kMeteoWindow);
    f[index_of(Feature::wind)] = window_mean(wind, visit.date, kMeteoWindow);
    f[index_of(Feature::precip)] = window_sum(precip, visit.date, kMeteoWindow);
    f[index_of(Feature::solar)] = window_sum(solar, visit.date, kMeteoWindow);
    f[index_of(Feature::river_flow)] = window_sum(flow, visit.date, kRiverWindow);
    out.truth[v].date = visit.date;
    out.truth[v].station = visit.station;
  }

  // Seawater at each visit, with blanks covered by the donor station.
  std::set<Date> visit_dates;
  for (const auto& v : visits) visit_dates.insert(v.date);
  std::map<Date, std::pair<double, double>> donor;
  for (Date d : visit_dates) {
    const double sst = round_dp(cfg.sst_mean - 0.3 + cfg.sst_amplitude * seasonal(d, 225.0) + 0.6 * rng.normal(), 1);
    const double flow30 = window_sum(flow, d, kRiverWindow) / kRiverWindow;
    const double sal = round_dp(std::clamp(cfg.salinity_mean - 0.15 - 0.012 * (flow30 - cfg.river_base) +
                                               0.4 * rng.normal(),
                                           30.0, 39.0),
                                2);
    donor[d] = {sst, sal};
    out.sources.seawater.push_back({d, cfg.donor_station, sst, sal});
  }
  for (std::size_t v = 0; v < visits.size(); ++v) {
    const Visit& visit = visits[v];
    const Date d = visit.date;
    const double offset = 0.2 * static_cast<double>(visit.station_index);
    const double sst = round_dp(cfg.sst_mean + offset + cfg.sst_amplitude * seasonal(d, 225.0) + 0.6 * rng.normal(), 1);
    const double flow30 = window_sum(flow, d, kRiverWindow) / kRiverWindow;
    const double sal = round_dp(
        std::clamp(cfg.salinity_mean - 0.012 * (flow30 - cfg.river_base) + 0.4 * rng.normal(), 30.0, 39.0), 2);
    const bool blank_sst = rng.bernoulli(cfg.blank_seawater);
    const bool blank_sal = rng.bernoulli(cfg.blank_seawater);
    out.sources.seawater.push_back({d, visit.station, blank_sst ? std::nullopt : std::optional<double>(sst),
                                    blank_sal ? std::nullopt : std::optional<double>(sal)});
    out.truth[v].features[index_of(Feature::sst)] = blank_sst ? donor[d].first : sst;
    out.truth[v].features[index_of(Feature::salinity)] = blank_sal ? donor[d].second : sal;
  }

  // Latent toxicity probability.
  const auto& lm = cfg.labels;
  std::vector<double> logits(visits.size());
  for (std::size_t v = 0; v < visits.size(); ++v) {
    const auto& f = out.truth[v].features;
    logits[v] = lm.w_fortii * std::log1p(f[index_of(Feature::d_fortii)]) / 3.0 +
                lm.w_caudata * std::log1p(f[index_of(Feature::d_caudata)]) / 3.0 +
                lm.w_salinity * (f[index_of(Feature::salinity)] - cfg.salinity_mean) +
                lm.w_river * (f[index_of(Feature::river_flow)] / (kRiverWindow * cfg.river_base) - 1.0) +
                lm.noise * rng.normal();
  }

  // Tests follow a visit by 0-14 days and precede the station's next visit.
  std::vector<std::size_t> tested;
  std::vector<std::int32_t> lag(visits.size(), 0);
  {
    std::map<std::string, std::size_t> next_of;
    std::vector<std::optional<Date>> next_visit(visits.size());
    for (std::size_t v = visits.size(); v-- > 0;) {
      const auto it = next_of.find(visits[v].station);
      if (it != next_of.end()) next_visit[v] = visits[it->second].date;
      next_of[visits[v].station] = v;
    }
    for (std::size_t v = 0; v < visits.size(); ++v) {
      const double p = in_season(visits[v].date) ? cfg.test_fraction_season : cfg.test_fraction_winter;
      if (!rng.bernoulli(p)) continue;
      std::int32_t max_lag = 14;
      if (next_visit[v]) max_lag = std::min<std::int32_t>(max_lag, (*next_visit[v] - visits[v].date) - 1);
      lag[v] = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(max_lag) + 1));
      tested.push_back(v);
    }
  }
  if (tested.empty()) throw Error(ErrorKind::InfeasiblePrevalence, "no toxicity tests were generated");

  auto mean_p = [&](double b) {
    double acc = 0.0;
    for (std::size_t v : tested) acc += sigmoid(logits[v] + b);
    return acc / static_cast<double>(tested.size());
  };
  double lo = -60.0, hi = 60.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mean_p(mid) < lm.prevalence ? lo : hi) = mid;
  }
  out.intercept = 0.5 * (lo + hi);
  for (std::size_t v = 0; v < visits.size(); ++v) out.truth[v].latent_probability = sigmoid(logits[v] + out.intercept);

  std::vector<int> labels;
  double best_gap = std::numeric_limits<double>::infinity();
  double best_prev = 0.0;
  bool accepted = false;
  for (std::uint64_t attempt = 0; attempt < 1000 && !accepted; ++attempt) {
    Rng draw(derive_seed(seed, "labels", attempt));
    labels.assign(tested.size(), 0);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < tested.size(); ++i) {
      labels[i] = draw.bernoulli(out.truth[tested[i]].latent_probability) ? 1 : 0;
      pos += static_cast<std::size_t>(labels[i]);
    }
    const double prev = static_cast<double>(pos) / static_cast<double>(tested.size());
    const double gap = std::abs(prev - lm.prevalence);
    if (gap < best_gap) {
      best_gap = gap;
      best_prev = prev;
    }
    if (gap <= lm.tolerance) accepted = true;
  }
  if (!accepted) {
    throw Error(ErrorKind::InfeasiblePrevalence,
                "prevalence target " + csv::format_double(lm.prevalence) + " unreachable; closest achieved " +
                    csv::format_double(best_prev));
  }
  out.realized_prevalence = best_prev;
  out.tests = tested.size();

  for (std::size_t i = 0; i < tested.size(); ++i) {
    const std::size_t v = tested[i];
    const Date td = visits[v].date + lag[v];
    ToxTest t;
    t.date = td;
    t.station = visits[v].station;
    if (td.year() - cfg.start_year >= cfg.lcms_from_year && rng.bernoulli(0.7)) {
      t.method = ingest::ToxMethod::lcms;
      t.concentration = labels[i] ? round_dp(177.0 + 150.0 * rng.lognormal(0.0, 0.8), 1)
                                  : round_dp(170.0 * rng.uniform(), 1);
    } else {
      t.result = labels[i] ? ingest::ToxResult::pos : ingest::ToxResult::neg;
    }
    out.sources.tox.push_back(t);
    out.truth[v].label = labels[i];
    out.truth[v].test_date = td;
  }
  std::ranges::sort(out.sources.tox, [](const ToxTest& a, const ToxTest& b) {
    return std::tie(a.date, a.station) < std::tie(b.date, b.station);
  });

  // Label the forward matcher should find: earliest test within 30 days.
  for (auto& row : out.truth) {
    std::optional<Date> best_date;
    for (const auto& t : out.sources.tox) {
      if (t.station != row.station) continue;
      const auto d = t.date - row.date;
      if (d < 0 || d > kMatchWindow) continue;
      if (!best_date || t.date < *best_date) {
        best_date = t.date;
        row.matched_label = t.result ? (*t.result == ingest::ToxResult::pos ? 1 : 0)
                                     : (*t.concentration > 176.0 ? 1 : 0);
      }
    }
  }

  for (const auto& s : cfg.stations) {
    auto& alt = out.ranking[s];
    alt.push_back(cfg.donor_station);
    for (const auto& o : cfg.stations) {
      if (o != s) alt.push_back(o);
    }
  }
  std::ranges::stable_sort(out.sources.phyto.records, [](const PhytoRecord& a, const PhytoRecord& b) {
    return std::tie(a.date, a.station) < std::tie(b.date, b.station);
  });
  std::ranges::stable_sort(out.sources.seawater, [](const SeawaterRecord& a, const SeawaterRecord& b) {
    return std::tie(a.date, a.station) < std::tie(b.date, b.station);
  });
  return out;
}

std::string ground_truth_csv(const SynthOutput& out, const SynthConfig& cfg) {
  const auto& lm = cfg.labels;
  std::string text = "# intercept=" + csv::format_double(out.intercept) + "\n";
  text += "# weights d_fortii=" + csv::format_double(lm.w_fortii) + ",d_caudata=" + csv::format_double(lm.w_caudata) +
          ",salinity=" + csv::format_double(lm.w_salinity) + ",river_flow=" + csv::format_double(lm.w_river) +
          ",noise=" + csv::format_double(lm.noise) + "\n";
  text += "# prevalence target=" + csv::format_double(lm.prevalence) +
          ",realized=" + csv::format_double(out.realized_prevalence) + ",tests=" + std::to_string(out.tests) + "\n";
  std::vector<std::string> header{"date", "station"};
  for (auto n : kFeatureNames) header.emplace_back(n);
  for (const char* h : {"latent_probability", "label", "test_date", "matched_label"}) header.emplace_back(h);
  csv::Writer w(header);
  for (const auto& r : out.truth) {
    w.field(r.date.iso()).field(r.station);
    for (double f : r.features) w.field(f);
    w.field(r.latent_probability);
    w.field(r.label ? std::to_string(*r.label) : std::string());
    w.field(r.test_date ? r.test_date->iso() : std::string());
    w.field(r.matched_label ? std::to_string(*r.matched_label) : std::string());
    w.end_row();
  }
  return text + w.str();
}

std::string ranking_json(const preprocess::StationRanking& ranking) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [station, alt] : ranking) j[station] = alt;
  return j.dump(2) + "\n";
}

preprocess::StationRanking parse_ranking_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    preprocess::StationRanking ranking;
    for (const auto& [station, alt] : j.items()) ranking[station] = alt.get<std::vector<std::string>>();
    return ranking;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaMismatch, std::string("station ranking: ") + e.what());
  }
}

void write_output(const SynthOutput& out, const SynthConfig& cfg, const std::filesystem::path& dir) {
  using ingest::Schema;
  csv::write_file(dir / ingest::file_name(Schema::phyto), ingest::serialize(out.sources.phyto.records));
  csv::write_file(dir / ingest::file_name(Schema::tox), ingest::serialize(out.sources.tox));
  csv::write_file(dir / ingest::file_name(Schema::seawater), ingest::serialize(out.sources.seawater));
  csv::write_file(dir / ingest::file_name(Schema::meteo), ingest::serialize(out.sources.meteo));
  csv::write_file(dir / ingest::file_name(Schema::river), ingest::serialize(out.sources.river));
  csv::write_file(dir / "ground_truth.csv", ground_truth_csv(out, cfg));
  csv::write_file(dir / "station_ranking.json", ranking_json(out.ranking));
}

}  // namespace habtox::synth
