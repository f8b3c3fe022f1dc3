#include "habtox/preprocess.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <tuple>
#include <unordered_map>

#include "habtox/csv.hpp"
#include "habtox/error.hpp"
#include "habtox/resample.hpp"
#include "habtox/rng.hpp"

namespace habtox::preprocess {

using ingest::EnvKind;
using ingest::EnvSample;
using ingest::PhytoRecord;
using ingest::ToxTest;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Depth order for tie-breaking: numeric depths ascending, integrated last.
bool shallower(const std::optional<double>& a, const std::optional<double>& b) {
  if (a && b) return *a < *b;
  return a.has_value() && !b.has_value();
}

// Daily lookup for one variable; the first occurrence of a date wins.
class DailySeries {
 public:
  void add(Date d, const std::optional<double>& v) { values_.try_emplace(d.days(), v); }

  std::optional<double> at(Date d) const {
    const auto it = values_.find(d.days());
    return it == values_.end() ? std::nullopt : it->second;
  }

 private:
  std::unordered_map<std::int32_t, std::optional<double>> values_;
};

DailySeries series_of(std::span<const EnvSample> samples, EnvKind kind) {
  DailySeries s;
  for (const auto& e : samples) {
    if (e.kind == kind) s.add(e.date, e.value);
  }
  return s;
}

// Sum of the `days` values strictly before obs, oldest first.
std::optional<double> window_sum(const DailySeries& s, Date obs, int days) {
  double sum = 0.0;
  for (int back = days; back >= 1; --back) {
    const auto v = s.at(obs - back);
    if (!v) return std::nullopt;
    sum += *v;
  }
  return sum;
}

std::optional<double> window_mean(const DailySeries& s, Date obs, int days) {
  const auto sum = window_sum(s, obs, days);
  if (!sum) return std::nullopt;
  return *sum / static_cast<double>(days);
}

}  // namespace

void WindowConfig::validate() const {
  if (tox_match_days <= 0 || meteo_window_days <= 0 || river_window_days <= 0 || interp_days <= 0 ||
      !(regulatory_limit > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "window lengths and the regulatory limit must be positive");
  }
}

double dsp_total(std::span<const PhytoRecord> records) {
  double total = 0.0;
  for (const auto& r : records) {
    if (ingest::is_dsp_producer(r.species)) total += r.abundance;
  }
  return total;
}

std::map<VisitKey, std::vector<PhytoRecord>> select_sample_per_visit(
    std::span<const PhytoRecord> records) {
  // visit -> depth groups in first-seen order
  std::map<VisitKey, std::vector<std::pair<std::optional<double>, std::vector<PhytoRecord>>>> groups;
  for (const auto& r : records) {
    auto& depths = groups[VisitKey{r.date, r.station}];
    auto it = std::ranges::find_if(depths, [&](const auto& g) { return g.first == r.depth_m; });
    if (it == depths.end()) {
      depths.emplace_back(r.depth_m, std::vector<PhytoRecord>{});
      it = std::prev(depths.end());
    }
    it->second.push_back(r);
  }
  std::map<VisitKey, std::vector<PhytoRecord>> out;
  for (auto& [key, depths] : groups) {
    std::size_t best = 0;
    double best_total = dsp_total(depths[0].second);
    for (std::size_t i = 1; i < depths.size(); ++i) {
      const double t = dsp_total(depths[i].second);
      if (t > best_total || (t == best_total && shallower(depths[i].first, depths[best].first))) {
        best = i;
        best_total = t;
      }
    }
    out.emplace(key, std::move(depths[best].second));
  }
  return out;
}

int binarize_toxicity(const ToxTest& test, double limit) {
  if (test.method == ingest::ToxMethod::bioassay) {
    if (!test.result) throw Error(ErrorKind::MissingValue, "bioassay test without result");
    return *test.result == ingest::ToxResult::pos ? 1 : 0;
  }
  if (!test.concentration) {
    throw Error(ErrorKind::MissingValue, "lcms test on " + test.date.iso() + " without concentration");
  }
  // Harvesting is banned only when the limit is exceeded.
  return *test.concentration > limit ? 1 : 0;
}

std::optional<ToxMatch> match_toxicity(Date obs_date, const std::string& station,
                                       std::span<const ToxTest> tests, int window_days, double limit,
                                       MatchDirection direction) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < tests.size(); ++i) {
    const auto& t = tests[i];
    if (t.station != station) continue;
    const int lag = t.date - obs_date;
    if (direction == MatchDirection::forward) {
      if (lag < 0 || lag > window_days) continue;
      if (!best || t.date < tests[*best].date) best = i;
    } else {
      if (lag > 0 || -lag > window_days) continue;
      if (!best || t.date > tests[*best].date) best = i;
    }
  }
  if (!best) return std::nullopt;
  return ToxMatch{binarize_toxicity(tests[*best], limit), *best};
}

InterpolationResult interpolate_station_gaps(std::span<const EnvSample> series,
                                             const StationRanking& ranking, int window_days) {
  // (kind, station) -> measured values sorted by date
  std::map<std::pair<EnvKind, std::string>, std::vector<std::pair<Date, double>>> donors;
  for (const auto& s : series) {
    if (s.value) donors[{s.kind, s.station}].emplace_back(s.date, *s.value);
  }
  for (auto& [key, v] : donors) {
    std::ranges::stable_sort(v, {}, &std::pair<Date, double>::first);
  }

  InterpolationResult result;
  result.samples.assign(series.begin(), series.end());
  for (auto& s : result.samples) {
    if (s.value) continue;
    const auto rank_it = ranking.find(s.station);
    if (rank_it == ranking.end()) {
      ++result.unfilled;
      continue;
    }
    // (date distance, rank, date) ordering
    std::optional<std::tuple<int, std::size_t, Date, double>> best;
    for (std::size_t rank = 0; rank < rank_it->second.size(); ++rank) {
      const auto d_it = donors.find({s.kind, rank_it->second[rank]});
      if (d_it == donors.end()) continue;
      const auto& v = d_it->second;
      auto lo = std::ranges::lower_bound(v, s.date - window_days, {}, &std::pair<Date, double>::first);
      for (; lo != v.end() && lo->first <= s.date + window_days; ++lo) {
        const std::tuple<int, std::size_t, Date, double> cand{std::abs(lo->first - s.date), rank,
                                                              lo->first, lo->second};
        if (!best || std::tie(std::get<0>(cand), std::get<1>(cand), std::get<2>(cand)) <
                         std::tie(std::get<0>(*best), std::get<1>(*best), std::get<2>(*best))) {
          best = cand;
        }
      }
    }
    if (best) {
      s.value = std::get<3>(*best);
      ++result.filled;
    } else {
      ++result.unfilled;
    }
  }
  return result;
}

EnvAggregates aggregate_env(Date obs_date, std::span<const EnvSample> meteo,
                            std::span<const EnvSample> river, const WindowConfig& cfg) {
  EnvAggregates agg;
  const int w = cfg.meteo_window_days;
  agg.air_temp = window_mean(series_of(meteo, EnvKind::air_temp_c), obs_date, w);
  agg.wind = window_mean(series_of(meteo, EnvKind::wind_ms), obs_date, w);
  agg.precip = window_sum(series_of(meteo, EnvKind::precip_mm), obs_date, w);
  agg.solar = window_sum(series_of(meteo, EnvKind::solar_h), obs_date, w);
  agg.river_flow = window_sum(series_of(river, EnvKind::river_flow_m3s), obs_date, cfg.river_window_days);
  return agg;
}

StationRanking default_ranking(std::span<const ingest::SeawaterRecord> seawater) {
  std::set<std::string> stations;
  for (const auto& r : seawater) stations.insert(r.station);
  StationRanking ranking;
  for (const auto& s : stations) {
    auto& alt = ranking[s];
    for (const auto& o : stations) {
      if (o != s) alt.push_back(o);
    }
  }
  return ranking;
}

Consolidated consolidate(const ingest::RawSources& sources, const WindowConfig& cfg,
                         const StationRanking& ranking) {
  cfg.validate();
  Consolidated out;
  const ingest::PhytoBatch phyto = ingest::harmonize(sources.phyto);
  const auto visits = select_sample_per_visit(phyto.records);
  out.audit.visits = visits.size();

  // Seawater: add an empty slot for every visit lacking a row, then fill gaps
  // from donor stations.
  std::vector<EnvSample> sea = ingest::to_env_samples(sources.seawater);
  {
    std::set<std::tuple<std::int32_t, std::string, EnvKind>> present;
    for (const auto& s : sea) present.emplace(s.date.days(), s.station, s.kind);
    for (const auto& [key, recs] : visits) {
      for (EnvKind k : {EnvKind::sst_c, EnvKind::salinity}) {
        if (!present.contains({key.date.days(), key.station, k})) {
          sea.push_back({key.date, key.station, k, std::nullopt});
        }
      }
    }
  }
  auto interp = interpolate_station_gaps(sea, ranking, cfg.interp_days);
  out.audit.interpolated_values = interp.filled;
  std::map<std::tuple<std::int32_t, std::string, EnvKind>, double> sea_lookup;
  for (const auto& s : interp.samples) {
    if (s.value) sea_lookup.try_emplace({s.date.days(), s.station, s.kind}, *s.value);
  }

  const auto meteo = ingest::to_env_samples(sources.meteo);
  const auto river = ingest::to_env_samples(sources.river);
  const DailySeries air = series_of(meteo, EnvKind::air_temp_c);
  const DailySeries wind = series_of(meteo, EnvKind::wind_ms);
  const DailySeries precip = series_of(meteo, EnvKind::precip_mm);
  const DailySeries solar = series_of(meteo, EnvKind::solar_h);
  const DailySeries flow = series_of(river, EnvKind::river_flow_m3s);

  std::vector<ToxTest> tests;
  for (const auto& t : sources.tox) {
    try {
      (void)binarize_toxicity(t, cfg.regulatory_limit);
      tests.push_back(t);
    } catch (const Error&) {
      ++out.audit.invalid_tests;
    }
  }
  std::vector<std::size_t> uses(tests.size(), 0);

  for (const auto& [key, recs] : visits) {
    ConsolidatedInstance inst;
    inst.date = key.date;
    inst.station = key.station;
    inst[Feature::month] = static_cast<double>(key.date.month());
    for (std::size_t s = 0; s < ingest::kSpeciesNames.size(); ++s) inst.features[index_of(ingest::feature_of(static_cast<ingest::Species>(s)))] = 0.0;
    for (const auto& r : recs) {
      if (const auto sp = ingest::classify_species(r.species)) {
        inst[ingest::feature_of(*sp)] += r.abundance;
      }
    }
    inst[Feature::dsp_tot] = dsp_total(recs);
    auto sea_value = [&](EnvKind k) {
      const auto it = sea_lookup.find({key.date.days(), key.station, k});
      return it == sea_lookup.end() ? kNaN : it->second;
    };
    inst[Feature::sst] = sea_value(EnvKind::sst_c);
    inst[Feature::salinity] = sea_value(EnvKind::salinity);
    inst[Feature::air_temp] = window_mean(air, key.date, cfg.meteo_window_days).value_or(kNaN);
    inst[Feature::wind] = window_mean(wind, key.date, cfg.meteo_window_days).value_or(kNaN);
    inst[Feature::precip] = window_sum(precip, key.date, cfg.meteo_window_days).value_or(kNaN);
    inst[Feature::solar] = window_sum(solar, key.date, cfg.meteo_window_days).value_or(kNaN);
    inst[Feature::river_flow] = window_sum(flow, key.date, cfg.river_window_days).value_or(kNaN);

    const auto match = match_toxicity(key.date, key.station, tests, cfg.tox_match_days,
                                      cfg.regulatory_limit, cfg.match_direction);
    if (!match) {
      out.unlabeled.push_back(std::move(inst));
      continue;
    }
    if (uses[match->test_index]++ > 0) ++out.audit.reused_tests;
    inst.label = match->label;
    if (inst.complete()) {
      out.labeled.push_back(std::move(inst));
      continue;
    }
    std::string reason = "missing:";
    bool first = true;
    for (std::size_t c = 0; c < kFeatureCount; ++c) {
      if (std::isfinite(inst.features[c])) continue;
      if (!first) reason += ';';
      reason += kFeatureNames[c];
      first = false;
    }
    out.audit.drops.push_back({inst.date, inst.station, std::move(reason)});
    ++out.audit.dropped_missing;
  }
  out.audit.labeled = out.labeled.size();
  out.audit.unlabeled = out.unlabeled.size();
  return out;
}

CleanResult clean_overlap(std::span<const ConsolidatedInstance> dataset, std::size_t k,
                          bool scaled_knn) {
  LabeledData data;
  data.x = FeatureMatrix(0, kFeatureCount);
  for (const auto& inst : dataset) {
    if (!inst.label || !inst.complete()) {
      throw Error(ErrorKind::InvalidArgument, "clean_overlap needs complete labelled instances");
    }
    data.append(inst.features, *inst.label);
  }
  const auto res = resample::enn(data, k, 0, scaled_knn);
  CleanResult out;
  for (std::size_t i : res.kept_indices) out.kept.push_back(dataset[i]);
  for (std::size_t i : res.removed_indices) out.removed.push_back(dataset[i]);
  return out;
}

SplitIndices stratified_split(std::span<const int> labels, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "train_fraction must lie in (0, 1)");
  }
  const std::size_t n = labels.size();
  const std::size_t total_train = resample::round_count(spec.train_fraction * static_cast<double>(n));
  SplitIndices out;

  if (!spec.stratified) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(derive_seed(spec.seed, "split"));
    rng.shuffle(idx);
    out.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(total_train));
    out.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(total_train), idx.end());
  } else {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < n; ++i) by_class[labels[i]].push_back(i);
    if (by_class.size() < 2) throw Error(ErrorKind::DegenerateClass, "both classes must be present");
    struct Share {
      int label;
      std::size_t count;
      double remainder;
    };
    std::vector<Share> shares;
    std::size_t assigned = 0;
    for (const auto& [label, members] : by_class) {
      if (members.size() < 2) {
        throw Error(ErrorKind::DegenerateClass,
                    "class " + std::to_string(label) + " has fewer than 2 instances");
      }
      const double exact = spec.train_fraction * static_cast<double>(members.size());
      const auto fl = static_cast<std::size_t>(std::floor(exact));
      shares.push_back({label, fl, exact - static_cast<double>(fl)});
      assigned += fl;
    }
    std::vector<std::size_t> order(shares.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) {
      return shares[a].remainder > shares[b].remainder;
    });
    for (std::size_t i = 0; assigned < total_train && i < order.size(); ++i, ++assigned) {
      ++shares[order[i]].count;
    }
    for (const auto& share : shares) {
      std::vector<std::size_t> members = by_class[share.label];
      Rng rng(derive_seed(spec.seed, "split", static_cast<std::uint64_t>(share.label)));
      rng.shuffle(members);
      const std::size_t take = std::clamp<std::size_t>(share.count, 1, members.size() - 1);
      out.train.insert(out.train.end(), members.begin(),
                       members.begin() + static_cast<std::ptrdiff_t>(take));
      out.test.insert(out.test.end(), members.begin() + static_cast<std::ptrdiff_t>(take),
                      members.end());
    }
  }
  std::ranges::sort(out.train);
  std::ranges::sort(out.test);
  return out;
}

Projection project_2d(const FeatureMatrix& x) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (n < 3) throw Error(ErrorKind::TooFewInstances, "projection needs at least 3 instances");
  const FeatureMatrix z = resample::zscore(x);
  Eigen::MatrixXd m(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = z(r, c);
  }
  const Eigen::MatrixXd cov = (m.transpose() * m) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  const Eigen::VectorXd& values = solver.eigenvalues();  // ascending
  const Eigen::MatrixXd& vectors = solver.eigenvectors();

  Projection p;
  p.total_variance = cov.trace();
  p.x.assign(n, 0.0);
  p.y.assign(n, 0.0);
  const double tol = 1e-10 * std::max(1.0, p.total_variance);
  for (std::size_t comp = 0; comp < 2 && comp < d; ++comp) {
    const Eigen::Index col = static_cast<Eigen::Index>(d - 1 - comp);
    const double lambda = values(col);
    if (!(lambda > tol)) break;
    Eigen::VectorXd v = vectors.col(col);
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
      if (std::abs(v(i)) > std::abs(v(arg)) + 1e-12) arg = i;
    }
    if (v(arg) < 0.0) v = -v;
    const Eigen::VectorXd scores = m * v;
    auto& axis = comp == 0 ? p.x : p.y;
    for (std::size_t r = 0; r < n; ++r) axis[r] = scores(static_cast<Eigen::Index>(r));
    (comp == 0 ? p.loadings_1 : p.loadings_2).assign(v.data(), v.data() + v.size());
    p.explained_variance[comp] = lambda;
    ++p.rank;
  }
  return p;
}

void write_drops_audit(const ConsolidationAudit& audit, const std::filesystem::path& path) {
  csv::Writer w({"date", "station", "reason"});
  for (const auto& d : audit.drops) {
    w.field(d.date.iso()).field(d.station).field(d.reason);
    w.end_row();
  }
  csv::write_file(path, w.str());
}

}  // namespace habtox::preprocess
