#include "habtox/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "habtox/csv.hpp"
#include "habtox/error.hpp"
#include "habtox/parallel.hpp"
#include "habtox/preprocess.hpp"
#include "habtox/rng.hpp"

namespace habtox::evaluate {

using models::Algorithm;

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::string cell_id(Algorithm algo, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "-%03zu", index);
  return std::string(models::to_string(algo)) + buf;
}

std::vector<resample::ResampleConfig> resampler_grid(std::initializer_list<std::size_t> ks,
                                                     std::initializer_list<double> smote,
                                                     std::initializer_list<double> under) {
  std::vector<resample::ResampleConfig> out;
  for (std::size_t k : ks) {
    for (double s : smote) {
      for (double u : under) out.push_back({k, s, u, false});
    }
  }
  return out;
}

double mean_of(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double population_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

}  // namespace

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

Metrics compute_metrics(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw Error(ErrorKind::LengthMismatch, "y_true has " + std::to_string(y_true.size()) +
                                               " labels, y_pred " + std::to_string(y_pred.size()));
  }
  Metrics m;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i];
    const int p = y_pred[i];
    if ((t != 0 && t != 1) || (p != 0 && p != 1)) {
      throw Error(ErrorKind::InvalidArgument, "labels must be 0 or 1");
    }
    if (t == 1) {
      ++(p == 1 ? m.tp : m.fn);
    } else {
      ++(p == 1 ? m.fp : m.tn);
    }
  }
  m.precision = ratio(m.tp, m.tp + m.fp);
  m.recall = ratio(m.tp, m.tp + m.fn);
  m.f1 = f1_score(m.precision, m.recall);
  m.accuracy = ratio(m.tp + m.tn, y_true.size());
  return m;
}

std::string_view to_string(Objective o) {
  switch (o) {
    case Objective::f1: return "f1";
    case Objective::recall: return "recall";
    case Objective::precision: return "precision";
  }
  return "";
}

Objective parse_objective(std::string_view name) {
  if (name == "f1") return Objective::f1;
  if (name == "recall") return Objective::recall;
  if (name == "precision") return Objective::precision;
  throw Error(ErrorKind::InvalidArgument, "unknown objective '" + std::string(name) + "'");
}

double objective_value(const Metrics& m, Objective o) {
  switch (o) {
    case Objective::f1: return m.f1;
    case Objective::recall: return m.recall;
    case Objective::precision: return m.precision;
  }
  return m.f1;
}

std::vector<std::vector<std::size_t>> stratified_kfold(std::span<const int> labels, std::size_t k,
                                                       std::uint64_t seed) {
  if (k < 2) throw Error(ErrorKind::InvalidArgument, "k-fold needs k >= 2");
  std::array<std::vector<std::size_t>, 2> members;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw Error(ErrorKind::InvalidArgument, "labels must be 0 or 1");
    members[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  for (int c = 0; c < 2; ++c) {
    if (members[static_cast<std::size_t>(c)].size() < k) {
      throw Error(ErrorKind::TooFewPerClass,
                  "class " + std::to_string(c) + " has " +
                      std::to_string(members[static_cast<std::size_t>(c)].size()) + " rows, fewer than k=" +
                      std::to_string(k));
    }
  }
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t cursor = 0;
  for (int c = 0; c < 2; ++c) {
    auto rows = members[static_cast<std::size_t>(c)];
    Rng rng(derive_seed(seed, "kfold", static_cast<std::uint64_t>(c)));
    rng.shuffle(rows);
    for (std::size_t r : rows) {
      folds[cursor].push_back(r);
      cursor = (cursor + 1) % k;
    }
  }
  for (auto& f : folds) std::ranges::sort(f);
  return folds;
}

std::string GridCell::description() const {
  std::ostringstream os;
  os << models::to_string(models::algorithm_of(model)) << ' ' << models::describe(model)
     << " smote_k=" << resampler.smote_k << " smote_strategy=" << resampler.smote_strategy
     << " under_strategy=" << resampler.under_strategy;
  return os.str();
}

GridSpec GridSpec::defaults() {
  using models::ClassWeight;
  using models::Criterion;
  GridSpec g;
  const std::vector<std::optional<std::size_t>> depths{2, 3, 4, 5, std::nullopt};
  for (const auto& d : depths) {
    for (auto c : {Criterion::gini, Criterion::entropy}) {
      for (auto w : {ClassWeight::none, ClassWeight::balanced}) {
        models::TreeConfig t;
        t.max_depth = d;
        t.criterion = c;
        t.class_weight = w;
        g.dt.push_back(t);
      }
    }
  }
  for (std::size_t n : {100, 300, 500}) {
    for (auto c : {Criterion::gini, Criterion::entropy}) {
      models::ForestConfig f;
      f.n_estimators = n;
      f.criterion = c;
      g.rf.push_back(f);
    }
  }
  for (double C : {1.0, 10.0, 100.0}) {
    models::SvmConfig s;
    s.C = C;
    g.svm.push_back(s);
  }
  for (std::size_t h : {3, 8}) {
    models::MlpConfig m;
    m.hidden = h;
    g.mlp.push_back(m);
  }
  const auto r = resampler_grid({3, 5}, {0.3, 0.4, 0.5, 0.6}, {0.5, 0.6, 0.7});
  g.resamplers.fill(r);
  return g;
}

GridSpec GridSpec::small() {
  using models::Criterion;
  GridSpec g;
  for (std::optional<std::size_t> d : {std::optional<std::size_t>{3}, std::optional<std::size_t>{4},
                                       std::optional<std::size_t>{}}) {
    models::TreeConfig t;
    t.max_depth = d;
    t.criterion = Criterion::entropy;
    g.dt.push_back(t);
  }
  models::ForestConfig f;
  f.n_estimators = 100;
  g.rf.push_back(f);
  for (double C : {10.0, 100.0}) {
    models::SvmConfig s;
    s.C = C;
    g.svm.push_back(s);
  }
  g.mlp.push_back(models::MlpConfig{});
  g.resamplers.fill(resampler_grid({3}, {0.4}, {0.5, 0.6}));
  return g;
}

GridSpec GridSpec::reference() {
  GridSpec g;
  models::TreeConfig t;
  t.criterion = models::Criterion::entropy;
  t.max_depth = 4;
  g.dt.push_back(t);
  models::ForestConfig f;
  f.n_estimators = 300;
  g.rf.push_back(f);
  g.svm.push_back(models::SvmConfig{});
  g.mlp.push_back(models::MlpConfig{});
  g.resamplers[static_cast<std::size_t>(Algorithm::svm)] = {{3, 0.4, 0.6, false}};
  g.resamplers[static_cast<std::size_t>(Algorithm::dt)] = {{3, 0.3, 0.6, false}};
  g.resamplers[static_cast<std::size_t>(Algorithm::rf)] = {{3, 0.4, 0.5, false}};
  g.resamplers[static_cast<std::size_t>(Algorithm::mlp)] = {{5, 0.6, 0.7, false}};
  return g;
}

std::vector<GridCell> GridSpec::cells(Algorithm algo) const {
  std::vector<models::ModelConfig> configs;
  switch (algo) {
    case Algorithm::dt: configs.assign(dt.begin(), dt.end()); break;
    case Algorithm::rf: configs.assign(rf.begin(), rf.end()); break;
    case Algorithm::svm: configs.assign(svm.begin(), svm.end()); break;
    case Algorithm::mlp: configs.assign(mlp.begin(), mlp.end()); break;
  }
  const auto& rs = resamplers[static_cast<std::size_t>(algo)];
  std::vector<GridCell> out;
  for (const auto& m : configs) {
    for (const auto& r : rs) out.push_back({cell_id(algo, out.size()), m, r});
  }
  return out;
}

LabeledData resample_train(const LabeledData& train, const resample::ResampleConfig& resampler,
                           std::uint64_t seed) {
  const LabeledData over = resample::smote(train, resampler, derive_seed(seed, "smote"));
  return resample::random_undersample(over, resampler, derive_seed(seed, "under"));
}

std::pair<LabeledData, LabeledData> fold_data(const LabeledData& train,
                                              std::span<const std::size_t> validation_rows,
                                              const resample::ResampleConfig& resampler,
                                              std::uint64_t fold_seed) {
  std::vector<char> held(train.size(), 0);
  for (std::size_t r : validation_rows) held.at(r) = 1;
  std::vector<std::size_t> fit_rows;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (!held[i]) fit_rows.push_back(i);
  }
  LabeledData validation = train.subset(validation_rows);
  for (RowOrigin o : validation.origin) {
    if (o != RowOrigin::original) {
      throw Error(ErrorKind::InvalidArgument, "validation fold contains synthetic rows");
    }
  }
  return {resample_train(train.subset(fit_rows), resampler, fold_seed), std::move(validation)};
}

GridResult grid_search(const LabeledData& train, Algorithm algo, std::span<const GridCell> cells,
                       std::uint64_t seed, const GridOptions& options) {
  train.validate();
  if (train.count(0) == 0 || train.count(1) == 0) {
    throw Error(ErrorKind::DegenerateClass, "grid search needs both classes in the training data");
  }
  if (cells.empty()) throw Error(ErrorKind::InvalidArgument, "empty grid");
  const auto folds = stratified_kfold(train.y, options.folds, derive_seed(seed, "folds"));

  GridResult out;
  out.algorithm = algo;
  out.cells.assign(cells.begin(), cells.end());
  out.results.resize(cells.size());

  parallel_for(cells.size(), options.threads, [&](std::size_t c) {
    const GridCell& cell = cells[c];
    CellResult& res = out.results[c];
    res.id = cell.id;
    res.description = cell.description();
    try {
      if (models::algorithm_of(cell.model) != algo) {
        throw Error(ErrorKind::InvalidArgument, "cell " + cell.id + " belongs to another algorithm");
      }
      for (std::size_t f = 0; f < folds.size(); ++f) {
        const std::uint64_t fold_seed = derive_seed(seed, "fold", f);
        auto [fit_set, validation] = fold_data(train, folds[f], cell.resampler, fold_seed);
        const models::Model model = models::fit(fit_set, cell.model, derive_seed(fold_seed, "fit"));
        FoldScores fs{f, models::score(model, validation.x), validation.y};
        std::vector<int> pred;
        pred.reserve(fs.scores.size());
        for (double s : fs.scores) pred.push_back(models::label_from_score(algo, s));
        res.fold_values.push_back(objective_value(compute_metrics(validation.y, pred), options.objective));
        res.validation.push_back(std::move(fs));
      }
      res.mean = mean_of(res.fold_values);
    } catch (const std::exception& e) {
      res.failed = true;
      res.error = e.what();
      res.mean = -std::numeric_limits<double>::infinity();
      res.validation.clear();
    }
  });

  for (std::size_t c = 0; c < out.results.size(); ++c) {
    if (out.results[c].failed) continue;
    if (!out.any_succeeded || out.results[c].mean > out.results[out.best].mean) out.best = c;
    out.any_succeeded = true;
  }
  return out;
}

std::vector<PrPoint> pr_curve(std::span<const double> scores, std::span<const int> y_true) {
  if (scores.size() != y_true.size()) {
    throw Error(ErrorKind::LengthMismatch, "scores and labels differ in length");
  }
  const auto positives = static_cast<std::size_t>(std::ranges::count(y_true, 1));
  if (positives == 0) throw Error(ErrorKind::NoPositives, "precision-recall curve needs a positive label");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<PrPoint> curve;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double t = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == t; ++i) ++(y_true[order[i]] == 1 ? tp : fp);
    curve.push_back({t, ratio(tp, positives), ratio(tp, tp + fp)});
    if (tp == positives) break;
  }
  return curve;
}

double interpolated_precision(std::span<const PrPoint> curve, double recall) {
  for (const auto& p : curve) {
    if (p.recall >= recall) return p.precision;
  }
  return 0.0;
}

std::vector<std::pair<double, double>> average_pr(std::span<const std::vector<PrPoint>> curves) {
  if (curves.empty()) throw Error(ErrorKind::InvalidArgument, "no curves to average");
  std::vector<std::pair<double, double>> out;
  for (int i = 0; i <= 100; ++i) {
    const double r = i / 100.0;
    double acc = 0.0;
    for (const auto& c : curves) acc += interpolated_precision(c, r);
    out.emplace_back(r, acc / static_cast<double>(curves.size()));
  }
  return out;
}

std::vector<Summary> summarize(std::span<const IterationResult> rows, std::span<const Algorithm> algorithms) {
  std::vector<Summary> out;
  for (Algorithm a : algorithms) {
    std::vector<double> p, r, f;
    for (const auto& row : rows) {
      if (row.algorithm != a) continue;
      p.push_back(row.metrics.precision);
      r.push_back(row.metrics.recall);
      f.push_back(row.metrics.f1);
    }
    Summary s;
    s.algorithm = a;
    s.iterations = f.size();
    s.precision_mean = mean_of(p);
    s.precision_std = population_std(p);
    s.recall_mean = mean_of(r);
    s.recall_std = population_std(r);
    s.f1_mean = mean_of(f);
    s.f1_std = population_std(f);
    s.f1_of_means = f1_score(s.precision_mean, s.recall_mean);
    out.push_back(s);
  }
  return out;
}

EvalReport repeated_eval(const LabeledData& data, const GridSpec& grid, const EvalOptions& options,
                         std::uint64_t seed) {
  data.validate();
  if (options.iterations == 0) throw Error(ErrorKind::InvalidArgument, "iterations must be positive");
  EvalReport report;
  std::vector<std::vector<GridCell>> cells;
  for (Algorithm a : options.algorithms) cells.push_back(grid.cells(a));

  for (std::size_t it = 0; it < options.iterations; ++it) {
    const std::uint64_t it_seed = derive_seed(seed, "iteration", it);
    preprocess::SplitSpec split_spec;
    split_spec.train_fraction = options.train_fraction;
    split_spec.seed = options.fixed_split ? derive_seed(seed, "split") : derive_seed(it_seed, "split");
    const auto split = preprocess::stratified_split(data.y, split_spec);
    const LabeledData train = data.subset(split.train);
    const LabeledData test = data.subset(split.test);

    for (std::size_t ai = 0; ai < options.algorithms.size(); ++ai) {
      const Algorithm algo = options.algorithms[ai];
      const std::uint64_t algo_seed = derive_seed(it_seed, models::to_string(algo));
      GridResult gr = grid_search(train, algo, cells[ai], algo_seed, options.grid);
      if (!gr.any_succeeded) {
        throw Error(ErrorKind::InvalidArgument, "every " + std::string(models::to_string(algo)) +
                                                    " grid cell failed: " + gr.results.front().error);
      }
      const GridCell& winner = gr.cells[gr.best];
      models::ModelConfig cfg = winner.model;
      if (auto* f = std::get_if<models::ForestConfig>(&cfg)) f->threads = options.grid.threads;
      const LabeledData fit_set = resample_train(train, winner.resampler, derive_seed(algo_seed, "refit"));
      const models::Model model = models::fit(fit_set, cfg, derive_seed(algo_seed, "model"));
      const auto pred = models::predict(model, test.x);

      IterationResult row;
      row.iteration = it;
      row.algorithm = algo;
      row.metrics = compute_metrics(test.y, pred);
      row.cell_id = winner.id;
      row.config = winner.description();
      row.cv_value = gr.results[gr.best].mean;
      report.iterations.push_back(row);

      for (const auto& fs : gr.results[gr.best].validation) {
        if (std::ranges::count(fs.y, 1) == 0) continue;
        report.curves.push_back({algo, it, fs.fold, pr_curve(fs.scores, fs.y)});
      }
      if (options.keep_grid_tables) {
        for (auto& r : gr.results) r.validation.clear();
        report.grids.push_back({it, std::move(gr)});
      }
    }
  }
  report.summaries = summarize(report.iterations, options.algorithms);
  return report;
}

void write_eval_report(const EvalReport& report, const std::filesystem::path& path) {
  csv::Writer w({"iteration", "algorithm", "precision", "recall", "f1", "tp", "fp", "fn", "tn",
                 "config_id", "config", "cv_value"});
  for (const auto& r : report.iterations) {
    w.field(r.iteration).field(models::to_string(r.algorithm)).field(r.metrics.precision)
        .field(r.metrics.recall).field(r.metrics.f1).field(r.metrics.tp).field(r.metrics.fp)
        .field(r.metrics.fn).field(r.metrics.tn).field(r.cell_id).field(r.config).field(r.cv_value);
    w.end_row();
  }
  csv::write_file(path, w.str());
}

void write_eval_summary(const EvalReport& report, const std::filesystem::path& path) {
  csv::Writer w({"algorithm", "iterations", "precision_mean", "precision_std", "recall_mean",
                 "recall_std", "f1_mean", "f1_std", "f1_of_means"});
  for (const auto& s : report.summaries) {
    w.field(models::to_string(s.algorithm)).field(s.iterations).field(s.precision_mean)
        .field(s.precision_std).field(s.recall_mean).field(s.recall_std).field(s.f1_mean)
        .field(s.f1_std).field(s.f1_of_means);
    w.end_row();
  }
  csv::write_file(path, w.str());
}

void write_pr_curves(const EvalReport& report, const std::filesystem::path& path) {
  csv::Writer w({"algorithm", "iteration", "fold", "threshold", "recall", "precision"});
  std::vector<Algorithm> seen;
  for (const auto& c : report.curves) {
    if (std::ranges::find(seen, c.algorithm) == seen.end()) seen.push_back(c.algorithm);
    for (const auto& p : c.curve) {
      w.field(models::to_string(c.algorithm)).field(c.iteration).field(c.fold).field(p.threshold)
          .field(p.recall).field(p.precision);
      w.end_row();
    }
  }
  for (Algorithm a : seen) {
    std::vector<std::vector<PrPoint>> curves;
    for (const auto& c : report.curves) {
      if (c.algorithm == a) curves.push_back(c.curve);
    }
    for (const auto& [r, p] : average_pr(curves)) {
      w.field(models::to_string(a)).field("all").field("mean").field(std::string_view{}).field(r).field(p);
      w.end_row();
    }
  }
  csv::write_file(path, w.str());
}

void write_grid_table(const EvalReport& report, const std::filesystem::path& path) {
  std::size_t folds = 0;
  for (const auto& g : report.grids) {
    for (const auto& r : g.result.results) folds = std::max(folds, r.fold_values.size());
  }
  std::vector<std::string> header{"iteration", "algorithm", "cell_id", "config"};
  for (std::size_t f = 0; f < folds; ++f) header.push_back("fold_" + std::to_string(f));
  for (const char* h : {"mean", "failed", "winner", "error"}) header.emplace_back(h);
  csv::Writer w(header);
  for (const auto& g : report.grids) {
    for (std::size_t c = 0; c < g.result.results.size(); ++c) {
      const auto& r = g.result.results[c];
      w.field(g.iteration).field(models::to_string(g.result.algorithm)).field(r.id).field(r.description);
      for (std::size_t f = 0; f < folds; ++f) {
        w.field(f < r.fold_values.size() ? std::optional<double>(r.fold_values[f]) : std::nullopt);
      }
      w.field(r.mean).field(r.failed ? 1 : 0).field(c == g.result.best && g.result.any_succeeded ? 1 : 0)
          .field(r.error);
      w.end_row();
    }
  }
  csv::write_file(path, w.str());
}

}  // namespace habtox::evaluate
