#include "habtox/cli.hpp"

#include <CLI11.hpp>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "habtox/consolidated.hpp"
#include "habtox/csv.hpp"
#include "habtox/error.hpp"
#include "habtox/evaluate.hpp"
#include "habtox/explain.hpp"
#include "habtox/ingest.hpp"
#include "habtox/models.hpp"
#include "habtox/parallel.hpp"
#include "habtox/preprocess.hpp"
#include "habtox/resample.hpp"
#include "habtox/rng.hpp"
#include "habtox/synth.hpp"

namespace habtox::cli {

namespace fs = std::filesystem;

namespace {

// Reads {"seed": 7, "evaluate": {"iters": 20}}: nested objects address
// subcommands, arrays become repeated values.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}\n"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(input);
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
    }
    std::vector<CLI::ConfigItem> items;
    collect(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void collect(const nlohmann::json& j, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto next = parents;
        next.push_back(key);
        collect(value, next, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }
};

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::SchemaMismatch:
    case ErrorKind::MissingFile:
    case ErrorKind::MalformedRow:
    case ErrorKind::ModelFormat:
    case ErrorKind::Io:
      return 2;
    case ErrorKind::EmptyDataset:
      return 3;
    default:
      return 1;
  }
}

int report_error(std::string_view kind, const std::string& message, int code) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  j["exit"] = code;
  std::cerr << j.dump() << '\n';
  return code;
}

struct Globals {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  fs::path out = ".";
};

LabeledData load_labeled(const fs::path& path, std::vector<ConsolidatedInstance>* rows = nullptr) {
  auto instances = read_consolidated(csv::read_file(path));
  LabeledData data = to_labeled(instances);
  if (data.size() == 0) throw Error(ErrorKind::EmptyDataset, path.string() + " has no complete labelled rows");
  if (rows) {
    rows->clear();
    for (auto& r : instances) {
      if (r.label && r.complete()) rows->push_back(std::move(r));
    }
  }
  return data;
}

evaluate::GridSpec grid_named(const std::string& name) {
  if (name == "default") return evaluate::GridSpec::defaults();
  if (name == "small") return evaluate::GridSpec::small();
  if (name == "reference") return evaluate::GridSpec::reference();
  throw Error(ErrorKind::InvalidArgument, "unknown grid '" + name + "' (default|small|reference)");
}

void write_key_values(const fs::path& path, const std::vector<std::pair<std::string, std::string>>& kv) {
  csv::Writer w({"key", "value"});
  for (const auto& [k, v] : kv) {
    w.field(k).field(v);
    w.end_row();
  }
  csv::write_file(path, w.str());
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  int years = 6;
  int start_year = 2012;
  double prevalence = 0.12;
};

void cmd_synth(const Globals& g, const SynthArgs& a) {
  synth::SynthConfig cfg;
  cfg.years = a.years;
  cfg.start_year = a.start_year;
  cfg.labels.prevalence = a.prevalence;
  const auto out = synth::generate(cfg, g.seed);
  synth::write_output(out, cfg, g.out);
  std::cout << "synth: " << out.truth.size() << " visits, " << out.tests << " tests, prevalence "
            << csv::format_double(out.realized_prevalence) << " -> " << g.out.string() << '\n';
}

struct InputArgs {
  fs::path input;
};

void cmd_ingest(const Globals& g, const InputArgs& a) {
  auto src = ingest::load_directory(a.input);
  const std::size_t total =
      src.phyto.records.size() + src.tox.size() + src.seawater.size() + src.meteo.size() + src.river.size();
  if (total == 0) throw Error(ErrorKind::EmptyDataset, "all input files are empty");
  const auto harmonized = ingest::harmonize(src.phyto);
  using ingest::Schema;
  write_key_values(g.out / "ingest_summary.csv",
                   {{std::string(ingest::file_name(Schema::phyto)), std::to_string(src.phyto.records.size())},
                    {std::string(ingest::file_name(Schema::tox)), std::to_string(src.tox.size())},
                    {std::string(ingest::file_name(Schema::seawater)), std::to_string(src.seawater.size())},
                    {std::string(ingest::file_name(Schema::meteo)), std::to_string(src.meteo.size())},
                    {std::string(ingest::file_name(Schema::river)), std::to_string(src.river.size())}});
  csv::write_file(g.out / "phyto_harmonized.csv", ingest::serialize(harmonized.records));
  std::cout << "ingest: " << total << " records validated\n";
}

struct PreprocessArgs {
  fs::path input;
  fs::path ranking;
  int tox_window = 30;
  int meteo_window = 20;
  int river_window = 30;
  int interp_window = 30;
  double limit = 176.0;
  std::string direction = "forward";
  bool scaled_knn = false;
  bool no_enn = false;
  std::size_t enn_k = 3;
};

void cmd_preprocess(const Globals& g, const PreprocessArgs& a) {
  const auto src = ingest::load_directory(a.input);
  preprocess::WindowConfig w;
  w.tox_match_days = a.tox_window;
  w.meteo_window_days = a.meteo_window;
  w.river_window_days = a.river_window;
  w.interp_days = a.interp_window;
  w.regulatory_limit = a.limit;
  if (a.direction == "forward") {
    w.match_direction = preprocess::MatchDirection::forward;
  } else if (a.direction == "backward") {
    w.match_direction = preprocess::MatchDirection::backward;
  } else {
    throw Error(ErrorKind::InvalidArgument, "--match-direction must be forward or backward");
  }
  const auto ranking = a.ranking.empty() ? preprocess::default_ranking(src.seawater)
                                         : synth::parse_ranking_json(csv::read_file(a.ranking));
  auto cons = preprocess::consolidate(src, w, ranking);
  if (cons.labeled.empty()) throw Error(ErrorKind::EmptyDataset, "no complete labelled instances after consolidation");

  std::vector<ConsolidatedInstance> kept = cons.labeled;
  std::size_t removed = 0;
  if (!a.no_enn) {
    auto clean = preprocess::clean_overlap(cons.labeled, a.enn_k, a.scaled_knn);
    kept = std::move(clean.kept);
    removed = clean.removed.size();
    for (const auto& r : clean.removed) cons.audit.drops.push_back({r.date, r.station, "enn_overlap"});
  }
  if (kept.empty()) throw Error(ErrorKind::EmptyDataset, "cleaning removed every instance");

  csv::write_file(g.out / "consolidated.csv", write_consolidated(kept));
  csv::write_file(g.out / "unlabeled.csv", write_consolidated(cons.unlabeled));
  preprocess::write_drops_audit(cons.audit, g.out / "drops_audit.csv");

  const LabeledData data = to_labeled(kept);
  csv::Writer pw({"date", "station", "label", "pc1", "pc2"});
  std::string proj_note;
  preprocess::Projection proj;
  if (data.size() >= 3) {
    proj = preprocess::project_2d(data.x);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      pw.field(kept[i].date.iso()).field(kept[i].station).field(*kept[i].label).field(proj.x[i]).field(proj.y[i]);
      pw.end_row();
    }
  }
  csv::write_file(g.out / "projection.csv", pw.str());

  const std::size_t pos = data.count(1);
  write_key_values(g.out / "preprocess_summary.csv",
                   {{"visits", std::to_string(cons.audit.visits)},
                    {"labeled_before_cleaning", std::to_string(cons.labeled.size())},
                    {"unlabeled", std::to_string(cons.unlabeled.size())},
                    {"dropped_missing", std::to_string(cons.audit.dropped_missing)},
                    {"interpolated_values", std::to_string(cons.audit.interpolated_values)},
                    {"reused_tests", std::to_string(cons.audit.reused_tests)},
                    {"invalid_tests", std::to_string(cons.audit.invalid_tests)},
                    {"enn_removed", std::to_string(removed)},
                    {"labeled", std::to_string(data.size())},
                    {"negative", std::to_string(data.size() - pos)},
                    {"positive", std::to_string(pos)},
                    {"projection_rank", std::to_string(proj.rank)},
                    {"projection_variance_pc1", csv::format_double(proj.explained_variance[0])},
                    {"projection_variance_pc2", csv::format_double(proj.explained_variance[1])},
                    {"projection_total_variance", csv::format_double(proj.total_variance)}});
  std::cout << "preprocess: " << data.size() << " labelled instances (" << data.size() - pos << " neg / " << pos
            << " pos), " << removed << " removed by ENN, " << cons.unlabeled.size() << " unlabelled\n";
}

struct DataArgs {
  fs::path data;
};

void cmd_describe(const Globals& g, const DataArgs& a) {
  const auto rows = read_consolidated(csv::read_file(a.data));
  const auto stats = ingest::describe(rows);
  ingest::write_report(stats, g.out);
  std::cout << "describe: " << rows.size() << " instances\n";
}

struct TrainArgs {
  fs::path data;
  std::string algo = "rf";
  std::string grid = "reference";
  std::string optimize = "f1";
  fs::path model_out;
};

void cmd_train(const Globals& g, const TrainArgs& a) {
  const LabeledData data = load_labeled(a.data);
  const auto algo = models::parse_algorithm(a.algo);
  const auto cells = grid_named(a.grid).cells(algo);
  if (cells.empty()) throw Error(ErrorKind::InvalidArgument, "grid has no cells for " + a.algo);
  std::size_t best = 0;
  double cv_value = std::numeric_limits<double>::quiet_NaN();
  evaluate::GridResult gr;
  if (cells.size() > 1) {
    evaluate::GridOptions opts;
    opts.objective = evaluate::parse_objective(a.optimize);
    opts.threads = g.threads;
    gr = evaluate::grid_search(data, algo, cells, derive_seed(g.seed, "train-grid"), opts);
    if (!gr.any_succeeded) throw Error(ErrorKind::InvalidArgument, "every grid cell failed: " + gr.results[0].error);
    best = gr.best;
    cv_value = gr.results[best].mean;
  }
  models::ModelConfig cfg = cells[best].model;
  if (auto* f = std::get_if<models::ForestConfig>(&cfg)) f->threads = g.threads;
  const LabeledData fit_set = evaluate::resample_train(data, cells[best].resampler, derive_seed(g.seed, "train"));
  const auto model = models::fit(fit_set, cfg, derive_seed(g.seed, "model"));
  const fs::path path = a.model_out.empty() ? g.out / (a.algo + ".model") : a.model_out;
  csv::write_file(path, models::save_model(model));

  const auto pred = models::predict(model, data.x);
  const auto m = evaluate::compute_metrics(data.y, pred);
  write_key_values(g.out / "train_summary.csv",
                   {{"algorithm", std::string(models::to_string(algo))},
                    {"config_id", cells[best].id},
                    {"config", cells[best].description()},
                    {"cv_value", csv::format_double(cv_value)},
                    {"rows", std::to_string(data.size())},
                    {"fit_rows", std::to_string(fit_set.size())},
                    {"train_precision", csv::format_double(m.precision)},
                    {"train_recall", csv::format_double(m.recall)},
                    {"train_f1", csv::format_double(m.f1)}});
  std::cout << "train: " << cells[best].description() << " -> " << path.string() << '\n';
}

struct EvaluateArgs {
  fs::path data;
  std::size_t iters = 100;
  std::vector<std::string> algos{"svm", "dt", "rf", "mlp"};
  std::string optimize = "f1";
  std::string grid = "default";
  bool fixed_split = false;
  double train_fraction = 0.70;
  std::size_t folds = 5;
};

void cmd_evaluate(const Globals& g, const EvaluateArgs& a) {
  const LabeledData data = load_labeled(a.data);
  evaluate::EvalOptions opts;
  opts.iterations = a.iters;
  opts.algorithms.clear();
  for (const auto& s : a.algos) opts.algorithms.push_back(models::parse_algorithm(s));
  opts.train_fraction = a.train_fraction;
  opts.fixed_split = a.fixed_split;
  opts.grid.folds = a.folds;
  opts.grid.objective = evaluate::parse_objective(a.optimize);
  opts.grid.threads = g.threads;
  const auto report = evaluate::repeated_eval(data, grid_named(a.grid), opts, g.seed);
  evaluate::write_eval_report(report, g.out / "eval_report.csv");
  evaluate::write_eval_summary(report, g.out / "eval_summary.csv");
  evaluate::write_pr_curves(report, g.out / "pr_curve.csv");
  evaluate::write_grid_table(report, g.out / "grid_table.csv");
  for (const auto& s : report.summaries) {
    std::cout << models::to_string(s.algorithm) << ": precision " << csv::format_double(s.precision_mean)
              << " recall " << csv::format_double(s.recall_mean) << " f1 " << csv::format_double(s.f1_mean)
              << '\n';
  }
}

struct ExplainArgs {
  fs::path data;
  fs::path model;
  std::vector<std::size_t> instances;
  std::string metric = "f1";
  std::string importance_on = "test";
  std::size_t repeats = 10;
  double train_fraction = 0.70;
};

void cmd_explain(const Globals& g, const ExplainArgs& a) {
  std::vector<ConsolidatedInstance> rows;
  const LabeledData data = load_labeled(a.data, &rows);
  const auto model = models::load_model(csv::read_file(a.model));
  if (models::n_features(model) != data.x.cols()) {
    throw Error(ErrorKind::ArityMismatch, "model and data disagree on the feature count");
  }
  if (a.importance_on != "test" && a.importance_on != "train") {
    throw Error(ErrorKind::InvalidArgument, "--importance-on must be test or train");
  }
  preprocess::SplitSpec spec;
  spec.train_fraction = a.train_fraction;
  spec.seed = derive_seed(g.seed, "explain-split");
  const auto split = preprocess::stratified_split(data.y, spec);
  const auto& ids = a.importance_on == "test" ? split.test : split.train;
  const LabeledData part = data.subset(ids);

  const auto names = default_feature_names(data.x.cols());
  const auto importance = explain::permutation_importance(model, part.x, part.y, explain::parse_metric(a.metric),
                                                          a.repeats, derive_seed(g.seed, "importance"), names,
                                                          g.threads);
  explain::write_importance(importance, g.out / "importance.csv");

  const auto algo = models::algorithm_of(model);
  if (algo != models::Algorithm::dt && algo != models::Algorithm::rf) {
    if (!a.instances.empty()) {
      throw Error(ErrorKind::InvalidArgument, "SHAP force records need a dt or rf model");
    }
    std::cout << "explain: importance written; SHAP applies to dt and rf models only\n";
    return;
  }
  auto explanations = explain::treeshap_all(model, part.x, g.threads);
  auto bees = explain::beeswarm_data(explanations, names);
  for (auto& r : bees) r.instance = ids[r.instance];
  explain::write_shap_values(bees, g.out / "shap_values.csv");

  for (std::size_t id : a.instances) {
    if (id >= data.size()) {
      throw Error(ErrorKind::InvalidArgument, "instance " + std::to_string(id) + " out of range (" +
                                                  std::to_string(data.size()) + " rows)");
    }
    const auto e = explain::treeshap(model, data.x.row(id));
    csv::write_file(g.out / ("force_" + std::to_string(id) + ".json"),
                    explain::force_json(explain::force_data(e, id, names)));
  }
  const models::TreeModel& tree =
      algo == models::Algorithm::dt ? std::get<models::TreeModel>(model) : std::get<models::ForestModel>(model).trees.front();
  csv::write_file(g.out / "tree.dot", explain::export_dot(tree, names));
  std::string rules;
  for (const auto& r : explain::extract_rules(tree, names)) rules += r.text() + "\n";
  csv::write_file(g.out / "rules.txt", rules);
  std::cout << "explain: " << explanations.size() << " explanations, " << a.instances.size() << " force records\n";
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Explainable prediction of DSP toxicity in mussels from monitoring data", "habtox"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file of option values; command-line flags take precedence");
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  std::string out_dir = ".";
  app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads; results do not depend on it")->capture_default_str();
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic monitoring dataset with known ground truth");
  synth->add_option("--years", synth_args.years, "Years of monitoring")->capture_default_str();
  synth->add_option("--start-year", synth_args.start_year, "First calendar year")->capture_default_str();
  synth->add_option("--prevalence", synth_args.prevalence, "Target share of positive tests")->capture_default_str();

  InputArgs ingest_args;
  auto* ingest = app.add_subcommand("ingest", "Validate the raw CSVs and write harmonized phytoplankton counts");
  ingest->add_option("input,--input", ingest_args.input, "Directory with the five raw CSVs")->required();

  PreprocessArgs pre;
  auto* preprocess = app.add_subcommand("preprocess", "Build consolidated.csv, audits and the 2-D projection");
  preprocess->add_option("input,--input", pre.input, "Directory with the five raw CSVs")->required();
  preprocess->add_option("--tox-window", pre.tox_window, "Days between sampling and a matched test")->capture_default_str();
  preprocess->add_option("--meteo-window", pre.meteo_window, "Days aggregated for meteorology")->capture_default_str();
  preprocess->add_option("--river-window", pre.river_window, "Days of river flow summed")->capture_default_str();
  preprocess->add_option("--interp-window", pre.interp_window, "Days searched for seawater donors")->capture_default_str();
  preprocess->add_option("--limit", pre.limit, "Regulatory limit in ug OA eq./kg")->capture_default_str();
  preprocess->add_option("--match-direction", pre.direction, "forward|backward")->capture_default_str();
  preprocess->add_option("--ranking", pre.ranking, "JSON map of station -> donor stations");
  preprocess->add_option("--enn-k", pre.enn_k, "Neighbours for overlap cleaning")->capture_default_str();
  preprocess->add_flag("--scaled-knn", pre.scaled_knn, "z-score features before neighbour searches");
  preprocess->add_flag("--no-enn", pre.no_enn, "Skip overlap cleaning");

  DataArgs describe_args;
  auto* describe = app.add_subcommand("describe", "Descriptive statistics of a consolidated dataset");
  describe->add_option("data,--data", describe_args.data, "consolidated.csv")->required();

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Fit one model on the whole dataset and save it");
  train->add_option("data,--data", train_args.data, "consolidated.csv")->required();
  train->add_option("--algo", train_args.algo, "dt|rf|svm|mlp")->capture_default_str();
  train->add_option("--grid", train_args.grid, "reference|small|default")->capture_default_str();
  train->add_option("--optimize", train_args.optimize, "f1|recall|precision")->capture_default_str();
  train->add_option("--model-out", train_args.model_out, "Model path (default <out>/<algo>.model)");

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "Repeated split / grid search / test evaluation");
  evaluate->add_option("data,--data", eval_args.data, "consolidated.csv")->required();
  evaluate->add_option("--iters", eval_args.iters, "Iterations")->capture_default_str();
  evaluate->add_option("--algos", eval_args.algos, "Comma-separated dt,rf,svm,mlp")->delimiter(',')->capture_default_str();
  evaluate->add_option("--optimize", eval_args.optimize, "Grid-search objective f1|recall|precision")->capture_default_str();
  evaluate->add_option("--grid", eval_args.grid, "default|small|reference")->capture_default_str();
  evaluate->add_flag("--fixed-split", eval_args.fixed_split, "Reuse one train/test split for every iteration");
  evaluate->add_option("--train-fraction", eval_args.train_fraction, "Training share of each split")->capture_default_str();
  evaluate->add_option("--folds", eval_args.folds, "Cross-validation folds")->capture_default_str();

  ExplainArgs explain_args;
  auto* explain = app.add_subcommand("explain", "Permutation importance, SHAP values, force records, tree.dot");
  explain->add_option("data,--data", explain_args.data, "consolidated.csv")->required();
  explain->add_option("--model", explain_args.model, "Saved model")->required();
  explain->add_option("--instances", explain_args.instances, "Row ids for force records")->delimiter(',');
  explain->add_option("--metric", explain_args.metric, "f1|accuracy|recall")->capture_default_str();
  explain->add_option("--importance-on", explain_args.importance_on, "test|train")->capture_default_str();
  explain->add_option("--repeats", explain_args.repeats, "Shuffles per feature")->capture_default_str();
  explain->add_option("--train-fraction", explain_args.train_fraction, "Training share of the split")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report_error("UsageError", e.what(), 1);
  }

  try {
    g.out = out_dir;
    fs::create_directories(g.out);
    set_default_threads(g.threads);
    if (*synth) cmd_synth(g, synth_args);
    if (*ingest) cmd_ingest(g, ingest_args);
    if (*preprocess) cmd_preprocess(g, pre);
    if (*describe) cmd_describe(g, describe_args);
    if (*train) cmd_train(g, train_args);
    if (*evaluate) cmd_evaluate(g, eval_args);
    if (*explain) cmd_explain(g, explain_args);
  } catch (const Error& e) {
    return report_error(to_string(e.kind()), e.what(), exit_code_for(e.kind()));
  } catch (const std::exception& e) {
    return report_error("Internal", e.what(), 1);
  }
  return 0;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace habtox::cli
