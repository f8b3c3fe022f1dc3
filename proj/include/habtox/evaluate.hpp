#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "habtox/dataset.hpp"
#include "habtox/models.hpp"
#include "habtox/resample.hpp"

namespace habtox::evaluate {

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
};

// 2PR/(P+R), 0 when P+R = 0.
double f1_score(double precision, double recall);
// Positive-class metrics; 0/0 ratios are 0.
Metrics compute_metrics(std::span<const int> y_true, std::span<const int> y_pred);

enum class Objective { f1, recall, precision };
std::string_view to_string(Objective o);
Objective parse_objective(std::string_view name);
double objective_value(const Metrics& m, Objective o);

// k disjoint validation folds covering [0, n). Each class is shuffled and
// dealt round-robin, continuing the fold cursor across classes, so every fold
// is within one row of the global class mix.
std::vector<std::vector<std::size_t>> stratified_kfold(std::span<const int> labels, std::size_t k,
                                                       std::uint64_t seed);

// One grid point: a model configuration plus the resampling applied to the
// training part before fitting.
struct GridCell {
  std::string id;
  models::ModelConfig model;
  resample::ResampleConfig resampler;

  std::string description() const;
};

struct GridSpec {
  std::vector<models::TreeConfig> dt;
  std::vector<models::ForestConfig> rf;
  std::vector<models::SvmConfig> svm;
  std::vector<models::MlpConfig> mlp;
  // Indexed by models::Algorithm.
  std::array<std::vector<resample::ResampleConfig>, 4> resamplers;

  static GridSpec defaults();
  // One or two values per axis, for desk-scale runs.
  static GridSpec small();
  // One winning configuration per algorithm from a full-grid run on monitoring data.
  static GridSpec reference();

  // Model-major enumeration: model configs in list order, resamplers inner.
  std::vector<GridCell> cells(models::Algorithm algo) const;
};

struct FoldScores {
  std::size_t fold = 0;
  std::vector<double> scores;
  std::vector<int> y;
};

struct CellResult {
  std::string id;
  std::string description;
  std::vector<double> fold_values;  // objective per fold
  double mean = -std::numeric_limits<double>::infinity();
  bool failed = false;
  std::string error;
  std::vector<FoldScores> validation;  // per-fold model scores on the held-out fold
};

struct GridResult {
  models::Algorithm algorithm = models::Algorithm::dt;
  std::vector<GridCell> cells;
  std::vector<CellResult> results;
  std::size_t best = 0;  // first cell with the highest mean
  bool any_succeeded = false;
};

struct GridOptions {
  std::size_t folds = 5;
  Objective objective = Objective::f1;
  std::size_t threads = 1;
};

// Training and validation data for one fold. Resampling touches the training
// part only; validation rows are the untouched originals.
std::pair<LabeledData, LabeledData> fold_data(const LabeledData& train,
                                              std::span<const std::size_t> validation_rows,
                                              const resample::ResampleConfig& resampler,
                                              std::uint64_t fold_seed);

// Resamples the whole of `train` (SMOTE then undersampling) under `seed`.
LabeledData resample_train(const LabeledData& train, const resample::ResampleConfig& resampler,
                           std::uint64_t seed);

// Resampling and model seeds depend on (seed, fold) only, so all cells see the
// same folds and draws. A cell whose fit throws on any fold scores -inf.
GridResult grid_search(const LabeledData& train, models::Algorithm algo,
                       std::span<const GridCell> cells, std::uint64_t seed,
                       const GridOptions& options = {});

struct PrPoint {
  double threshold = 0.0;
  double recall = 0.0;
  double precision = 0.0;
};

// Predict positive when score >= threshold, sweeping distinct scores from the
// top; the sweep stops at the first threshold reaching recall 1.
std::vector<PrPoint> pr_curve(std::span<const double> scores, std::span<const int> y_true);
// Precision at recall r: precision of the first sweep point with recall >= r.
double interpolated_precision(std::span<const PrPoint> curve, double recall);
// Mean interpolated precision on the recall grid 0, 0.01, ..., 1.
std::vector<std::pair<double, double>> average_pr(std::span<const std::vector<PrPoint>> curves);

struct EvalOptions {
  std::size_t iterations = 100;
  std::vector<models::Algorithm> algorithms{models::Algorithm::svm, models::Algorithm::dt,
                                            models::Algorithm::rf, models::Algorithm::mlp};
  double train_fraction = 0.70;
  bool fixed_split = false;
  GridOptions grid;
  bool keep_grid_tables = true;
};

struct IterationResult {
  std::size_t iteration = 0;
  models::Algorithm algorithm = models::Algorithm::dt;
  Metrics metrics;
  std::string cell_id;
  std::string config;
  double cv_value = 0.0;
};

struct Summary {
  models::Algorithm algorithm = models::Algorithm::dt;
  std::size_t iterations = 0;
  double precision_mean = 0.0, precision_std = 0.0;
  double recall_mean = 0.0, recall_std = 0.0;
  double f1_mean = 0.0, f1_std = 0.0;
  double f1_of_means = 0.0;
};

struct CurveRecord {
  models::Algorithm algorithm = models::Algorithm::dt;
  std::size_t iteration = 0;
  std::size_t fold = 0;
  std::vector<PrPoint> curve;
};

struct GridRecord {
  std::size_t iteration = 0;
  GridResult result;
};

struct EvalReport {
  std::vector<IterationResult> iterations;
  std::vector<Summary> summaries;
  std::vector<CurveRecord> curves;  // validation folds of each winning cell
  std::vector<GridRecord> grids;
};

// Per iteration i (seed derive_seed(seed, "iteration", i)): stratified split,
// grid search per algorithm on the training part, refit of the winner on the
// resampled training part, one evaluation on the test part. Std is the
// population std over iterations.
EvalReport repeated_eval(const LabeledData& data, const GridSpec& grid, const EvalOptions& options,
                         std::uint64_t seed);

std::vector<Summary> summarize(std::span<const IterationResult> rows,
                               std::span<const models::Algorithm> algorithms);

void write_eval_report(const EvalReport& report, const std::filesystem::path& path);
void write_eval_summary(const EvalReport& report, const std::filesystem::path& path);
void write_pr_curves(const EvalReport& report, const std::filesystem::path& path);
void write_grid_table(const EvalReport& report, const std::filesystem::path& path);

}  // namespace habtox::evaluate
