#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "habtox/dataset.hpp"

namespace habtox::models {

enum class Criterion { gini, entropy };
enum class ClassWeight { none, balanced };
enum class Algorithm { dt, rf, svm, mlp };
enum class KernelType { rbf, linear };

std::string_view to_string(Criterion c);
std::string_view to_string(ClassWeight w);
std::string_view to_string(Algorithm a);
std::string_view to_string(KernelType k);
Algorithm parse_algorithm(std::string_view name);

// gini = 1 - sum p^2; entropy = -sum p log2 p (0 log 0 = 0).
double impurity(std::span<const double> counts, Criterion criterion);

// balanced: weight_c = n / (2 n_c); none: 1.
std::array<double, 2> class_weights(std::span<const int> y, ClassWeight mode);

// ---------------------------------------------------------------------------
// CART

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // rows with x[feature] <= threshold go left
  int left = -1;
  int right = -1;
  std::array<double, 2> counts{};  // training rows reaching the node, per class
  double value = 0.0;              // (class-weighted) positive fraction

  bool is_leaf() const { return feature < 0; }
  double cover() const { return counts[0] + counts[1]; }
};

struct TreeConfig {
  Criterion criterion = Criterion::gini;
  std::optional<std::size_t> max_depth;     // nullopt = grow until pure
  ClassWeight class_weight = ClassWeight::none;
  std::size_t min_samples_split = 2;
  std::optional<std::size_t> max_features;  // features tried per split; nullopt = all
};

struct TreeModel {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::size_t n_features = 0;
  TreeConfig config;

  std::size_t depth() const;
  std::size_t leaf_of(std::span<const double> x) const;
  double score(std::span<const double> x) const { return nodes[leaf_of(x)].value; }
};

// Greedy recursive partitioning. Candidate thresholds are midpoints between
// consecutive distinct values; the best weighted impurity decrease wins, ties
// going to the lower feature index and then the lower threshold. The seed only
// matters when max_features restricts the per-split candidates.
TreeModel fit_tree(const LabeledData& train, const TreeConfig& config, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Random forest

struct ForestConfig {
  std::size_t n_estimators = 300;
  Criterion criterion = Criterion::gini;
  std::optional<std::size_t> max_depth;
  ClassWeight class_weight = ClassWeight::none;
  std::size_t min_samples_split = 2;
  std::optional<std::size_t> max_features;  // nullopt = floor(sqrt(n_features))
  bool bootstrap = true;
  std::size_t threads = 1;  // does not affect the result
};

struct ForestModel {
  std::vector<TreeModel> trees;
  std::vector<std::uint64_t> tree_seeds;
  std::size_t n_features = 0;
  ForestConfig config;

  double score(std::span<const double> x) const;
};

// Tree t is grown from derive_seed(seed, "tree", t): bootstrap draws first,
// then per-split feature sampling.
ForestModel fit_forest(const LabeledData& train, const ForestConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Soft-margin SVM (SMO)

struct SvmConfig {
  double C = 100.0;
  KernelType kernel = KernelType::rbf;
  std::optional<double> gamma;  // nullopt = 1 / (n_features * mean feature variance)
  double tol = 1e-3;
  std::size_t max_iter = 100000;
  ClassWeight class_weight = ClassWeight::none;
};

struct SvmModel {
  FeatureMatrix support_vectors;
  std::vector<double> dual_coef;  // alpha_i * y_i with y in {-1, +1}
  double bias = 0.0;              // f(x) = sum dual_coef K(sv, x) + bias
  KernelType kernel = KernelType::rbf;
  double gamma = 1.0;
  double C = 100.0;
  bool converged = true;
  std::size_t iterations = 0;

  double kernel_value(std::span<const double> a, std::span<const double> b) const;
  double decision(std::span<const double> x) const;
};

struct SvmFit {
  SvmModel model;
  std::vector<double> alpha;        // one per training row
  std::vector<double> upper_bound;  // per-row C (after class weighting)
  double max_violation = 0.0;       // m(alpha) - M(alpha) at exit
};

SvmFit fit_svm_detailed(const LabeledData& train, const SvmConfig& config);
SvmModel fit_svm(const LabeledData& train, const SvmConfig& config);

// ---------------------------------------------------------------------------
// Shallow MLP: z-score -> dense(hidden, relu) -> dense(1, sigmoid)

struct MlpConfig {
  std::size_t hidden = 3;
  std::size_t max_iter = 5000;           // epochs
  std::optional<std::size_t> batch_size;  // nullopt = min(200, n)
  double learning_rate = 1e-3;
  double l2 = 1e-4;
  double tol = 1e-4;
  std::size_t n_iter_no_change = 10;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Column left out of the network input (the month); nullopt keeps all.
  std::optional<std::size_t> excluded_column = index_of(Feature::month);
};

// Network weights; w1 is hidden x inputs row-major.
struct MlpParams {
  std::size_t inputs = 0;
  std::size_t hidden = 0;
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  double b2 = 0.0;

  std::size_t size() const { return w1.size() + b1.size() + w2.size() + 1; }
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);
  double forward(std::span<const double> scaled_x) const;  // sigmoid output
};

// Mean binary cross-entropy plus l2/(2n) * ||weights||^2 (biases excluded),
// over already-scaled inputs.
double mlp_loss(const MlpParams& params, const FeatureMatrix& scaled_x, std::span<const int> y,
                double l2);
// Gradient of mlp_loss in flatten() order.
std::vector<double> mlp_gradient(const MlpParams& params, const FeatureMatrix& scaled_x,
                                 std::span<const int> y, double l2);

struct MlpModel {
  std::vector<std::size_t> input_columns;
  std::vector<double> mean;
  std::vector<double> scale;
  MlpParams params;
  std::size_t n_features = 0;
  std::size_t epochs = 0;
  bool converged = false;
  std::vector<double> loss_curve;

  std::vector<double> transform(std::span<const double> x) const;
  double score(std::span<const double> x) const;
};

MlpModel fit_mlp(const LabeledData& train, const MlpConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Common contract

using Model = std::variant<TreeModel, ForestModel, SvmModel, MlpModel>;
using ModelConfig = std::variant<TreeConfig, ForestConfig, SvmConfig, MlpConfig>;

Algorithm algorithm_of(const Model& model);
Algorithm algorithm_of(const ModelConfig& config);
std::size_t n_features(const Model& model);
std::string describe(const ModelConfig& config);

Model fit(const LabeledData& train, const ModelConfig& config, std::uint64_t seed);

// Positive-class probability (dt, rf, mlp) or signed margin (svm).
double score(const Model& model, std::span<const double> x);
std::vector<double> score(const Model& model, const FeatureMatrix& x);
// Probability models: score > 0.5; svm: margin > 0. Ties predict 0.
int label_from_score(Algorithm algorithm, double score);
std::vector<int> predict(const Model& model, const FeatureMatrix& x);

// Versioned JSON text: {"format", "version", "type", "hyperparameters", "parameters"}.
// Doubles are written with round-trip precision.
std::string save_model(const Model& model);
Model load_model(std::string_view text);

}  // namespace habtox::models
