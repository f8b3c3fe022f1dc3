#include "habtox/models.hpp"

#include <json.hpp>
#include <sstream>

#include "habtox/error.hpp"

namespace habtox::models {

using nlohmann::json;

namespace {

constexpr std::string_view kFormat = "habtox-model";
constexpr int kVersion = 1;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

json opt(const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); }

std::optional<std::size_t> opt_size(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<std::size_t>();
}

Criterion parse_criterion(const std::string& s) {
  if (s == "gini") return Criterion::gini;
  if (s == "entropy") return Criterion::entropy;
  throw Error(ErrorKind::ModelFormat, "unknown criterion " + s);
}

ClassWeight parse_weight(const std::string& s) {
  if (s == "none") return ClassWeight::none;
  if (s == "balanced") return ClassWeight::balanced;
  throw Error(ErrorKind::ModelFormat, "unknown class_weight " + s);
}

KernelType parse_kernel(const std::string& s) {
  if (s == "rbf") return KernelType::rbf;
  if (s == "linear") return KernelType::linear;
  throw Error(ErrorKind::ModelFormat, "unknown kernel " + s);
}

json tree_config_json(const TreeConfig& c) {
  return {{"criterion", to_string(c.criterion)},
          {"max_depth", opt(c.max_depth)},
          {"class_weight", to_string(c.class_weight)},
          {"min_samples_split", c.min_samples_split},
          {"max_features", opt(c.max_features)}};
}

TreeConfig tree_config_from(const json& j) {
  TreeConfig c;
  c.criterion = parse_criterion(j.at("criterion").get<std::string>());
  c.max_depth = opt_size(j.at("max_depth"));
  c.class_weight = parse_weight(j.at("class_weight").get<std::string>());
  c.min_samples_split = j.at("min_samples_split").get<std::size_t>();
  c.max_features = opt_size(j.at("max_features"));
  return c;
}

json tree_nodes_json(const TreeModel& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes) {
    nodes.push_back({{"feature", n.feature},
                     {"threshold", n.threshold},
                     {"left", n.left},
                     {"right", n.right},
                     {"counts", {n.counts[0], n.counts[1]}},
                     {"value", n.value}});
  }
  return nodes;
}

TreeModel tree_from(const json& nodes, std::size_t n_features, const TreeConfig& cfg) {
  TreeModel t;
  t.n_features = n_features;
  t.config = cfg;
  for (const auto& jn : nodes) {
    TreeNode n;
    n.feature = jn.at("feature").get<int>();
    n.threshold = jn.at("threshold").get<double>();
    n.left = jn.at("left").get<int>();
    n.right = jn.at("right").get<int>();
    if (jn.contains("counts")) {
      n.counts = {jn.at("counts").at(0).get<double>(), jn.at("counts").at(1).get<double>()};
    }
    n.value = jn.at("value").get<double>();
    t.nodes.push_back(n);
  }
  const auto size = static_cast<int>(t.nodes.size());
  if (size == 0) throw Error(ErrorKind::ModelFormat, "tree without nodes");
  for (const auto& n : t.nodes) {
    if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || n.left >= size || n.right >= size ||
                         n.feature >= static_cast<int>(n_features))) {
      throw Error(ErrorKind::ModelFormat, "tree node references out of range");
    }
  }
  return t;
}

json matrix_json(const FeatureMatrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

FeatureMatrix matrix_from(const json& j, std::size_t cols) {
  FeatureMatrix m(0, cols);
  for (const auto& row : j) m.append_row(row.get<std::vector<double>>());
  return m;
}

}  // namespace

std::string_view to_string(Criterion c) { return c == Criterion::gini ? "gini" : "entropy"; }
std::string_view to_string(ClassWeight w) { return w == ClassWeight::none ? "none" : "balanced"; }
std::string_view to_string(KernelType k) { return k == KernelType::rbf ? "rbf" : "linear"; }

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::dt: return "dt";
    case Algorithm::rf: return "rf";
    case Algorithm::svm: return "svm";
    case Algorithm::mlp: return "mlp";
  }
  return "";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "dt") return Algorithm::dt;
  if (name == "rf") return Algorithm::rf;
  if (name == "svm") return Algorithm::svm;
  if (name == "mlp" || name == "ann") return Algorithm::mlp;
  throw Error(ErrorKind::InvalidArgument, "unknown algorithm '" + std::string(name) + "'");
}

Algorithm algorithm_of(const Model& model) { return static_cast<Algorithm>(model.index()); }
Algorithm algorithm_of(const ModelConfig& config) { return static_cast<Algorithm>(config.index()); }

std::size_t n_features(const Model& model) {
  return std::visit(overloaded{[](const TreeModel& m) { return m.n_features; },
                               [](const ForestModel& m) { return m.n_features; },
                               [](const SvmModel& m) { return m.support_vectors.cols(); },
                               [](const MlpModel& m) { return m.n_features; }},
                    model);
}

std::string describe(const ModelConfig& config) {
  auto depth = [](const std::optional<std::size_t>& d) { return d ? std::to_string(*d) : std::string("none"); };
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const TreeConfig& c) {
                   os << "criterion=" << to_string(c.criterion) << " max_depth=" << depth(c.max_depth)
                      << " class_weight=" << to_string(c.class_weight);
                 },
                 [&](const ForestConfig& c) {
                   os << "n_estimators=" << c.n_estimators << " criterion=" << to_string(c.criterion)
                      << " max_depth=" << depth(c.max_depth) << " class_weight=" << to_string(c.class_weight);
                 },
                 [&](const SvmConfig& c) {
                   os << "C=" << c.C << " kernel=" << to_string(c.kernel)
                      << " class_weight=" << to_string(c.class_weight);
                 },
                 [&](const MlpConfig& c) {
                   os << "hidden=" << c.hidden << " max_iter=" << c.max_iter;
                 }},
             config);
  return os.str();
}

Model fit(const LabeledData& train, const ModelConfig& config, std::uint64_t seed) {
  return std::visit(overloaded{[&](const TreeConfig& c) -> Model { return fit_tree(train, c, seed); },
                               [&](const ForestConfig& c) -> Model { return fit_forest(train, c, seed); },
                               [&](const SvmConfig& c) -> Model { return fit_svm(train, c); },
                               [&](const MlpConfig& c) -> Model { return fit_mlp(train, c, seed); }},
                    config);
}

double score(const Model& model, std::span<const double> x) {
  if (x.size() != n_features(model)) {
    throw Error(ErrorKind::ArityMismatch, "instance has " + std::to_string(x.size()) +
                                              " features, model expects " + std::to_string(n_features(model)));
  }
  return std::visit(overloaded{[&](const TreeModel& m) { return m.score(x); },
                               [&](const ForestModel& m) { return m.score(x); },
                               [&](const SvmModel& m) { return m.decision(x); },
                               [&](const MlpModel& m) { return m.score(x); }},
                    model);
}

std::vector<double> score(const Model& model, const FeatureMatrix& x) {
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = score(model, x.row(r));
  return out;
}

int label_from_score(Algorithm algorithm, double s) {
  return algorithm == Algorithm::svm ? (s > 0.0 ? 1 : 0) : (s > 0.5 ? 1 : 0);
}

std::vector<int> predict(const Model& model, const FeatureMatrix& x) {
  const Algorithm a = algorithm_of(model);
  std::vector<int> out;
  out.reserve(x.rows());
  for (double s : score(model, x)) out.push_back(label_from_score(a, s));
  return out;
}

std::string save_model(const Model& model) {
  json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["type"] = to_string(algorithm_of(model));
  j["n_features"] = n_features(model);
  std::visit(overloaded{
                 [&](const TreeModel& m) {
                   j["hyperparameters"] = tree_config_json(m.config);
                   j["parameters"] = {{"nodes", tree_nodes_json(m)}};
                 },
                 [&](const ForestModel& m) {
                   const auto& c = m.config;
                   j["hyperparameters"] = {{"n_estimators", c.n_estimators},
                                           {"criterion", to_string(c.criterion)},
                                           {"max_depth", opt(c.max_depth)},
                                           {"class_weight", to_string(c.class_weight)},
                                           {"min_samples_split", c.min_samples_split},
                                           {"max_features", opt(c.max_features)},
                                           {"bootstrap", c.bootstrap}};
                   json trees = json::array();
                   for (std::size_t t = 0; t < m.trees.size(); ++t) {
                     trees.push_back({{"seed", m.tree_seeds.empty() ? 0 : m.tree_seeds[t]},
                                      {"split", tree_config_json(m.trees[t].config)},
                                      {"nodes", tree_nodes_json(m.trees[t])}});
                   }
                   j["parameters"] = {{"trees", trees}};
                 },
                 [&](const SvmModel& m) {
                   j["hyperparameters"] = {{"C", m.C}, {"kernel", to_string(m.kernel)}, {"gamma", m.gamma}};
                   j["parameters"] = {{"support_vectors", matrix_json(m.support_vectors)},
                                      {"dual_coef", m.dual_coef},
                                      {"bias", m.bias},
                                      {"converged", m.converged},
                                      {"iterations", m.iterations}};
                 },
                 [&](const MlpModel& m) {
                   j["hyperparameters"] = {{"hidden", m.params.hidden}, {"activation", "relu"}, {"output", "sigmoid"}};
                   j["parameters"] = {{"input_columns", m.input_columns},
                                      {"mean", m.mean},
                                      {"scale", m.scale},
                                      {"w1", m.params.w1},
                                      {"b1", m.params.b1},
                                      {"w2", m.params.w2},
                                      {"b2", m.params.b2},
                                      {"epochs", m.epochs},
                                      {"converged", m.converged}};
                 }},
             model);
  return j.dump(1) + "\n";
}

Model load_model(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ModelFormat, std::string("model is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kFormat) throw Error(ErrorKind::ModelFormat, "not a habtox model");
    if (j.at("version").get<int>() != kVersion) {
      throw Error(ErrorKind::ModelFormat, "unsupported model version " + j.at("version").dump());
    }
    const Algorithm type = parse_algorithm(j.at("type").get<std::string>());
    const auto nf = j.at("n_features").get<std::size_t>();
    const json& hp = j.at("hyperparameters");
    const json& params = j.at("parameters");
    switch (type) {
      case Algorithm::dt:
        return tree_from(params.at("nodes"), nf, tree_config_from(hp));
      case Algorithm::rf: {
        ForestModel m;
        m.n_features = nf;
        m.config.n_estimators = hp.at("n_estimators").get<std::size_t>();
        m.config.criterion = parse_criterion(hp.at("criterion").get<std::string>());
        m.config.max_depth = opt_size(hp.at("max_depth"));
        m.config.class_weight = parse_weight(hp.at("class_weight").get<std::string>());
        m.config.min_samples_split = hp.at("min_samples_split").get<std::size_t>();
        m.config.max_features = opt_size(hp.at("max_features"));
        m.config.bootstrap = hp.at("bootstrap").get<bool>();
        for (const auto& t : params.at("trees")) {
          m.tree_seeds.push_back(t.at("seed").get<std::uint64_t>());
          m.trees.push_back(tree_from(t.at("nodes"), nf, tree_config_from(t.at("split"))));
        }
        if (m.trees.empty()) throw Error(ErrorKind::ModelFormat, "forest without trees");
        return m;
      }
      case Algorithm::svm: {
        SvmModel m;
        m.C = hp.at("C").get<double>();
        m.kernel = parse_kernel(hp.at("kernel").get<std::string>());
        m.gamma = hp.at("gamma").get<double>();
        m.support_vectors = matrix_from(params.at("support_vectors"), nf);
        m.dual_coef = params.at("dual_coef").get<std::vector<double>>();
        m.bias = params.at("bias").get<double>();
        m.converged = params.at("converged").get<bool>();
        m.iterations = params.at("iterations").get<std::size_t>();
        if (m.dual_coef.size() != m.support_vectors.rows()) {
          throw Error(ErrorKind::ModelFormat, "dual coefficients do not match support vectors");
        }
        return m;
      }
      case Algorithm::mlp: {
        MlpModel m;
        m.n_features = nf;
        m.input_columns = params.at("input_columns").get<std::vector<std::size_t>>();
        m.mean = params.at("mean").get<std::vector<double>>();
        m.scale = params.at("scale").get<std::vector<double>>();
        m.params.inputs = m.input_columns.size();
        m.params.hidden = hp.at("hidden").get<std::size_t>();
        m.params.w1 = params.at("w1").get<std::vector<double>>();
        m.params.b1 = params.at("b1").get<std::vector<double>>();
        m.params.w2 = params.at("w2").get<std::vector<double>>();
        m.params.b2 = params.at("b2").get<double>();
        m.epochs = params.at("epochs").get<std::size_t>();
        m.converged = params.at("converged").get<bool>();
        if (m.params.w1.size() != m.params.inputs * m.params.hidden || m.params.b1.size() != m.params.hidden ||
            m.params.w2.size() != m.params.hidden || m.mean.size() != m.params.inputs ||
            m.scale.size() != m.params.inputs) {
          throw Error(ErrorKind::ModelFormat, "MLP parameter shapes are inconsistent");
        }
        return m;
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ModelFormat, std::string("malformed model: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidArgument) throw Error(ErrorKind::ModelFormat, e.what());
    throw;
  }
  throw Error(ErrorKind::ModelFormat, "unknown model type");
}

}  // namespace habtox::models
