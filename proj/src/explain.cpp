#include "habtox/explain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "habtox/csv.hpp"
#include "habtox/error.hpp"
#include "habtox/evaluate.hpp"
#include "habtox/parallel.hpp"
#include "habtox/rng.hpp"

namespace habtox::explain {

using models::ForestModel;
using models::TreeModel;
using models::TreeNode;

namespace {

std::vector<std::string> resolve_names(std::span<const std::string> names, std::size_t cols) {
  if (names.empty()) return default_feature_names(cols);
  if (names.size() != cols) {
    throw Error(ErrorKind::ArityMismatch, "expected " + std::to_string(cols) + " feature names, got " +
                                              std::to_string(names.size()));
  }
  return {names.begin(), names.end()};
}

void check_arity(const TreeModel& tree, std::span<const double> x) {
  if (x.size() != tree.n_features) {
    throw Error(ErrorKind::ArityMismatch, "instance has " + std::to_string(x.size()) +
                                              " features, tree expects " + std::to_string(tree.n_features));
  }
}

void check_covers(const TreeModel& tree) {
  if (tree.nodes.empty()) throw Error(ErrorKind::MissingCovers, "tree has no nodes");
  for (const auto& n : tree.nodes) {
    if (!(n.cover() > 0.0)) throw Error(ErrorKind::MissingCovers, "tree node without cover");
  }
}

const TreeNode& node(const TreeModel& t, int id) { return t.nodes[static_cast<std::size_t>(id)]; }

// Path state of the polynomial-time algorithm: for each unique feature on the
// current path, the fraction of zero paths (z) and one paths (o) flowing
// through, plus the permutation weights w.
struct PathElement {
  int feature;
  double zero;
  double one;
  double weight;
};

void extend_path(std::vector<PathElement>& m, double pz, double po, int feature) {
  const std::size_t l = m.size();
  m.push_back({feature, pz, po, l == 0 ? 1.0 : 0.0});
  const double denom = static_cast<double>(l + 1);
  for (std::size_t i = l; i-- > 0;) {
    m[i + 1].weight += po * m[i].weight * static_cast<double>(i + 1) / denom;
    m[i].weight = pz * m[i].weight * static_cast<double>(l - i) / denom;
  }
}

void unwind_path(std::vector<PathElement>& m, std::size_t i) {
  const std::size_t l = m.size() - 1;
  const double one = m[i].one;
  const double zero = m[i].zero;
  const double denom = static_cast<double>(l + 1);
  double next = m[l].weight;
  for (std::size_t j = l; j-- > 0;) {
    if (one != 0.0) {
      const double tmp = m[j].weight;
      m[j].weight = next * denom / (static_cast<double>(j + 1) * one);
      next = tmp - m[j].weight * zero * static_cast<double>(l - j) / denom;
    } else {
      m[j].weight = m[j].weight * denom / (zero * static_cast<double>(l - j));
    }
  }
  for (std::size_t j = i; j < l; ++j) {
    m[j].feature = m[j + 1].feature;
    m[j].zero = m[j + 1].zero;
    m[j].one = m[j + 1].one;
  }
  m.pop_back();
}

double unwound_sum(const std::vector<PathElement>& m, std::size_t i) {
  const std::size_t l = m.size() - 1;
  const double one = m[i].one;
  const double zero = m[i].zero;
  const double denom = static_cast<double>(l + 1);
  double total = 0.0;
  if (one != 0.0) {
    double next = m[l].weight;
    for (std::size_t j = l; j-- > 0;) {
      const double tmp = next * denom / (static_cast<double>(j + 1) * one);
      total += tmp;
      next = m[j].weight - tmp * zero * static_cast<double>(l - j) / denom;
    }
  } else {
    for (std::size_t j = l; j-- > 0;) {
      total += m[j].weight * denom / (zero * static_cast<double>(l - j));
    }
  }
  return total;
}

void recurse(const TreeModel& t, std::span<const double> x, std::vector<double>& phi, int id,
             std::vector<PathElement> m, double pz, double po, int feature) {
  extend_path(m, pz, po, feature);
  const TreeNode& n = node(t, id);
  if (n.is_leaf()) {
    for (std::size_t i = 1; i < m.size(); ++i) {
      const double w = unwound_sum(m, i);
      phi[static_cast<std::size_t>(m[i].feature)] += w * (m[i].one - m[i].zero) * n.value;
    }
    return;
  }
  const bool left_hot = x[static_cast<std::size_t>(n.feature)] <= n.threshold;
  const int hot = left_hot ? n.left : n.right;
  const int cold = left_hot ? n.right : n.left;
  double iz = 1.0;
  double io = 1.0;
  for (std::size_t k = 1; k < m.size(); ++k) {
    if (m[k].feature == n.feature) {
      iz = m[k].zero;
      io = m[k].one;
      unwind_path(m, k);
      break;
    }
  }
  const double cover = n.cover();
  recurse(t, x, phi, hot, m, iz * node(t, hot).cover() / cover, io, n.feature);
  const double cold_cover = node(t, cold).cover();
  if (cold_cover > 0.0) recurse(t, x, phi, cold, m, iz * cold_cover / cover, 0.0, n.feature);
}

double v_of(const TreeModel& t, std::span<const double> x, std::uint32_t mask, int id) {
  const TreeNode& n = node(t, id);
  if (n.is_leaf()) return n.value;
  if (mask & (1u << static_cast<unsigned>(n.feature))) {
    return v_of(t, x, mask, x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  const double l = node(t, n.left).cover();
  const double r = node(t, n.right).cover();
  return (l * v_of(t, x, mask, n.left) + r * v_of(t, x, mask, n.right)) / n.cover();
}

std::string format_number(double v) { return csv::format_double(v); }

}  // namespace

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::f1: return "f1";
    case Metric::accuracy: return "accuracy";
    case Metric::recall: return "recall";
  }
  return "";
}

Metric parse_metric(std::string_view name) {
  if (name == "f1") return Metric::f1;
  if (name == "accuracy") return Metric::accuracy;
  if (name == "recall") return Metric::recall;
  throw Error(ErrorKind::InvalidArgument, "unknown metric '" + std::string(name) + "'");
}

double metric_value(Metric m, std::span<const int> y_true, std::span<const int> y_pred) {
  const auto r = evaluate::compute_metrics(y_true, y_pred);
  switch (m) {
    case Metric::f1: return r.f1;
    case Metric::accuracy: return r.accuracy;
    case Metric::recall: return r.recall;
  }
  return r.f1;
}

ImportanceReport permutation_importance(const models::Model& model, const FeatureMatrix& x,
                                        std::span<const int> y, Metric metric, std::size_t n_repeats,
                                        std::uint64_t seed, std::span<const std::string> names,
                                        std::size_t threads) {
  if (x.rows() != y.size()) throw Error(ErrorKind::LengthMismatch, "feature rows and labels differ in length");
  if (n_repeats == 0) throw Error(ErrorKind::InvalidArgument, "n_repeats must be positive");
  const auto labels = resolve_names(names, x.cols());
  ImportanceReport report;
  report.baseline = metric_value(metric, y, models::predict(model, x));
  report.features.resize(x.cols());
  parallel_for(x.cols(), threads, [&](std::size_t j) {
    FeatureImportance& fi = report.features[j];
    fi.feature = j;
    fi.name = labels[j];
    FeatureMatrix shuffled = x;
    const std::vector<double> original = x.column(j);
    const std::uint64_t feature_seed = derive_seed(seed, "permute", j);
    for (std::size_t r = 0; r < n_repeats; ++r) {
      std::vector<double> col = original;
      Rng rng(derive_seed(feature_seed, "repeat", r));
      rng.shuffle(col);
      for (std::size_t i = 0; i < x.rows(); ++i) shuffled(i, j) = col[i];
      fi.samples.push_back(report.baseline - metric_value(metric, y, models::predict(model, shuffled)));
    }
    fi.mean = std::accumulate(fi.samples.begin(), fi.samples.end(), 0.0) / static_cast<double>(n_repeats);
    double acc = 0.0;
    for (double s : fi.samples) acc += (s - fi.mean) * (s - fi.mean);
    fi.std = std::sqrt(acc / static_cast<double>(n_repeats));
  });
  std::ranges::stable_sort(report.features, [](const auto& a, const auto& b) { return a.mean > b.mean; });
  return report;
}

double local_accuracy_gap(const Explanation& e) {
  const double total = std::accumulate(e.phi.begin(), e.phi.end(), e.base);
  return std::abs(total - e.output);
}

double expected_value(const TreeModel& tree) {
  check_covers(tree);
  double acc = 0.0;
  for (const auto& n : tree.nodes) {
    if (n.is_leaf()) acc += n.cover() * n.value;
  }
  return acc / tree.nodes.front().cover();
}

double expected_value(const ForestModel& forest) {
  if (forest.trees.empty()) throw Error(ErrorKind::MissingCovers, "forest has no trees");
  double acc = 0.0;
  for (const auto& t : forest.trees) acc += expected_value(t);
  return acc / static_cast<double>(forest.trees.size());
}

Explanation treeshap(const TreeModel& tree, std::span<const double> x) {
  check_arity(tree, x);
  check_covers(tree);
  Explanation e;
  e.phi.assign(tree.n_features, 0.0);
  e.base = expected_value(tree);
  e.output = tree.score(x);
  e.x.assign(x.begin(), x.end());
  if (!tree.nodes.front().is_leaf()) {
    std::vector<PathElement> path;
    path.reserve(tree.depth() + 2);
    recurse(tree, x, e.phi, 0, std::move(path), 1.0, 1.0, -1);
  }
  return e;
}

Explanation treeshap(const ForestModel& forest, std::span<const double> x) {
  if (forest.trees.empty()) throw Error(ErrorKind::MissingCovers, "forest has no trees");
  if (x.size() != forest.n_features) {
    throw Error(ErrorKind::ArityMismatch, "instance has " + std::to_string(x.size()) +
                                              " features, forest expects " + std::to_string(forest.n_features));
  }
  Explanation e;
  e.phi.assign(forest.n_features, 0.0);
  e.x.assign(x.begin(), x.end());
  for (const auto& t : forest.trees) {
    const Explanation te = treeshap(t, x);
    for (std::size_t j = 0; j < e.phi.size(); ++j) e.phi[j] += te.phi[j];
    e.base += te.base;
  }
  const double n = static_cast<double>(forest.trees.size());
  for (double& p : e.phi) p /= n;
  e.base /= n;
  e.output = forest.score(x);
  return e;
}

Explanation treeshap(const models::Model& model, std::span<const double> x) {
  if (const auto* t = std::get_if<TreeModel>(&model)) return treeshap(*t, x);
  if (const auto* f = std::get_if<ForestModel>(&model)) return treeshap(*f, x);
  throw Error(ErrorKind::InvalidArgument, "SHAP values are available for dt and rf models only");
}

std::vector<Explanation> treeshap_all(const models::Model& model, const FeatureMatrix& x, std::size_t threads) {
  std::vector<Explanation> out(x.rows());
  parallel_for(x.rows(), threads, [&](std::size_t i) { out[i] = treeshap(model, x.row(i)); });
  return out;
}

double conditional_expectation(const TreeModel& tree, std::span<const double> x, std::uint32_t mask) {
  check_arity(tree, x);
  check_covers(tree);
  return v_of(tree, x, mask, 0);
}

Explanation shap_bruteforce(const TreeModel& tree, std::span<const double> x) {
  const std::size_t d = tree.n_features;
  if (d > 15) {
    throw Error(ErrorKind::TooManyFeatures, "subset enumeration supports at most 15 features, tree has " +
                                                std::to_string(d));
  }
  check_arity(tree, x);
  check_covers(tree);
  std::vector<double> fact(d + 1, 1.0);
  for (std::size_t i = 1; i <= d; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);
  const std::uint32_t full = (1u << d);
  std::vector<double> v(full);
  for (std::uint32_t s = 0; s < full; ++s) v[s] = v_of(tree, x, s, 0);

  Explanation e;
  e.phi.assign(d, 0.0);
  e.base = v[0];
  e.output = tree.score(x);
  e.x.assign(x.begin(), x.end());
  for (std::size_t j = 0; j < d; ++j) {
    const std::uint32_t bit = 1u << j;
    double acc = 0.0;
    for (std::uint32_t s = 0; s < full; ++s) {
      if (s & bit) continue;
      const auto size = static_cast<std::size_t>(std::popcount(s));
      acc += fact[size] * fact[d - size - 1] / fact[d] * (v[s | bit] - v[s]);
    }
    e.phi[j] = acc;
  }
  return e;
}

bool Rule::matches(std::span<const double> x) const {
  for (const auto& c : conditions) {
    const double v = x[c.feature];
    if (c.greater ? !(v > c.threshold) : !(v <= c.threshold)) return false;
  }
  return true;
}

std::string Rule::text() const {
  std::ostringstream os;
  if (conditions.empty()) os << "always";
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    if (i) os << " and ";
    os << conditions[i].name << (conditions[i].greater ? " > " : " <= ") << format_number(conditions[i].threshold);
  }
  os << " => " << prediction << " (neg=" << format_number(counts[0]) << ", pos=" << format_number(counts[1])
     << ")";
  return os.str();
}

std::vector<Rule> extract_rules(const TreeModel& tree, std::span<const std::string> names) {
  const auto labels = resolve_names(names, tree.n_features);
  std::vector<Rule> rules;
  std::vector<Condition> path;
  auto walk = [&](auto&& self, int id) -> void {
    const TreeNode& n = node(tree, id);
    if (n.is_leaf()) {
      Rule r;
      r.conditions = path;
      r.prediction = n.value > 0.5 ? "pos" : "neg";
      r.counts = n.counts;
      r.value = n.value;
      r.leaf = static_cast<std::size_t>(id);
      rules.push_back(std::move(r));
      return;
    }
    const auto f = static_cast<std::size_t>(n.feature);
    path.push_back({f, labels[f], false, n.threshold});
    self(self, n.left);
    path.back().greater = true;
    self(self, n.right);
    path.pop_back();
  };
  walk(walk, 0);
  return rules;
}

std::string export_dot(const TreeModel& tree, std::span<const std::string> names) {
  const auto labels = resolve_names(names, tree.n_features);
  auto escape = [](const std::string& s) {
    std::string out;
    for (char c : s) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    return out;
  };
  std::ostringstream os;
  os << "digraph tree {\n  node [shape=box, fontname=\"Helvetica\"];\n";
  for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
    const TreeNode& n = tree.nodes[id];
    os << "  n" << id << " [label=\"";
    if (!n.is_leaf()) {
      os << escape(labels[static_cast<std::size_t>(n.feature)]) << " <= " << format_number(n.threshold) << "\\n";
    }
    os << "samples = " << format_number(n.cover()) << "\\nneg = " << format_number(n.counts[0])
       << ", pos = " << format_number(n.counts[1]);
    if (n.is_leaf()) {
      os << "\\nclass = " << (n.value > 0.5 ? "pos" : "neg") << "\", style=rounded";
    } else {
      os << '"';
    }
    os << "];\n";
  }
  for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
    const TreeNode& n = tree.nodes[id];
    if (n.is_leaf()) continue;
    os << "  n" << id << " -> n" << n.left << " [label=\"yes\"];\n";
    os << "  n" << id << " -> n" << n.right << " [label=\"no\"];\n";
  }
  os << "}\n";
  return os.str();
}

std::vector<std::size_t> shap_ranking(std::span<const Explanation> explanations) {
  if (explanations.empty()) throw Error(ErrorKind::EmptyDataset, "no explanations");
  const std::size_t d = explanations.front().phi.size();
  std::vector<double> mean_abs(d, 0.0);
  for (const auto& e : explanations) {
    if (e.phi.size() != d) throw Error(ErrorKind::ArityMismatch, "explanations differ in feature count");
    for (std::size_t j = 0; j < d; ++j) mean_abs[j] += std::abs(e.phi[j]);
  }
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return mean_abs[a] > mean_abs[b]; });
  return order;
}

std::vector<BeeswarmRow> beeswarm_data(std::span<const Explanation> explanations,
                                       std::span<const std::string> names) {
  const auto order = shap_ranking(explanations);
  const auto labels = resolve_names(names, order.size());
  std::vector<BeeswarmRow> rows;
  rows.reserve(order.size() * explanations.size());
  for (std::size_t j : order) {
    for (std::size_t i = 0; i < explanations.size(); ++i) {
      rows.push_back({i, j, labels[j], explanations[i].x.at(j), explanations[i].phi[j]});
    }
  }
  return rows;
}

ForceRecord force_data(const Explanation& e, std::size_t instance, std::span<const std::string> names) {
  const auto labels = resolve_names(names, e.phi.size());
  ForceRecord r;
  r.instance = instance;
  r.base = e.base;
  r.output = e.output;
  r.predicted_label = e.output > 0.5 ? 1 : 0;
  for (std::size_t j = 0; j < e.phi.size(); ++j) {
    r.contributions.push_back({j, labels[j], e.x.at(j), e.phi[j]});
  }
  std::ranges::stable_sort(r.contributions,
                           [](const auto& a, const auto& b) { return std::abs(a.phi) > std::abs(b.phi); });
  return r;
}

std::string force_json(const ForceRecord& record) {
  nlohmann::ordered_json j;
  j["instance"] = record.instance;
  j["base_value"] = record.base;
  j["output"] = record.output;
  j["predicted_label"] = record.predicted_label;
  auto contributions = nlohmann::ordered_json::array();
  for (const auto& c : record.contributions) {
    contributions.push_back({{"feature", c.name}, {"value", c.value}, {"phi", c.phi}});
  }
  j["contributions"] = std::move(contributions);
  return j.dump(1) + "\n";
}

void write_importance(const ImportanceReport& report, const std::filesystem::path& path) {
  csv::Writer w({"feature", "mean", "std"});
  for (const auto& f : report.features) {
    w.field(f.name).field(f.mean).field(f.std);
    w.end_row();
  }
  csv::write_file(path, w.str());
}

void write_shap_values(std::span<const BeeswarmRow> rows, const std::filesystem::path& path) {
  csv::Writer w({"instance", "feature", "value", "phi"});
  for (const auto& r : rows) {
    w.field(r.instance).field(r.name).field(r.value).field(r.phi);
    w.end_row();
  }
  csv::write_file(path, w.str());
}

}  // namespace habtox::explain
