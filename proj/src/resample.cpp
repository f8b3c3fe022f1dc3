#include "habtox/resample.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "habtox/error.hpp"
#include "habtox/kernels.hpp"
#include "habtox/rng.hpp"

namespace habtox::resample {
namespace {

struct Candidate {
  double dist;
  std::size_t index;
  bool operator<(const Candidate& o) const {
    return dist < o.dist || (dist == o.dist && index < o.index);
  }
};

std::vector<std::size_t> nearest_among(const FeatureMatrix& points, std::size_t query,
                                       std::span<const std::size_t> candidates, std::size_t k) {
  std::vector<Candidate> c;
  c.reserve(candidates.size());
  const auto q = points.row(query);
  for (std::size_t idx : candidates) {
    if (idx == query) continue;
    c.push_back({kernels::squared_distance(points.row(idx), q), idx});
  }
  if (c.size() < k) {
    throw Error(ErrorKind::TooFewNeighbors, "need " + std::to_string(k) + " neighbours, have " +
                                                std::to_string(c.size()));
  }
  std::partial_sort(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(k), c.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = c[i].index;
  return out;
}

std::vector<std::size_t> rows_with_label(std::span<const int> y, int label) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == label) out.push_back(i);
  }
  return out;
}

}  // namespace

void ResampleConfig::validate() const {
  if (smote_k < 1) throw Error(ErrorKind::InvalidArgument, "smote_k must be >= 1");
  if (!(smote_strategy > 0.0 && smote_strategy <= 1.0) ||
      !(under_strategy > 0.0 && under_strategy <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "sampling strategies must lie in (0, 1]");
  }
}

std::size_t round_count(double value) {
  // std::round rounds halfway cases away from zero.
  return static_cast<std::size_t>(std::round(value));
}

std::vector<std::size_t> knn(const FeatureMatrix& points, std::size_t query, std::size_t k,
                             std::span<const int> labels, std::optional<int> scope) {
  if (query >= points.rows()) throw Error(ErrorKind::InvalidArgument, "query row out of range");
  std::vector<std::size_t> candidates;
  if (scope) {
    if (labels.size() != points.rows()) {
      throw Error(ErrorKind::LengthMismatch, "labels must match points");
    }
    candidates = rows_with_label(labels, *scope);
  } else {
    candidates.resize(points.rows());
    std::iota(candidates.begin(), candidates.end(), std::size_t{0});
  }
  return nearest_among(points, query, candidates, k);
}

FeatureMatrix zscore(const FeatureMatrix& x) {
  FeatureMatrix out = x;
  const double n = static_cast<double>(x.rows());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) mean += x(r, c);
    mean /= n;
    double var = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) var += (x(r, c) - mean) * (x(r, c) - mean);
    double sd = std::sqrt(var / n);
    if (!(sd > 0.0)) sd = 1.0;
    for (std::size_t r = 0; r < x.rows(); ++r) out(r, c) = (x(r, c) - mean) / sd;
  }
  return out;
}

SmoteResult smote_detailed(const LabeledData& train, std::size_t k, double strategy,
                           std::uint64_t seed, bool scaled_knn) {
  train.validate();
  SmoteResult result{train, {}};
  if (result.data.origin.empty()) result.data.origin.assign(train.size(), RowOrigin::original);
  const auto minority = rows_with_label(train.y, 1);
  const std::size_t majority = train.count(0);
  if (minority.size() < k + 1) {
    throw Error(ErrorKind::TooFewMinority, "SMOTE needs at least k+1 = " + std::to_string(k + 1) +
                                               " minority rows, have " +
                                               std::to_string(minority.size()));
  }
  const std::size_t target = round_count(strategy * static_cast<double>(majority));
  if (target <= minority.size()) return result;

  const FeatureMatrix metric = scaled_knn ? zscore(train.x) : train.x;
  std::vector<std::vector<std::size_t>> neighbours(minority.size());
  for (std::size_t i = 0; i < minority.size(); ++i) {
    neighbours[i] = nearest_among(metric, minority[i], minority, k);
  }

  Rng rng(seed);
  const std::size_t cols = train.x.cols();
  std::vector<double> synth(cols);
  for (std::size_t s = minority.size(); s < target; ++s) {
    const std::size_t pick = rng.below(minority.size());
    const std::size_t base = minority[pick];
    const std::size_t nn = neighbours[pick][rng.below(k)];
    const double u = rng.uniform();
    const auto a = train.x.row(base);
    const auto b = train.x.row(nn);
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = a[c] + u * (b[c] - a[c]);
      // Clamp away rounding so the point stays on the parent segment.
      synth[c] = std::clamp(v, std::min(a[c], b[c]), std::max(a[c], b[c]));
    }
    result.data.append(synth, 1, RowOrigin::synthetic);
    result.parents.emplace_back(base, nn);
  }
  return result;
}

LabeledData smote(const LabeledData& train, const ResampleConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  return smote_detailed(train, cfg.smote_k, cfg.smote_strategy, seed, cfg.scaled_knn).data;
}

LabeledData random_undersample(const LabeledData& train, double strategy, std::uint64_t seed) {
  train.validate();
  if (!(strategy > 0.0 && strategy <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "undersampling strategy must lie in (0, 1]");
  }
  const auto majority = rows_with_label(train.y, 0);
  const std::size_t minority = train.count(1);
  if (minority == 0 || majority.empty()) {
    throw Error(ErrorKind::DegenerateClass, "undersampling needs both classes");
  }
  const std::size_t target = round_count(static_cast<double>(minority) / strategy);
  if (target >= majority.size()) return train;

  // Partial Fisher-Yates picks a uniform subset of size target.
  std::vector<std::size_t> pool = majority;
  Rng rng(seed);
  for (std::size_t i = 0; i < target; ++i) {
    std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
  }
  std::vector<char> keep(train.size(), 0);
  for (std::size_t i = 0; i < target; ++i) keep[pool[i]] = 1;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train.y[i] == 1 || keep[i]) rows.push_back(i);
  }
  return train.subset(rows);
}

LabeledData random_undersample(const LabeledData& train, const ResampleConfig& cfg,
                               std::uint64_t seed) {
  cfg.validate();
  return random_undersample(train, cfg.under_strategy, seed);
}

EnnResult enn(const LabeledData& data, std::size_t k, int edited_class, bool scaled_knn) {
  data.validate();
  if (data.size() < k + 1) {
    throw Error(ErrorKind::TooFewInstances, "ENN needs at least k+1 = " + std::to_string(k + 1) +
                                                " instances");
  }
  const FeatureMatrix metric = scaled_knn ? zscore(data.x) : data.x;
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  EnnResult result;
  for (std::size_t i = 0; i < data.size(); ++i) {
    bool remove = false;
    if (data.y[i] == edited_class) {
      for (std::size_t j : nearest_among(metric, i, all, k)) {
        if (data.y[j] != data.y[i]) {
          remove = true;
          break;
        }
      }
    }
    (remove ? result.removed_indices : result.kept_indices).push_back(i);
  }
  result.kept = data.subset(result.kept_indices);
  return result;
}

}  // namespace habtox::resample
