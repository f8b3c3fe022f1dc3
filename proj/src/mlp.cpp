#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "habtox/error.hpp"
#include "habtox/kernels.hpp"
#include "habtox/models.hpp"
#include "habtox/rng.hpp"

namespace habtox::models {
namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Binary cross-entropy on the logit, stable for large |z|.
double bce_from_logit(double z, int y) {
  const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  return softplus - (y == 1 ? z : 0.0);
}

struct Forward {
  std::vector<double> pre;     // hidden pre-activations
  std::vector<double> act;     // relu(pre)
  double logit = 0.0;
};

Forward run(const MlpParams& p, std::span<const double> x) {
  Forward f;
  f.pre.resize(p.hidden);
  f.act.resize(p.hidden);
  for (std::size_t h = 0; h < p.hidden; ++h) {
    f.pre[h] = kernels::dot({p.w1.data() + h * p.inputs, p.inputs}, x) + p.b1[h];
    f.act[h] = f.pre[h] > 0.0 ? f.pre[h] : 0.0;
  }
  f.logit = kernels::dot(p.w2, f.act) + p.b2;
  return f;
}

double weight_norm(const MlpParams& p) {
  double s = 0.0;
  for (double w : p.w1) s += w * w;
  for (double w : p.w2) s += w * w;
  return s;
}

// Loss and gradient over a subset of rows, averaged over that subset.
double loss_and_grad(const MlpParams& p, const FeatureMatrix& x, std::span<const int> y,
                     std::span<const std::size_t> rows, double l2, std::vector<double>* grad) {
  const double n = static_cast<double>(rows.size());
  double loss = 0.0;
  std::vector<double> gw1;
  std::vector<double> gb1;
  std::vector<double> gw2;
  double gb2 = 0.0;
  if (grad) {
    gw1.assign(p.w1.size(), 0.0);
    gb1.assign(p.b1.size(), 0.0);
    gw2.assign(p.w2.size(), 0.0);
  }
  for (std::size_t r : rows) {
    const auto xr = x.row(r);
    const Forward f = run(p, xr);
    loss += bce_from_logit(f.logit, y[r]);
    if (!grad) continue;
    const double dz = sigmoid(f.logit) - static_cast<double>(y[r]);
    gb2 += dz;
    for (std::size_t h = 0; h < p.hidden; ++h) {
      gw2[h] += dz * f.act[h];
      if (f.pre[h] <= 0.0) continue;
      const double dh = dz * p.w2[h];
      gb1[h] += dh;
      double* row = &gw1[h * p.inputs];
      for (std::size_t i = 0; i < p.inputs; ++i) row[i] += dh * xr[i];
    }
  }
  loss = loss / n + 0.5 * l2 * weight_norm(p) / n;
  if (grad) {
    grad->clear();
    grad->reserve(p.size());
    for (std::size_t k = 0; k < gw1.size(); ++k) grad->push_back(gw1[k] / n + l2 * p.w1[k] / n);
    for (double g : gb1) grad->push_back(g / n);
    for (std::size_t k = 0; k < gw2.size(); ++k) grad->push_back(gw2[k] / n + l2 * p.w2[k] / n);
    grad->push_back(gb2 / n);
  }
  return loss;
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

}  // namespace

std::vector<double> MlpParams::flatten() const {
  std::vector<double> out;
  out.reserve(size());
  out.insert(out.end(), w1.begin(), w1.end());
  out.insert(out.end(), b1.begin(), b1.end());
  out.insert(out.end(), w2.begin(), w2.end());
  out.push_back(b2);
  return out;
}

void MlpParams::unflatten(std::span<const double> flat) {
  if (flat.size() != size()) throw Error(ErrorKind::LengthMismatch, "parameter vector size mismatch");
  auto it = flat.begin();
  std::copy_n(it, w1.size(), w1.begin());
  it += static_cast<std::ptrdiff_t>(w1.size());
  std::copy_n(it, b1.size(), b1.begin());
  it += static_cast<std::ptrdiff_t>(b1.size());
  std::copy_n(it, w2.size(), w2.begin());
  it += static_cast<std::ptrdiff_t>(w2.size());
  b2 = *it;
}

double MlpParams::forward(std::span<const double> scaled_x) const { return sigmoid(run(*this, scaled_x).logit); }

double mlp_loss(const MlpParams& params, const FeatureMatrix& scaled_x, std::span<const int> y, double l2) {
  const auto rows = all_rows(scaled_x.rows());
  return loss_and_grad(params, scaled_x, y, rows, l2, nullptr);
}

std::vector<double> mlp_gradient(const MlpParams& params, const FeatureMatrix& scaled_x,
                                 std::span<const int> y, double l2) {
  const auto rows = all_rows(scaled_x.rows());
  std::vector<double> g;
  loss_and_grad(params, scaled_x, y, rows, l2, &g);
  return g;
}

std::vector<double> MlpModel::transform(std::span<const double> x) const {
  if (x.size() != n_features) throw Error(ErrorKind::ArityMismatch, "MLP input arity mismatch");
  std::vector<double> out(input_columns.size());
  for (std::size_t i = 0; i < input_columns.size(); ++i) {
    out[i] = (x[input_columns[i]] - mean[i]) / scale[i];
  }
  return out;
}

double MlpModel::score(std::span<const double> x) const { return params.forward(transform(x)); }

MlpModel fit_mlp(const LabeledData& train, const MlpConfig& config, std::uint64_t seed) {
  train.validate();
  const std::size_t n = train.size();
  if (n == 0) throw Error(ErrorKind::EmptyTrain, "cannot fit an MLP on no rows");
  if (n < 2) throw Error(ErrorKind::TooFewInstances, "MLP needs at least 2 rows");
  if (config.hidden == 0) throw Error(ErrorKind::InvalidArgument, "hidden width must be >= 1");

  MlpModel model;
  model.n_features = train.x.cols();
  for (std::size_t c = 0; c < train.x.cols(); ++c) {
    if (config.excluded_column && *config.excluded_column == c) continue;
    model.input_columns.push_back(c);
  }
  const std::size_t inputs = model.input_columns.size();
  if (inputs == 0) throw Error(ErrorKind::InvalidArgument, "MLP has no input columns");

  // z-score scaler fitted on the training rows only.
  model.mean.assign(inputs, 0.0);
  model.scale.assign(inputs, 1.0);
  for (std::size_t i = 0; i < inputs; ++i) {
    const std::size_t c = model.input_columns[i];
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += train.x(r, c);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) var += (train.x(r, c) - mean) * (train.x(r, c) - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    model.mean[i] = mean;
    model.scale[i] = sd > 0.0 ? sd : 1.0;
  }
  FeatureMatrix xs(n, inputs);
  for (std::size_t r = 0; r < n; ++r) {
    const auto t = model.transform(train.x.row(r));
    std::ranges::copy(t, xs.row(r).begin());
  }

  Rng rng(seed);
  MlpParams& p = model.params;
  p.inputs = inputs;
  p.hidden = config.hidden;
  auto glorot = [&](std::size_t fan_in, std::size_t fan_out, std::size_t count) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> v(count);
    for (auto& w : v) w = rng.uniform(-bound, bound);
    return v;
  };
  p.w1 = glorot(inputs, config.hidden, inputs * config.hidden);
  p.b1 = glorot(inputs, config.hidden, config.hidden);
  p.w2 = glorot(config.hidden, 1, config.hidden);
  p.b2 = glorot(config.hidden, 1, 1)[0];

  const std::size_t batch = std::clamp<std::size_t>(config.batch_size.value_or(std::min<std::size_t>(200, n)), 1, n);
  std::vector<double> theta = p.flatten();
  std::vector<double> m(theta.size(), 0.0);
  std::vector<double> v(theta.size(), 0.0);
  std::vector<double> grad;
  std::vector<std::size_t> order = all_rows(n);
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t no_improvement = 0;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < config.max_iter; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      const double l = loss_and_grad(p, xs, train.y, rows, config.l2, &grad);
      epoch_loss += l * static_cast<double>(rows.size());
      ++step;
      const double t = static_cast<double>(step);
      const double lr = config.learning_rate * std::sqrt(1.0 - std::pow(config.beta2, t)) /
                        (1.0 - std::pow(config.beta1, t));
      for (std::size_t k = 0; k < theta.size(); ++k) {
        m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * grad[k];
        v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * grad[k] * grad[k];
        theta[k] -= lr * m[k] / (std::sqrt(v[k]) + config.epsilon);
      }
      p.unflatten(theta);
    }
    epoch_loss /= static_cast<double>(n);
    model.loss_curve.push_back(epoch_loss);
    model.epochs = epoch + 1;
    if (epoch_loss > best_loss - config.tol) {
      ++no_improvement;
    } else {
      no_improvement = 0;
    }
    best_loss = std::min(best_loss, epoch_loss);
    if (no_improvement >= config.n_iter_no_change) {
      model.converged = true;
      break;
    }
  }
  return model;
}

}  // namespace habtox::models
