#include <algorithm>
#include <cmath>
#include <limits>

#include "habtox/error.hpp"
#include "habtox/kernels.hpp"
#include "habtox/models.hpp"

namespace habtox::models {
namespace {

constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

double scale_gamma(const FeatureMatrix& x) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  double mean_var = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += x(r, c);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) var += (x(r, c) - mean) * (x(r, c) - mean);
    mean_var += var / static_cast<double>(n);
  }
  mean_var /= static_cast<double>(d);
  return mean_var > 0.0 ? 1.0 / (static_cast<double>(d) * mean_var) : 1.0;
}

}  // namespace

double SvmModel::kernel_value(std::span<const double> a, std::span<const double> b) const {
  if (kernel == KernelType::linear) return kernels::dot(a, b);
  return std::exp(-gamma * kernels::squared_distance(a, b));
}

double SvmModel::decision(std::span<const double> x) const {
  double f = bias;
  for (std::size_t i = 0; i < dual_coef.size(); ++i) f += dual_coef[i] * kernel_value(support_vectors.row(i), x);
  return f;
}

SvmFit fit_svm_detailed(const LabeledData& train, const SvmConfig& config) {
  train.validate();
  const std::size_t n = train.size();
  if (n == 0) throw Error(ErrorKind::EmptyTrain, "cannot fit an SVM on no rows");
  if (train.count(0) == 0 || train.count(1) == 0) {
    throw Error(ErrorKind::DegenerateClass, "SVM needs both classes");
  }
  if (!(config.C > 0.0)) throw Error(ErrorKind::InvalidArgument, "C must be positive");

  SvmFit fit;
  SvmModel& model = fit.model;
  model.kernel = config.kernel;
  model.C = config.C;
  model.gamma = config.gamma.value_or(scale_gamma(train.x));

  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = train.y[i] == 1 ? 1.0 : -1.0;
  const auto cw = class_weights(train.y, config.class_weight);
  fit.upper_bound.resize(n);
  for (std::size_t i = 0; i < n; ++i) fit.upper_bound[i] = config.C * cw[static_cast<std::size_t>(train.y[i])];
  const auto& ub = fit.upper_bound;

  // Q_ij = y_i y_j K(x_i, x_j), kept in full.
  std::vector<double> q(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = y[i] * y[j] * model.kernel_value(train.x.row(i), train.x.row(j));
      q[i * n + j] = v;
      q[j * n + i] = v;
    }
  }

  std::vector<double>& alpha = fit.alpha;
  alpha.assign(n, 0.0);
  std::vector<double> grad(n, -1.0);  // gradient of 0.5 a'Qa - e'a
  auto in_up = [&](std::size_t t) { return (y[t] > 0 && alpha[t] < ub[t]) || (y[t] < 0 && alpha[t] > 0.0); };
  auto in_low = [&](std::size_t t) { return (y[t] > 0 && alpha[t] > 0.0) || (y[t] < 0 && alpha[t] < ub[t]); };

  std::size_t iter = 0;
  bool converged = false;
  double violation = kInf;
  for (;;) {
    // Maximal violating pair.
    double gmax = -kInf;
    double gmin = kInf;
    std::size_t i = n;
    std::size_t j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      if (in_up(t) && v > gmax) {
        gmax = v;
        i = t;
      }
      if (in_low(t) && v < gmin) {
        gmin = v;
        j = t;
      }
    }
    violation = (i == n || j == n) ? 0.0 : gmax - gmin;
    if (violation < config.tol) {
      converged = true;
      break;
    }
    if (iter >= config.max_iter) break;
    ++iter;

    const double* qi = &q[i * n];
    const double* qj = &q[j * n];
    const double old_ai = alpha[i];
    const double old_aj = alpha[j];
    const double ci = ub[i];
    const double cj = ub[j];
    if (y[i] != y[j]) {
      double quad = qi[i] + qj[j] + 2.0 * qi[j];
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > ci - cj) {
        if (alpha[i] > ci) {
          alpha[i] = ci;
          alpha[j] = ci - diff;
        }
      } else if (alpha[j] > cj) {
        alpha[j] = cj;
        alpha[i] = cj + diff;
      }
    } else {
      double quad = qi[i] + qj[j] - 2.0 * qi[j];
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > ci) {
        if (alpha[i] > ci) {
          alpha[i] = ci;
          alpha[j] = sum - ci;
        }
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0;
        alpha[i] = sum;
      }
      if (sum > cj) {
        if (alpha[j] > cj) {
          alpha[j] = cj;
          alpha[i] = sum - cj;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = sum;
      }
    }
    const double dai = alpha[i] - old_ai;
    const double daj = alpha[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) grad[t] += qi[t] * dai + qj[t] * daj;
  }

  // Bias from free vectors when any exist, else the midpoint of the bounds.
  double upper = kInf;
  double lower = -kInf;
  double free_sum = 0.0;
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= ub[t]) {
      if (y[t] < 0) upper = std::min(upper, yg);
      else lower = std::max(lower, yg);
    } else if (alpha[t] <= 0.0) {
      if (y[t] > 0) upper = std::min(upper, yg);
      else lower = std::max(lower, yg);
    } else {
      free_sum += yg;
      ++free_count;
    }
  }
  const double rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : (upper + lower) / 2.0;
  model.bias = -rho;
  model.converged = converged;
  model.iterations = iter;
  fit.max_violation = violation;

  model.support_vectors = FeatureMatrix(0, train.x.cols());
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 0.0) {
      model.support_vectors.append_row(train.x.row(t));
      model.dual_coef.push_back(alpha[t] * y[t]);
    }
  }
  return fit;
}

SvmModel fit_svm(const LabeledData& train, const SvmConfig& config) {
  return fit_svm_detailed(train, config).model;
}

}  // namespace habtox::models
