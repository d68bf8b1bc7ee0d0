#include <algorithm>
#include <cmath>
#include <limits>

#include "cbir/relevance_feedback.h"

namespace cbir {
namespace {

constexpr double kTau = 1e-12;

}  // namespace

double SvmModel::decision(std::span<const double> kernel_row) const {
  if (kernel_row.size() != alpha.size()) throw UsageError("svm decision: kernel row length mismatch");
  double f = bias;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (alpha[i] != 0) f += alpha[i] * labels[i] * kernel_row[i];
  }
  return f;
}

std::vector<int> SvmModel::support() const {
  std::vector<int> s;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (alpha[i] > 0) s.push_back(int(i));
  }
  return s;
}

double hi_kernel(std::span<const float> x, std::span<const float> y) {
  return distance(Metric::kHistIntersection, x, y);
}

// Dual: min 1/2 a'Qa - e'a, 0 <= a <= C, y'a = 0, Q_ij = y_i y_j K_ij.
SvmModel train_svm(std::span<const double> kernel, std::span<const int> labels, const SvmOptions& opts) {
  const std::size_t n = labels.size();
  if (kernel.size() != n * n) throw UsageError("train_svm: kernel must be n x n");
  if (opts.c <= 0) throw UsageError("train_svm: C must be positive");
  bool pos = false, neg = false;
  for (int y : labels) {
    if (y != 1 && y != -1) throw UsageError("train_svm: labels must be +1 or -1");
    (y > 0 ? pos : neg) = true;
  }
  if (!pos || !neg) throw UsageError("train_svm: both classes are required");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(kernel[i * n + j] - kernel[j * n + i]) > 1e-8) {
        throw UsageError("train_svm: kernel matrix is not symmetric");
      }
    }
  }
  auto K = [&](std::size_t i, std::size_t j) { return kernel[i * n + j]; };
  const double C = opts.c;

  SvmModel m;
  m.c = C;
  m.labels.assign(labels.begin(), labels.end());
  m.alpha.assign(n, 0.0);
  std::vector<double>& a = m.alpha;
  const std::vector<int>& y = m.labels;
  std::vector<double> G(n, -1.0);  // gradient Qa - e at a = 0

  auto in_up = [&](std::size_t t) { return (y[t] == 1 && a[t] < C) || (y[t] == -1 && a[t] > 0); };
  auto in_low = [&](std::size_t t) { return (y[t] == 1 && a[t] > 0) || (y[t] == -1 && a[t] < C); };

  for (m.iterations = 0; m.iterations < opts.max_iterations; ++m.iterations) {
    // Second-order working-set selection.
    double gmax = -std::numeric_limits<double>::infinity();
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (in_up(t) && -y[t] * G[t] >= gmax) {
        if (-y[t] * G[t] > gmax || i == n) i = t;
        gmax = -y[t] * G[t];
      }
    }
    double gmin = std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    std::size_t j = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double v = -y[t] * G[t];
      gmin = std::min(gmin, v);
      if (i == n) continue;
      const double b = gmax - v;
      if (b > 0) {
        double quad = K(i, i) + K(t, t) - 2.0 * K(i, t);
        if (quad <= 0) quad = kTau;
        const double obj = -(b * b) / quad;
        if (obj < best) {
          best = obj;
          j = t;
        }
      }
    }
    if (i == n || j == n || gmax - gmin < opts.eps) {
      m.converged = true;
      break;
    }

    const double ai = a[i], aj = a[j];
    double quad = K(i, i) + K(j, j) - 2.0 * K(i, j);
    if (quad <= 0) quad = kTau;
    if (y[i] != y[j]) {
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = a[i] - a[j];
      a[i] += delta;
      a[j] += delta;
      if (diff > 0) {
        if (a[j] < 0) { a[j] = 0; a[i] = diff; }
      } else {
        if (a[i] < 0) { a[i] = 0; a[j] = -diff; }
      }
      if (diff > 0) {
        if (a[i] > C) { a[i] = C; a[j] = C - diff; }
      } else {
        if (a[j] > C) { a[j] = C; a[i] = C + diff; }
      }
    } else {
      const double delta = (G[i] - G[j]) / quad;
      const double sum = a[i] + a[j];
      a[i] -= delta;
      a[j] += delta;
      if (sum > C) {
        if (a[i] > C) { a[i] = C; a[j] = sum - C; }
      } else {
        if (a[j] < 0) { a[j] = 0; a[i] = sum; }
      }
      if (sum > C) {
        if (a[j] > C) { a[j] = C; a[i] = sum - C; }
      } else {
        if (a[i] < 0) { a[i] = 0; a[j] = sum; }
      }
    }
    const double di = a[i] - ai, dj = a[j] - aj;
    for (std::size_t t = 0; t < n; ++t) {
      G[t] += y[t] * (y[i] * K(t, i) * di + y[j] * K(t, j) * dj);
    }
  }

  // Bias from free vectors, or the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum = 0;
  int free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * G[t];
    if (a[t] >= C) {
      if (y[t] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (a[t] <= 0) {
      if (y[t] == 1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++free;
      sum += yg;
    }
  }
  const double rho = free > 0 ? sum / free : (ub + lb) / 2;
  m.bias = -rho;
  return m;
}

std::vector<double> kkt_residuals(const SvmModel& model, std::span<const double> kernel) {
  const std::size_t n = model.alpha.size();
  if (kernel.size() != n * n) throw UsageError("kkt_residuals: kernel must be n x n");
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double margin = model.labels[i] * model.decision(kernel.subspan(i * n, n));
    const double a = model.alpha[i];
    if (a <= 0) {
      r[i] = std::max(0.0, 1.0 - margin);
    } else if (a >= model.c) {
      r[i] = std::max(0.0, margin - 1.0);
    } else {
      r[i] = std::abs(margin - 1.0);
    }
  }
  return r;
}

}  // namespace cbir
