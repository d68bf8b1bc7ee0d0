#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "cbir/local_descriptors.h"
#include "gmm_internal.h"

namespace cbir {
namespace {

constexpr std::size_t kChunk = 4096;

// Sufficient statistics of one chunk of rows.
struct Stats {
  std::vector<double> n;    // k
  std::vector<double> sx;   // k x dim
  std::vector<double> sxx;  // k x dim
  double log_likelihood = 0;

  Stats(int k, int dim) : n(k, 0.0), sx(std::size_t(k) * dim, 0.0), sxx(std::size_t(k) * dim, 0.0) {}
};

// log of the normalizing constant of each component.
std::vector<double> log_norms(const GmmModel& g) {
  std::vector<double> out(g.k);
  for (int c = 0; c < g.k; ++c) {
    double s = 0;
    for (int j = 0; j < g.dim; ++j) s += std::log(2 * std::numbers::pi * g.variances[std::size_t(c) * g.dim + j]);
    out[c] = std::log(g.weights[c]) - 0.5 * s;
  }
  return out;
}

}  // namespace

// Posterior responsibilities of one row; returns the row's log-likelihood.
double gmm_posteriors(const GmmModel& g, const std::vector<double>& norms, std::span<const float> x,
                      std::vector<double>& post) {
  post.resize(g.k);
  double mx = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < g.k; ++c) {
    const double* mu = &g.means[std::size_t(c) * g.dim];
    const double* var = &g.variances[std::size_t(c) * g.dim];
    double q = 0;
    for (int j = 0; j < g.dim; ++j) {
      const double d = x[j] - mu[j];
      q += d * d / var[j];
    }
    post[c] = norms[c] - 0.5 * q;
    mx = std::max(mx, post[c]);
  }
  double sum = 0;
  for (double& p : post) {
    p = std::exp(p - mx);
    sum += p;
  }
  for (double& p : post) p /= sum;
  return mx + std::log(sum);
}

std::vector<double> gmm_log_norms(const GmmModel& g) { return log_norms(g); }

GmmModel learn_gmm(std::span<const float> rows, int dim, const GmmOptions& opts) {
  if (dim < 1 || rows.size() % dim != 0) throw UsageError("gmm: rows do not match dimension");
  const std::size_t n = rows.size() / dim;
  if (opts.k < 1 || n < std::size_t(10) * opts.k) {
    throw DataError("gmm: need at least 10*k rows (have " + std::to_string(n) + ")");
  }
  auto row = [&](std::size_t i) { return rows.subspan(i * dim, dim); };

  KMeansOptions km;
  km.k = opts.k;
  km.seed = opts.seed;
  km.max_iters = opts.kmeans_iters;
  const Codebook cb = learn_codebook_kmeans(rows, dim, km);
  std::vector<int> labels;
  std::vector<double> dist;
  assign_nearest(rows, cb, labels, dist);

  GmmModel g;
  g.k = opts.k;
  g.dim = dim;
  g.weights.assign(g.k, 0.0);
  g.means.assign(std::size_t(g.k) * dim, 0.0);
  g.variances.assign(std::size_t(g.k) * dim, 0.0);

  std::vector<double> global_mean(dim, 0.0), global_var(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) global_mean[j] += row(i)[j];
  }
  for (double& m : global_mean) m /= double(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) global_var[j] += (row(i)[j] - global_mean[j]) * (row(i)[j] - global_mean[j]);
  }
  for (double& v : global_var) v = std::max(v / double(n), kVarianceFloor);

  std::vector<double> counts(g.k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = labels[i];
    counts[c] += 1;
    for (int j = 0; j < dim; ++j) g.means[std::size_t(c) * dim + j] += row(i)[j];
  }
  for (int c = 0; c < g.k; ++c) {
    for (int j = 0; j < dim; ++j) g.means[std::size_t(c) * dim + j] /= std::max(counts[c], 1.0);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const int c = labels[i];
    for (int j = 0; j < dim; ++j) {
      const double d = row(i)[j] - g.means[std::size_t(c) * dim + j];
      g.variances[std::size_t(c) * dim + j] += d * d;
    }
  }
  for (int c = 0; c < g.k; ++c) {
    g.weights[c] = counts[c] / double(n);
    for (int j = 0; j < dim; ++j) {
      double& v = g.variances[std::size_t(c) * dim + j];
      v = counts[c] > 1 ? std::max(v / counts[c], kVarianceFloor) : global_var[j];
    }
  }

  const std::size_t n_chunks = (n + kChunk - 1) / kChunk;
  bool warned = false;
  for (int it = 0; it < opts.max_iters; ++it) {
    const std::vector<double> norms = log_norms(g);
    std::vector<Stats> partial(n_chunks, Stats(g.k, dim));
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t ch = 0; ch < std::ptrdiff_t(n_chunks); ++ch) {
      Stats& s = partial[ch];
      std::vector<double> post;
      const std::size_t end = std::min(n, std::size_t(ch + 1) * kChunk);
      for (std::size_t i = std::size_t(ch) * kChunk; i < end; ++i) {
        const auto x = row(i);
        s.log_likelihood += gmm_posteriors(g, norms, x, post);
        for (int c = 0; c < g.k; ++c) {
          const double p = post[c];
          if (p < 1e-12) continue;
          s.n[c] += p;
          double* sx = &s.sx[std::size_t(c) * dim];
          double* sxx = &s.sxx[std::size_t(c) * dim];
          for (int j = 0; j < dim; ++j) {
            sx[j] += p * x[j];
            sxx[j] += p * double(x[j]) * x[j];
          }
        }
      }
    }
    Stats total(g.k, dim);
    for (const Stats& s : partial) {  // fixed order: independent of thread count
      total.log_likelihood += s.log_likelihood;
      for (int c = 0; c < g.k; ++c) total.n[c] += s.n[c];
      for (std::size_t i = 0; i < total.sx.size(); ++i) {
        total.sx[i] += s.sx[i];
        total.sxx[i] += s.sxx[i];
      }
    }
    g.log_likelihood_history.push_back(total.log_likelihood);

    double weight_sum = 0;
    for (int c = 0; c < g.k; ++c) {
      if (total.n[c] < 1e-8) {
        if (!warned) g.warnings.push_back("gmm: component " + std::to_string(c) + " lost all mass; kept as is");
        warned = true;
        g.weights[c] = 1e-10;
        weight_sum += g.weights[c];
        continue;
      }
      g.weights[c] = total.n[c] / double(n);
      weight_sum += g.weights[c];
      for (int j = 0; j < dim; ++j) {
        const std::size_t idx = std::size_t(c) * dim + j;
        const double mu = total.sx[idx] / total.n[c];
        double var = total.sxx[idx] / total.n[c] - mu * mu;
        if (var < kVarianceFloor) {
          if (!warned) g.warnings.push_back("gmm: variance floored for component " + std::to_string(c));
          warned = true;
          var = kVarianceFloor;
        }
        g.means[idx] = mu;
        g.variances[idx] = var;
      }
    }
    for (double& w : g.weights) w /= weight_sum;

    if (it > 0) {
      const double prev = g.log_likelihood_history[it - 1];
      const double cur = g.log_likelihood_history[it];
      if (std::abs(cur - prev) <= opts.tolerance * std::abs(prev)) break;
    }
  }
  return g;
}

}  // namespace cbir
