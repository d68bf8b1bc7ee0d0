#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cbir/local_descriptors.h"

namespace cbir {
namespace {

double sq_distance(std::span<const float> a, std::span<const float> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = double(a[i]) - double(b[i]);
    s += d * d;
  }
  return s;
}

std::size_t count_distinct_rows(std::span<const float> rows, int dim) {
  const std::size_t n = rows.size() / dim;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto row = [&](std::size_t i) { return rows.subspan(i * dim, dim); };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ra = row(a), rb = row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  std::size_t distinct = n ? 1 : 0;
  for (std::size_t i = 1; i < n; ++i) {
    const auto ra = row(order[i - 1]), rb = row(order[i]);
    if (!std::equal(ra.begin(), ra.end(), rb.begin())) ++distinct;
  }
  return distinct;
}

inline void nearest_of(std::span<const float> x, const Codebook& cb, int& label, double& best) {
  label = 0;
  best = sq_distance(x, cb.centroid(0));
  for (int c = 1; c < cb.k; ++c) {
    const double d = sq_distance(x, cb.centroid(c));
    if (d < best) {
      best = d;
      label = c;
    }
  }
}

}  // namespace

void assign_nearest(std::span<const float> rows, const Codebook& cb, std::vector<int>& labels,
                    std::vector<double>& sq_dist) {
  const std::ptrdiff_t n = std::ptrdiff_t(rows.size() / cb.dim);
  labels.resize(n);
  sq_dist.resize(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    nearest_of(rows.subspan(std::size_t(i) * cb.dim, cb.dim), cb, labels[i], sq_dist[i]);
  }
}

void assign_nearest_reference(std::span<const float> rows, const Codebook& cb,
                              std::vector<int>& labels, std::vector<double>& sq_dist) {
  const std::size_t n = rows.size() / cb.dim;
  labels.resize(n);
  sq_dist.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    nearest_of(rows.subspan(i * cb.dim, cb.dim), cb, labels[i], sq_dist[i]);
  }
}

Codebook learn_codebook_kmeans(std::span<const float> rows, int dim, const KMeansOptions& opts) {
  if (dim < 1 || rows.size() % dim != 0) throw UsageError("kmeans: rows do not match dimension");
  if (opts.k < 1) throw UsageError("kmeans: k must be positive");
  const std::size_t n = rows.size() / dim;
  if (n < std::size_t(opts.k) || count_distinct_rows(rows, dim) < std::size_t(opts.k)) {
    throw DataError("kmeans: fewer distinct rows than k=" + std::to_string(opts.k));
  }
  auto row = [&](std::size_t i) { return rows.subspan(i * dim, dim); };

  Codebook cb;
  cb.k = opts.k;
  cb.dim = dim;
  cb.seed = opts.seed;
  cb.centroids.reserve(std::size_t(opts.k) * dim);

  // k-means++ seeding.
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t first = std::size_t(unit(rng) * n);
  first = std::min(first, n - 1);
  cb.centroids.insert(cb.centroids.end(), row(first).begin(), row(first).end());
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = sq_distance(row(i), row(first));
  for (int c = 1; c < opts.k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    const double target = unit(rng) * total;
    std::size_t pick = n;
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] == 0) continue;
      acc += d2[i];
      pick = i;
      if (acc >= target) break;
    }
    cb.centroids.insert(cb.centroids.end(), row(pick).begin(), row(pick).end());
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_distance(row(i), row(pick)));
  }

  std::vector<int> labels;
  std::vector<double> dist;
  std::vector<double> sums(std::size_t(opts.k) * dim);
  std::vector<std::size_t> counts(opts.k);
  for (int it = 0; it < opts.max_iters; ++it) {
    assign_nearest(rows, cb, labels, dist);
    const double objective = std::accumulate(dist.begin(), dist.end(), 0.0);
    cb.objective_history.push_back(objective);
    cb.iterations = it + 1;
    if (it > 0) {
      const double prev = cb.objective_history[it - 1];
      if (prev == 0 || (prev - objective) / prev < opts.tolerance) break;
    }

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[labels[i]];
      const auto r = row(i);
      double* s = &sums[std::size_t(labels[i]) * dim];
      for (int j = 0; j < dim; ++j) s[j] += r[j];
    }
    std::vector<std::uint8_t> taken(n, 0);
    for (int c = 0; c < opts.k; ++c) {
      float* centroid = &cb.centroids[std::size_t(c) * dim];
      if (counts[c] > 0) {
        for (int j = 0; j < dim; ++j) centroid[j] = float(sums[std::size_t(c) * dim + j] / counts[c]);
        continue;
      }
      // Empty cluster: move it onto the point worst served by its centroid.
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (!taken[i] && (far == n || dist[i] > dist[far])) far = i;
      }
      taken[far] = 1;
      dist[far] = 0;
      std::copy(row(far).begin(), row(far).end(), centroid);
    }
  }
  return cb;
}

}  // namespace cbir
