#include <cmath>
#include <string>

#include "cbir/local_descriptors.h"
#include "gmm_internal.h"

namespace cbir {
namespace {

void check_input(const LocalDescriptorSet& descs, int dim, const char* what) {
  if (descs.rows() == 0) throw DataError(std::string(what) + ": empty descriptor set");
  if (descs.dim != dim) {
    throw UsageError(std::string(what) + ": descriptor dim " + std::to_string(descs.dim) +
                     " does not match model dim " + std::to_string(dim));
  }
}

}  // namespace

void power_normalize(std::vector<double>& v) {
  for (double& x : v) x = std::copysign(std::sqrt(std::abs(x)), x);
}

std::vector<double> bovw_counts(const LocalDescriptorSet& descs, const Codebook& cb) {
  check_input(descs, cb.dim, "encode_bovw");
  std::vector<int> labels;
  std::vector<double> dist;
  assign_nearest_reference(descs.data, cb, labels, dist);
  std::vector<double> h(cb.k, 0.0);
  for (int l : labels) h[l] += 1.0;
  return h;
}

FeatureVector encode_bovw(const LocalDescriptorSet& descs, const Codebook& cb) {
  return make_feature(descs.image_id, "bovw", bovw_counts(descs, cb));
}

std::vector<double> vlad_residuals(const LocalDescriptorSet& descs, const Codebook& cb) {
  check_input(descs, cb.dim, "encode_vlad");
  std::vector<int> labels;
  std::vector<double> dist;
  assign_nearest_reference(descs.data, cb, labels, dist);
  std::vector<double> v(std::size_t(cb.k) * cb.dim, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto x = descs.row(i);
    const auto c = cb.centroid(labels[i]);
    double* block = &v[std::size_t(labels[i]) * cb.dim];
    for (int j = 0; j < cb.dim; ++j) block[j] += double(x[j]) - double(c[j]);
  }
  return v;
}

FeatureVector encode_vlad(const LocalDescriptorSet& descs, const Codebook& cb) {
  std::vector<double> v = vlad_residuals(descs, cb);
  power_normalize(v);
  return make_feature(descs.image_id, "vlad", v);
}

std::vector<double> fisher_gradients(const LocalDescriptorSet& descs, const GmmModel& gmm) {
  check_input(descs, gmm.dim, "encode_fisher");
  const int dim = gmm.dim;
  const std::vector<double> norms = gmm_log_norms(gmm);
  std::vector<double> fv(std::size_t(2) * gmm.k * dim, 0.0);
  std::vector<double> post;
  for (std::size_t i = 0; i < descs.rows(); ++i) {
    const auto x = descs.row(i);
    gmm_posteriors(gmm, norms, x, post);
    for (int c = 0; c < gmm.k; ++c) {
      const double p = post[c];
      if (p < 1e-12) continue;
      double* g_mu = &fv[std::size_t(2) * c * dim];
      double* g_sigma = g_mu + dim;
      const double* mu = &gmm.means[std::size_t(c) * dim];
      const double* var = &gmm.variances[std::size_t(c) * dim];
      for (int j = 0; j < dim; ++j) {
        const double u = (x[j] - mu[j]) / std::sqrt(var[j]);
        g_mu[j] += p * u;
        g_sigma[j] += p * (u * u - 1.0);
      }
    }
  }
  const double n = double(descs.rows());
  for (int c = 0; c < gmm.k; ++c) {
    const double s_mu = 1.0 / (n * std::sqrt(gmm.weights[c]));
    const double s_sigma = 1.0 / (n * std::sqrt(2.0 * gmm.weights[c]));
    double* g_mu = &fv[std::size_t(2) * c * dim];
    for (int j = 0; j < dim; ++j) {
      g_mu[j] *= s_mu;
      g_mu[dim + j] *= s_sigma;
    }
  }
  return fv;
}

FeatureVector encode_fisher(const LocalDescriptorSet& descs, const GmmModel& gmm) {
  std::vector<double> v = fisher_gradients(descs, gmm);
  power_normalize(v);
  return make_feature(descs.image_id, "fisher", v);
}

}  // namespace cbir
