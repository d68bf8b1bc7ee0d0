// Dense local descriptors and their aggregation into global vectors:
// bag of visual words, VLAD and Fisher vectors.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cbir/core.h"

namespace cbir {

struct Keypoint {
  int x;
  int y;
};

struct KeypointGrid {
  int step = 16;
  int patch = 16;
  std::vector<Keypoint> points;
};

// Lattice with margin patch/2: positions patch/2, patch/2 + step, ... while the
// patch stays inside the image. Throws UsageError when no position fits.
KeypointGrid dense_keypoints(int width, int height, int step = 16, int patch = 16);

// Row-major n x dim matrix of local descriptors of one image.
struct LocalDescriptorSet {
  int image_id = -1;
  int dim = 0;
  std::vector<float> data;
  std::vector<std::uint8_t> zero_rows;  // 1 where the descriptor is all-zero

  std::size_t rows() const { return dim ? data.size() / dim : 0; }
  std::span<const float> row(std::size_t i) const {
    return {data.data() + i * dim, std::size_t(dim)};
  }
};

// 4x4 spatial cells x 8 orientations, Gaussian-weighted, at fixed scale and
// upright orientation; normalized, clamped at 0.2 and renormalized.
LocalDescriptorSet dense_sift(const GrayImage& img, const KeypointGrid& grid);

// Per grid point and RGB channel, the riu2 LBP histogram (radius 2, 16
// samples) of the patch around it, L1-normalized: 54 values per point.
LocalDescriptorSet dense_lbp_rgb(const RgbImage& img, const KeypointGrid& grid);

// ---- Codebooks ----

struct Codebook {
  int k = 0;
  int dim = 0;
  std::vector<float> centroids;  // k x dim
  std::uint64_t seed = 0;
  int iterations = 0;
  std::vector<double> objective_history;  // sum of squared distances per iteration

  std::span<const float> centroid(int i) const {
    return {centroids.data() + std::size_t(i) * dim, std::size_t(dim)};
  }
};

struct KMeansOptions {
  int k = 1024;
  std::uint64_t seed = 1;
  int max_iters = 50;
  double tolerance = 1e-6;  // relative objective change
};

// k-means++ initialization followed by Lloyd iterations. An emptied cluster
// is re-seeded with the point farthest from its centroid.
// Throws DataError when there are fewer than k distinct rows.
Codebook learn_codebook_kmeans(std::span<const float> rows, int dim, const KMeansOptions& opts);

// Nearest centroid per row (ties to the lowest index) and its squared
// distance. OpenMP over rows; the reference variant is serial.
void assign_nearest(std::span<const float> rows, const Codebook& cb, std::vector<int>& labels,
                    std::vector<double>& sq_dist);
void assign_nearest_reference(std::span<const float> rows, const Codebook& cb,
                              std::vector<int>& labels, std::vector<double>& sq_dist);

struct GmmModel {
  int k = 0;
  int dim = 0;
  std::vector<double> weights;    // k
  std::vector<double> means;      // k x dim
  std::vector<double> variances;  // k x dim, diagonal
  std::vector<double> log_likelihood_history;
  std::vector<std::string> warnings;
};

inline constexpr double kVarianceFloor = 1e-6;

struct GmmOptions {
  int k = 160;
  std::uint64_t seed = 1;
  int max_iters = 100;
  int kmeans_iters = 20;
  double tolerance = 1e-6;  // relative log-likelihood change
};

// EM for a diagonal Gaussian mixture, initialized from k-means.
// Requires at least 10*k rows.
GmmModel learn_gmm(std::span<const float> rows, int dim, const GmmOptions& opts);

// ---- Encoders ----

// Hard-assignment histogram, L2-normalized.
FeatureVector encode_bovw(const LocalDescriptorSet& descs, const Codebook& cb);

// Un-normalized histogram (bin sum = number of descriptors).
std::vector<double> bovw_counts(const LocalDescriptorSet& descs, const Codebook& cb);

// Residual sums per centroid; signed square root, then L2.
FeatureVector encode_vlad(const LocalDescriptorSet& descs, const Codebook& cb);
std::vector<double> vlad_residuals(const LocalDescriptorSet& descs, const Codebook& cb);

// Gradients of the average log-likelihood w.r.t. means then variances,
// per component: [mu_0 (dim), sigma_0 (dim), mu_1, ...]. Before any
// normalization.
std::vector<double> fisher_gradients(const LocalDescriptorSet& descs, const GmmModel& gmm);

// fisher_gradients, then signed square root and L2.
FeatureVector encode_fisher(const LocalDescriptorSet& descs, const GmmModel& gmm);

// Signed square root of every entry.
void power_normalize(std::vector<double>& v);

// ---- Pipelines ----

enum class LocalKind {
  kDenseSift,      // dense_sift: BoVW over 1024 words
  kDenseSiftVlad,  // dense_sift_vlad: VLAD over 200 words, 25600
  kDenseSiftFv,    // dense_sift_fv: Fisher vector over 160 components, 40960
  kDenseLbpRgb,    // dense_lbp_rgb: BoVW of 54-d LBP patches over 1024 words
};

std::string_view kind_name(LocalKind kind);
std::optional<LocalKind> parse_local_kind(std::string_view name);

// Number of codewords / mixture components used by default for the kind.
int default_vocabulary_size(LocalKind kind);
int local_descriptor_dim(LocalKind kind);
std::size_t dimension(LocalKind kind, int vocabulary_size);

struct LocalParams {
  int step = 16;
  int patch = 16;     // SIFT patch side
  int lbp_window = 16;  // LBP patch side: 16 for LandUse, 30 for SceneSat
};

// The local descriptors the kind is built from.
LocalDescriptorSet extract_local_descriptors(const RgbImage& img, LocalKind kind,
                                             const LocalParams& params = {}, int image_id = -1);

// Exactly one of `codebook` / `gmm` is used depending on the kind.
struct LocalModel {
  std::optional<Codebook> codebook;
  std::optional<GmmModel> gmm;
};

FeatureVector extract_local(const RgbImage& img, LocalKind kind, const LocalModel& model,
                            const LocalParams& params = {}, int image_id = -1);

// BoVW of dense LBP-RGB patches with window w.
FeatureVector dense_lbp_bovw(const RgbImage& img, int window, const Codebook& cb,
                             int image_id = -1);

}  // namespace cbir
