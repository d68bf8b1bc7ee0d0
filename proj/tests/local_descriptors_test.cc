#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cbir/local_descriptors.h"
#include "synthetic.h"

namespace cbir {
namespace {

using testing::constant_image;
using testing::noise_image;
using testing::textured_image;

std::vector<float> random_rows(std::uint64_t seed, std::size_t n, int dim, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  std::vector<float> out(n * std::size_t(dim));
  for (float& v : out) v = float(g(rng));
  return out;
}

// Three tight 2-D blobs of 60 points each.
std::vector<float> blobs(std::uint64_t seed, const std::vector<std::pair<double, double>>& centers, int per) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.1);
  std::vector<float> out;
  for (const auto& [cx, cy] : centers) {
    for (int i = 0; i < per; ++i) {
      out.push_back(float(cx + g(rng)));
      out.push_back(float(cy + g(rng)));
    }
  }
  return out;
}

LocalDescriptorSet as_set(std::vector<float> data, int dim) {
  LocalDescriptorSet s;
  s.dim = dim;
  s.data = std::move(data);
  s.zero_rows.assign(s.rows(), 0);
  return s;
}

Codebook random_codebook(std::uint64_t seed, int k, int dim) {
  Codebook cb;
  cb.k = k;
  cb.dim = dim;
  cb.centroids = random_rows(seed, std::size_t(k), dim);
  return cb;
}

double sq(std::span<const float> a, std::span<const float> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (double(a[i]) - b[i]) * (double(a[i]) - b[i]);
  return s;
}

TEST(Keypoints, GridExamples) {
  const KeypointGrid big = dense_keypoints(256, 256);
  EXPECT_EQ(big.points.size(), 256u);
  EXPECT_EQ(big.points.front().x, 8);
  EXPECT_EQ(big.points.back().x, 248);
  const KeypointGrid small = dense_keypoints(32, 32);
  ASSERT_EQ(small.points.size(), 4u);
  EXPECT_EQ(small.points[3].x, 24);
  EXPECT_EQ(small.points[3].y, 24);
  EXPECT_THROW(dense_keypoints(8, 8), UsageError);
  EXPECT_EQ(dense_keypoints(64, 40, 8).points.size(), 7u * 4u);
}

TEST(DenseSift, ShapeAndUnitRows) {
  const LocalDescriptorSet s = dense_sift(to_grayscale(noise_image(64, 48, 1)), dense_keypoints(64, 48));
  EXPECT_EQ(s.dim, 128);
  EXPECT_EQ(s.rows(), 4u * 3u);
  for (std::size_t r = 0; r < s.rows(); ++r) {
    double n = 0;
    for (float v : s.row(r)) {
      EXPECT_GE(v, 0.0f);
      n += double(v) * v;
    }
    EXPECT_NEAR(n, 1.0, 1e-5);
  }
}

TEST(DenseSift, ConstantImageGivesZeroRows) {
  const LocalDescriptorSet s = dense_sift(to_grayscale(constant_image(48, 48, 9, 9, 9)), dense_keypoints(48, 48));
  for (std::size_t r = 0; r < s.rows(); ++r) {
    EXPECT_EQ(s.zero_rows[r], 1);
    for (float v : s.row(r)) EXPECT_EQ(v, 0.0f);
  }
}

TEST(DenseSift, VerticalEdgeUsesHorizontalOrientation) {
  GrayImage g(32, 32);
  for (int y = 0; y < 32; ++y) {
    for (int x = 12; x < 32; ++x) g.at(x, y) = 200;
  }
  const LocalDescriptorSet s = dense_sift(g, dense_keypoints(32, 32));
  bool any = false;
  for (std::size_t r = 0; r < s.rows(); ++r) {
    if (s.zero_rows[r]) continue;
    any = true;
    const auto row = s.row(r);
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i % 8 != 0) {
        EXPECT_EQ(row[i], 0.0f) << r << " " << i;
      }
    }
  }
  EXPECT_TRUE(any);
}

TEST(DenseSift, Deterministic) {
  const GrayImage g = to_grayscale(textured_image(64, 64, 1, 3));
  EXPECT_EQ(dense_sift(g, dense_keypoints(64, 64)).data, dense_sift(g, dense_keypoints(64, 64)).data);
}

TEST(DenseLbp, PatchDescriptorLength) {
  const LocalDescriptorSet s = dense_lbp_rgb(noise_image(48, 48, 2), dense_keypoints(48, 48));
  EXPECT_EQ(s.dim, 54);
  for (std::size_t r = 0; r < s.rows(); ++r) {
    const auto row = s.row(r);
    for (int c = 0; c < 3; ++c) {
      EXPECT_NEAR(std::accumulate(row.begin() + c * 18, row.begin() + (c + 1) * 18, 0.0), 1.0, 1e-5);
    }
  }
}

TEST(DenseLbp, BovwDimensionAndConstantImage) {
  const Codebook cb = random_codebook(3, 1024, 54);
  const FeatureVector fv = dense_lbp_bovw(noise_image(64, 64, 5), 16, cb);
  EXPECT_EQ(fv.values.size(), 1024u);
  EXPECT_EQ(fv.kind, "dense_lbp_rgb");
  // Every patch of a constant image has the same descriptor.
  const FeatureVector flat = dense_lbp_bovw(constant_image(64, 64, 30, 60, 90), 30, cb);
  EXPECT_EQ(std::count_if(flat.values.begin(), flat.values.end(), [](double v) { return v != 0; }), 1);
  EXPECT_DOUBLE_EQ(*std::max_element(flat.values.begin(), flat.values.end()), 1.0);
}

TEST(LocalKinds, NamesAndDimensions) {
  EXPECT_EQ(dimension(LocalKind::kDenseSift, default_vocabulary_size(LocalKind::kDenseSift)), 1024u);
  EXPECT_EQ(dimension(LocalKind::kDenseSiftVlad, default_vocabulary_size(LocalKind::kDenseSiftVlad)), 25600u);
  EXPECT_EQ(dimension(LocalKind::kDenseSiftFv, default_vocabulary_size(LocalKind::kDenseSiftFv)), 40960u);
  EXPECT_EQ(dimension(LocalKind::kDenseLbpRgb, default_vocabulary_size(LocalKind::kDenseLbpRgb)), 1024u);
  for (LocalKind k : {LocalKind::kDenseSift, LocalKind::kDenseSiftVlad, LocalKind::kDenseSiftFv, LocalKind::kDenseLbpRgb}) {
    EXPECT_EQ(parse_local_kind(kind_name(k)), k);
  }
  EXPECT_FALSE(parse_local_kind("dense_orb").has_value());
}

TEST(LocalKinds, MissingModelIsUsageError) {
  EXPECT_THROW(extract_local(noise_image(32, 32, 1), LocalKind::kDenseSiftFv, {}), UsageError);
  EXPECT_THROW(extract_local(noise_image(32, 32, 1), LocalKind::kDenseSift, {}), UsageError);
}

TEST(KMeans, RecoversBlobs) {
  const std::vector<std::pair<double, double>> centers = {{0, 0}, {5, 0}, {0, 5}};
  const std::vector<float> rows = blobs(1, centers, 60);
  KMeansOptions o;
  o.k = 3;
  const Codebook cb = learn_codebook_kmeans(rows, 2, o);
  for (const auto& [cx, cy] : centers) {
    double best = 1e9;
    for (int c = 0; c < 3; ++c) best = std::min(best, std::hypot(cb.centroid(c)[0] - cx, cb.centroid(c)[1] - cy));
    EXPECT_LT(best, 0.1);
  }
}

TEST(KMeans, KEqualsDistinctRowsHasZeroObjective) {
  const std::vector<float> rows = random_rows(2, 12, 3);
  KMeansOptions o;
  o.k = 12;
  const Codebook cb = learn_codebook_kmeans(rows, 3, o);
  EXPECT_EQ(cb.objective_history.back(), 0.0);
}

TEST(KMeans, DeterministicAndMonotone) {
  const std::vector<float> rows = random_rows(3, 400, 4);
  KMeansOptions o;
  o.k = 10;
  o.seed = 17;
  const Codebook a = learn_codebook_kmeans(rows, 4, o);
  const Codebook b = learn_codebook_kmeans(rows, 4, o);
  EXPECT_EQ(a.centroids, b.centroids);
  for (std::size_t i = 1; i < a.objective_history.size(); ++i) {
    EXPECT_LE(a.objective_history[i], a.objective_history[i - 1] * (1 + 1e-9));
  }
}

TEST(KMeans, TooFewDistinctRows) {
  std::vector<float> rows;
  for (int i = 0; i < 10; ++i) rows.push_back(float(i % 3));
  KMeansOptions o;
  o.k = 4;
  EXPECT_THROW(learn_codebook_kmeans(rows, 1, o), DataError);
}

TEST(AssignNearest, ParallelMatchesReference) {
  const Codebook cb = random_codebook(4, 37, 16);
  const std::vector<float> rows = random_rows(5, 3000, 16);
  std::vector<int> l1, l2;
  std::vector<double> d1, d2;
  assign_nearest(rows, cb, l1, d1);
  assign_nearest_reference(rows, cb, l2, d2);
  EXPECT_EQ(l1, l2);
  EXPECT_EQ(d1, d2);
}

TEST(Bovw, BruteForceOracle) {
  const Codebook cb = random_codebook(6, 20, 8);
  const LocalDescriptorSet s = as_set(random_rows(7, 200, 8), 8);
  std::vector<double> expected(20, 0.0);
  for (std::size_t i = 0; i < s.rows(); ++i) {
    int best = 0;
    for (int c = 1; c < 20; ++c) {
      if (sq(s.row(i), cb.centroid(c)) < sq(s.row(i), cb.centroid(best))) best = c;
    }
    expected[std::size_t(best)] += 1;
  }
  EXPECT_EQ(bovw_counts(s, cb), expected);
  EXPECT_EQ(std::accumulate(expected.begin(), expected.end(), 0.0), 200.0);
}

TEST(Bovw, DescriptorAtCentroidIsOneHot) {
  const Codebook cb = random_codebook(8, 10, 4);
  const auto c = cb.centroid(6);
  const FeatureVector fv = encode_bovw(as_set({c.begin(), c.end()}, 4), cb);
  EXPECT_EQ(fv.values[6], 1.0);
  EXPECT_EQ(std::accumulate(fv.values.begin(), fv.values.end(), 0.0), 1.0);
}

TEST(Bovw, EmptyAndMismatched) {
  const Codebook cb = random_codebook(8, 10, 4);
  EXPECT_THROW(encode_bovw(as_set({}, 4), cb), DataError);
  EXPECT_THROW(encode_bovw(as_set(random_rows(1, 3, 5), 5), cb), UsageError);
}

TEST(Vlad, ZeroResidualAtCentroids) {
  const Codebook cb = random_codebook(9, 5, 3);
  const FeatureVector fv = encode_vlad(as_set(cb.centroids, 3), cb);
  EXPECT_TRUE(fv.zero);
  EXPECT_EQ(fv.values.size(), 15u);
}

TEST(Vlad, SingleDescriptor) {
  const Codebook cb = random_codebook(10, 4, 3);
  std::vector<float> x = {cb.centroids[3] + 0.01f, cb.centroids[4] - 0.02f, cb.centroids[5]};  // near centroid 1
  const std::vector<double> r = vlad_residuals(as_set(x, 3), cb);
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double expect = i == 3 ? 0.01 : i == 4 ? -0.02 : 0.0;
    EXPECT_NEAR(r[i], expect, 1e-6) << i;
  }
  // Signed square root then L2: (0.1, -0.1 sqrt2) scales to (1, -sqrt2) / sqrt3.
  const FeatureVector fv = encode_vlad(as_set(x, 3), cb);
  EXPECT_NEAR(fv.values[3], 1 / std::sqrt(3.0), 1e-6);
  EXPECT_NEAR(fv.values[4], -std::sqrt(2.0 / 3.0), 1e-6);
}

TEST(Vlad, PermutationInvariant) {
  const Codebook cb = random_codebook(11, 8, 6);
  std::vector<float> rows = random_rows(12, 50, 6);
  const FeatureVector a = encode_vlad(as_set(rows, 6), cb);
  std::vector<std::size_t> perm(50);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(1));
  std::vector<float> shuffled;
  for (std::size_t p : perm) shuffled.insert(shuffled.end(), rows.begin() + p * 6, rows.begin() + (p + 1) * 6);
  const FeatureVector b = encode_vlad(as_set(shuffled, 6), cb);
  for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-12);
}

TEST(Gmm, SingleComponentClosedForm) {
  const std::vector<float> rows = random_rows(13, 200, 3, 2.0);
  GmmOptions o;
  o.k = 1;
  const GmmModel m = learn_gmm(rows, 3, o);
  EXPECT_NEAR(m.weights[0], 1.0, 1e-12);
  for (int j = 0; j < 3; ++j) {
    double mean = 0, var = 0;
    for (int i = 0; i < 200; ++i) mean += rows[std::size_t(i * 3 + j)];
    mean /= 200;
    for (int i = 0; i < 200; ++i) var += std::pow(rows[std::size_t(i * 3 + j)] - mean, 2);
    var /= 200;
    EXPECT_NEAR(m.means[std::size_t(j)], mean, 1e-6);
    EXPECT_NEAR(m.variances[std::size_t(j)], var, 1e-6);
  }
}

TEST(Gmm, BlobsDeterministicMonotone) {
  const std::vector<std::pair<double, double>> centers = {{0, 0}, {4, 0}, {0, 4}};
  const std::vector<float> rows = blobs(14, centers, 100);
  GmmOptions o;
  o.k = 3;
  const GmmModel a = learn_gmm(rows, 2, o);
  const GmmModel b = learn_gmm(rows, 2, o);
  EXPECT_EQ(a.means, b.means);
  for (const auto& [cx, cy] : centers) {
    double best = 1e9;
    for (int c = 0; c < 3; ++c) best = std::min(best, std::hypot(a.means[std::size_t(2 * c)] - cx, a.means[std::size_t(2 * c + 1)] - cy));
    EXPECT_LT(best, 0.1);
  }
  for (double w : a.weights) EXPECT_NEAR(w, 1.0 / 3, 1e-3);
  const auto& ll = a.log_likelihood_history;
  for (std::size_t i = 1; i < ll.size(); ++i) EXPECT_GE(ll[i], ll[i - 1] - 1e-9 * std::abs(ll[i - 1]));
  EXPECT_THROW(learn_gmm(std::span<const float>(rows).first(40), 2, o), DataError);
}

TEST(Fisher, ShapeFiniteAndStationary) {
  const std::vector<float> rows = blobs(15, {{0, 0}, {4, 0}, {0, 4}}, 200);
  GmmOptions o;
  o.k = 3;
  o.max_iters = 500;
  o.tolerance = 1e-12;
  const GmmModel m = learn_gmm(rows, 2, o);
  const LocalDescriptorSet s = as_set(rows, 2);
  const std::vector<double> g = fisher_gradients(s, m);
  ASSERT_EQ(g.size(), 2u * 3u * 2u);
  // At an EM fixed point the gradient over the training data vanishes.
  for (double v : g) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_NEAR(v, 0.0, 1e-3);
  }
  const FeatureVector fv = encode_fisher(as_set(random_rows(16, 30, 2), 2), m);
  double n = 0;
  for (double v : fv.values) {
    EXPECT_TRUE(std::isfinite(v));
    n += v * v;
  }
  EXPECT_NEAR(n, 1.0, 1e-9);
}

TEST(Fisher, PermutationInvariant) {
  const std::vector<float> rows = random_rows(17, 300, 3);
  GmmOptions o;
  o.k = 2;
  const GmmModel m = learn_gmm(rows, 3, o);
  std::vector<float> reversed;
  for (int i = 299; i >= 0; --i) reversed.insert(reversed.end(), rows.begin() + i * 3, rows.begin() + (i + 1) * 3);
  const std::vector<double> a = fisher_gradients(as_set(rows, 3), m);
  const std::vector<double> b = fisher_gradients(as_set(reversed, 3), m);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(LocalPipeline, EncodedDimensions) {
  const RgbImage img = textured_image(64, 64, 0, 1);
  const LocalDescriptorSet d = extract_local_descriptors(img, LocalKind::kDenseSift);
  LocalModel km;
  km.codebook = random_codebook(18, 30, 128);
  EXPECT_EQ(extract_local(img, LocalKind::kDenseSift, km).values.size(), 30u);
  EXPECT_EQ(extract_local(img, LocalKind::kDenseSiftVlad, km).values.size(), 30u * 128u);
  EXPECT_EQ(d.rows(), 16u);
}

}  // namespace
}  // namespace cbir
