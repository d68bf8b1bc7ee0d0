#include <algorithm>
#include <cmath>
#include <numbers>

#include "cbir/global_descriptors.h"
#include "cbir/local_descriptors.h"

namespace cbir {
namespace {

constexpr int kCells = 4;
constexpr int kOrientations = 8;
constexpr int kSiftDim = kCells * kCells * kOrientations;

void normalize_in_place(std::span<float> v) {
  double s = 0;
  for (float x : v) s += double(x) * x;
  if (s == 0) return;
  const double inv = 1.0 / std::sqrt(s);
  for (float& x : v) x = float(x * inv);
}

}  // namespace

KeypointGrid dense_keypoints(int width, int height, int step, int patch) {
  if (step < 1 || patch < 2) throw UsageError("dense_keypoints: step >= 1 and patch >= 2 required");
  KeypointGrid grid;
  grid.step = step;
  grid.patch = patch;
  const int half = patch / 2;
  for (int y = half; y + (patch - half) <= height; y += step) {
    for (int x = half; x + (patch - half) <= width; x += step) grid.points.push_back({x, y});
  }
  if (grid.points.empty()) {
    throw UsageError("dense_keypoints: " + std::to_string(width) + "x" + std::to_string(height) +
                     " image has no room for a " + std::to_string(patch) + "-pixel patch");
  }
  return grid;
}

LocalDescriptorSet dense_sift(const GrayImage& img, const KeypointGrid& grid) {
  const int w = img.width, h = img.height;
  std::vector<double> mag(std::size_t(w) * h), ori(std::size_t(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = 0.5 * (img.at(std::min(x + 1, w - 1), y) - img.at(std::max(x - 1, 0), y));
      const double gy = 0.5 * (img.at(x, std::min(y + 1, h - 1)) - img.at(x, std::max(y - 1, 0)));
      double a = std::atan2(gy, gx);
      if (a < 0) a += 2 * std::numbers::pi;
      mag[std::size_t(y) * w + x] = std::hypot(gx, gy);
      ori[std::size_t(y) * w + x] = a;
    }
  }

  LocalDescriptorSet set;
  set.dim = kSiftDim;
  set.data.assign(grid.points.size() * kSiftDim, 0.0f);
  set.zero_rows.assign(grid.points.size(), 0);

  const int patch = grid.patch;
  const int half = patch / 2;
  const double cell = double(patch) / kCells;
  const double sigma = patch / 2.0;
  std::vector<double> hist(kSiftDim);

  for (std::size_t p = 0; p < grid.points.size(); ++p) {
    const Keypoint kp = grid.points[p];
    std::fill(hist.begin(), hist.end(), 0.0);
    for (int y = kp.y - half; y < kp.y - half + patch; ++y) {
      if (y < 0 || y >= h) continue;
      for (int x = kp.x - half; x < kp.x - half + patch; ++x) {
        if (x < 0 || x >= w) continue;
        const double m = mag[std::size_t(y) * w + x];
        if (m == 0) continue;
        const double rx = x + 0.5 - kp.x;
        const double ry = y + 0.5 - kp.y;
        const double weight = m * std::exp(-(rx * rx + ry * ry) / (2 * sigma * sigma));
        // Trilinear vote: two cells per axis, two orientation bins.
        const double bx = rx / cell + (kCells - 1) / 2.0;
        const double by = ry / cell + (kCells - 1) / 2.0;
        const double bo = ori[std::size_t(y) * w + x] * kOrientations / (2 * std::numbers::pi);
        const int x0 = int(std::floor(bx)), y0 = int(std::floor(by)), o0 = int(std::floor(bo));
        const double fx = bx - x0, fy = by - y0, fo = bo - o0;
        for (int dy = 0; dy < 2; ++dy) {
          const int cy = y0 + dy;
          if (cy < 0 || cy >= kCells) continue;
          const double wy = dy ? fy : 1 - fy;
          for (int dx = 0; dx < 2; ++dx) {
            const int cx = x0 + dx;
            if (cx < 0 || cx >= kCells) continue;
            const double wx = dx ? fx : 1 - fx;
            for (int d_o = 0; d_o < 2; ++d_o) {
              const int o = (o0 + d_o) % kOrientations;
              const double wo = d_o ? fo : 1 - fo;
              hist[(cy * kCells + cx) * kOrientations + o] += weight * wx * wy * wo;
            }
          }
        }
      }
    }
    std::span<float> row(set.data.data() + p * kSiftDim, kSiftDim);
    for (int i = 0; i < kSiftDim; ++i) row[i] = float(hist[i]);
    normalize_in_place(row);
    bool zero = true;
    for (float& v : row) {
      v = std::min(v, 0.2f);
      zero = zero && v == 0.0f;
    }
    normalize_in_place(row);
    set.zero_rows[p] = zero;
  }
  return set;
}

LocalDescriptorSet dense_lbp_rgb(const RgbImage& img, const KeypointGrid& grid) {
  constexpr int kBins = 18;
  LocalDescriptorSet set;
  set.dim = 3 * kBins;
  set.data.assign(grid.points.size() * set.dim, 0.0f);
  set.zero_rows.assign(grid.points.size(), 0);
  const int half = grid.patch / 2;
  for (int c = 0; c < 3; ++c) {
    const std::vector<int> codes = lbp_codes(channel(img, c), 2, 16);
    for (std::size_t p = 0; p < grid.points.size(); ++p) {
      const Keypoint kp = grid.points[p];
      double counts[kBins] = {};
      double total = 0;
      for (int y = std::max(0, kp.y - half); y < std::min(img.height, kp.y - half + grid.patch); ++y) {
        for (int x = std::max(0, kp.x - half); x < std::min(img.width, kp.x - half + grid.patch); ++x) {
          const int code = codes[std::size_t(y) * img.width + x];
          if (code < 0) continue;
          counts[code] += 1;
          total += 1;
        }
      }
      float* row = set.data.data() + p * set.dim + c * kBins;
      for (int b = 0; b < kBins; ++b) row[b] = total > 0 ? float(counts[b] / total) : 0.0f;
    }
  }
  for (std::size_t p = 0; p < grid.points.size(); ++p) {
    const auto r = set.row(p);
    set.zero_rows[p] = std::all_of(r.begin(), r.end(), [](float v) { return v == 0.0f; });
  }
  return set;
}

}  // namespace cbir
