#include "cbir/core.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace cbir {

GrayImage to_grayscale(const RgbImage& img) {
  GrayImage out(img.width, img.height);
  const std::size_t n = std::size_t(img.width) * img.height;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* p = &img.pixels[i * 3];
    out.pixels[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
  }
  return out;
}

GrayImage channel(const RgbImage& img, int c) {
  GrayImage out(img.width, img.height);
  const std::size_t n = std::size_t(img.width) * img.height;
  for (std::size_t i = 0; i < n; ++i) out.pixels[i] = img.pixels[i * 3 + c];
  return out;
}

Normalized l2_normalize(std::span<const double> v) {
  double scale = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw DataError("l2_normalize: non-finite entry at index " + std::to_string(i));
    }
    scale = std::max(scale, std::abs(v[i]));
  }
  Normalized out;
  out.values.assign(v.begin(), v.end());
  if (scale == 0.0) {
    out.zero = true;
    return out;
  }
  // Scale first so that squaring cannot overflow or underflow.
  double sum = 0.0;
  for (double x : v) sum += (x / scale) * (x / scale);
  const double norm = scale * std::sqrt(sum);
  for (double& x : out.values) x /= norm;
  return out;
}

FeatureVector make_feature(int image_id, std::string kind, std::span<const double> raw) {
  Normalized n = l2_normalize(raw);
  FeatureVector fv;
  fv.image_id = image_id;
  fv.kind = std::move(kind);
  fv.values = std::move(n.values);
  fv.zero = n.zero;
  return fv;
}

}  // namespace cbir
