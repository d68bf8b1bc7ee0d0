#include <algorithm>
#include <cmath>

#include "cbir/global_descriptors.h"

namespace cbir {

GlcmStats glcm_stats(const GrayImage& img, int levels, std::span<const GlcmOffset> offsets) {
  if (levels < 2) throw UsageError("glcm_stats: levels must be >= 2");
  if (offsets.empty()) throw UsageError("glcm_stats: no offsets");

  std::vector<int> q(img.pixels.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    q[i] = std::clamp(int(std::floor(img.pixels[i] * levels / 256.0)), 0, levels - 1);
  }

  GlcmStats avg;
  std::vector<double> m(std::size_t(levels) * levels);
  for (const GlcmOffset& off : offsets) {
    std::fill(m.begin(), m.end(), 0.0);
    double total = 0.0;
    for (int y = 0; y < img.height; ++y) {
      const int y2 = y + off.dy;
      if (y2 < 0 || y2 >= img.height) continue;
      for (int x = 0; x < img.width; ++x) {
        const int x2 = x + off.dx;
        if (x2 < 0 || x2 >= img.width) continue;
        const int a = q[std::size_t(y) * img.width + x];
        const int b = q[std::size_t(y2) * img.width + x2];
        m[std::size_t(a) * levels + b] += 1.0;
        m[std::size_t(b) * levels + a] += 1.0;
        total += 2.0;
      }
    }
    if (total == 0) throw UsageError("glcm_stats: image too small for offset");
    for (double& v : m) v /= total;

    double mu = 0.0;  // symmetric: row and column marginals coincide
    for (int i = 0; i < levels; ++i) {
      for (int j = 0; j < levels; ++j) mu += i * m[std::size_t(i) * levels + j];
    }
    double var = 0.0;
    GlcmStats s;
    for (int i = 0; i < levels; ++i) {
      for (int j = 0; j < levels; ++j) {
        const double p = m[std::size_t(i) * levels + j];
        if (p == 0) continue;
        const double d = i - j;
        s.contrast += d * d * p;
        s.energy += p * p;
        s.entropy -= p * std::log(p);
        s.homogeneity += p / (1.0 + std::abs(d));
        s.correlation += (i - mu) * (j - mu) * p;
        var += (i - mu) * (i - mu) * p;
      }
    }
    s.correlation = var > 1e-12 ? s.correlation / var : 0.0;

    avg.contrast += s.contrast;
    avg.correlation += s.correlation;
    avg.energy += s.energy;
    avg.entropy += s.entropy;
    avg.homogeneity += s.homogeneity;
  }
  const double k = double(offsets.size());
  avg.contrast /= k;
  avg.correlation /= k;
  avg.energy /= k;
  avg.entropy /= k;
  avg.homogeneity /= k;
  return avg;
}

}  // namespace cbir
