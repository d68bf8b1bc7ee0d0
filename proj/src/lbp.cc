#include <cmath>
#include <numbers>

#include "cbir/global_descriptors.h"

namespace cbir {
namespace {

struct Sample {
  double dx;
  double dy;
};

double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : v;
}

// Neighbor offsets, counter-clockwise starting at 3 o'clock. When the count
// is a multiple of four the first quadrant is rotated exactly onto the
// others, so rotating the image by 90 degrees permutes samples bit-exactly.
std::vector<Sample> sample_offsets(int radius, int samples) {
  std::vector<Sample> s(samples);
  const int quarter = samples % 4 == 0 ? samples / 4 : samples;
  for (int p = 0; p < quarter; ++p) {
    const double a = 2.0 * std::numbers::pi * p / samples;
    s[p] = {snap(radius * std::cos(a)), snap(-radius * std::sin(a))};
  }
  for (int p = quarter; p < samples; ++p) s[p] = {s[p - quarter].dy, -s[p - quarter].dx};
  return s;
}

double bilinear(const GrayImage& img, double x, double y) {
  const int x0 = int(std::floor(x));
  const int y0 = int(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;
  const double v00 = img.at(x0, y0);
  if (fx == 0 && fy == 0) return v00;
  const double v10 = fx > 0 ? img.at(x0 + 1, y0) : v00;
  const double v01 = fy > 0 ? img.at(x0, y0 + 1) : v00;
  const double v11 = (fx > 0 && fy > 0) ? img.at(x0 + 1, y0 + 1) : (fx > 0 ? v10 : v01);
  return (1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10 + (1 - fx) * fy * v01 + fx * fy * v11;
}

}  // namespace

std::vector<int> lbp_codes(const GrayImage& img, int radius, int samples) {
  if (radius < 1 || samples < 2) throw UsageError("lbp: radius >= 1 and samples >= 2 required");
  if (img.width <= 2 * radius + 1 || img.height <= 2 * radius + 1) {
    throw UsageError("lbp: image smaller than the " + std::to_string(2 * radius + 2) +
                     "-pixel minimum support");
  }
  const std::vector<Sample> offsets = sample_offsets(radius, samples);
  std::vector<int> codes(img.pixels.size(), -1);
  std::vector<int> bits(samples);
  for (int y = radius; y < img.height - radius; ++y) {
    for (int x = radius; x < img.width - radius; ++x) {
      const double center = img.at(x, y);
      int ones = 0;
      for (int p = 0; p < samples; ++p) {
        const double v = bilinear(img, x + offsets[p].dx, y + offsets[p].dy);
        bits[p] = v >= center - 1e-9 ? 1 : 0;
        ones += bits[p];
      }
      int transitions = 0;
      for (int p = 0; p < samples; ++p) transitions += bits[p] != bits[(p + 1) % samples];
      codes[std::size_t(y) * img.width + x] = transitions <= 2 ? ones : samples + 1;
    }
  }
  return codes;
}

std::vector<double> lbp_histogram(const GrayImage& img, int radius, int samples) {
  std::vector<double> h(samples + 2, 0.0);
  for (int code : lbp_codes(img, radius, samples)) {
    if (code >= 0) h[code] += 1.0;
  }
  return h;
}

}  // namespace cbir
