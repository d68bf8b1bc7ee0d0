#include <algorithm>
#include <cmath>

#include "cbir/global_descriptors.h"

namespace cbir {
namespace {

int bin_of(double v, int bins, double range) {
  const int b = int(std::floor(v * bins / range));
  return std::clamp(b, 0, bins - 1);
}

}  // namespace

std::vector<double> gray_histogram(const GrayImage& gray) {
  std::vector<double> h(256, 0.0);
  for (double v : gray.pixels) h[bin_of(v, 256, 256.0)] += 1.0;
  return h;
}

std::vector<double> hue_value_histogram(const RgbImage& img) {
  std::vector<double> h(512, 0.0);
  const std::size_t n = std::size_t(img.width) * img.height;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = img.pixels[3 * i], g = img.pixels[3 * i + 1], b = img.pixels[3 * i + 2];
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double delta = mx - mn;
    double hue = 0.0;
    if (delta > 0) {
      if (mx == r) {
        hue = 60.0 * std::fmod((g - b) / delta, 6.0);
      } else if (mx == g) {
        hue = 60.0 * ((b - r) / delta + 2.0);
      } else {
        hue = 60.0 * ((r - g) / delta + 4.0);
      }
      if (hue < 0) hue += 360.0;
    }
    h[bin_of(hue, 256, 360.0)] += 1.0;
    h[256 + bin_of(mx, 256, 256.0)] += 1.0;
  }
  return h;
}

std::vector<double> rgb_histogram(const RgbImage& img, int y_begin, int y_end) {
  std::vector<double> h(768, 0.0);
  for (int y = y_begin; y < y_end; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) h[256 * c + img.at(x, y, c)] += 1.0;
    }
  }
  return h;
}

std::vector<double> chromaticity_histogram(const RgbImage& img) {
  std::vector<double> h(768, 0.0);
  const std::size_t n = std::size_t(img.width) * img.height;
  for (std::size_t i = 0; i < n; ++i) {
    const double sum = double(img.pixels[3 * i]) + img.pixels[3 * i + 1] + img.pixels[3 * i + 2];
    for (int c = 0; c < 3; ++c) {
      const double chroma = sum > 0 ? img.pixels[3 * i + c] / sum : 1.0 / 3.0;
      h[256 * c + bin_of(chroma, 256, 1.0)] += 1.0;
    }
  }
  return h;
}

}  // namespace cbir
