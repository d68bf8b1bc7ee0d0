#include <algorithm>
#include <cmath>
#include <numbers>

#include "cbir/global_descriptors.h"

namespace cbir {

std::vector<double> hog(const GrayImage& img, const HogParams& params) {
  if (params.cells_x < 1 || params.cells_y < 1 || params.bins < 1) {
    throw UsageError("hog: cell grid and bin count must be positive");
  }
  if (img.width < params.cells_x || img.height < params.cells_y) {
    throw UsageError("hog: image smaller than the cell grid");
  }
  const int bins = params.bins;
  std::vector<double> h(std::size_t(params.cells_x) * params.cells_y * bins, 0.0);
  const double bin_width = std::numbers::pi / bins;

  for (int y = 0; y < img.height; ++y) {
    const int cy = std::min(params.cells_y - 1, y * params.cells_y / img.height);
    for (int x = 0; x < img.width; ++x) {
      const int cx = std::min(params.cells_x - 1, x * params.cells_x / img.width);
      const double gx = img.at(std::min(x + 1, img.width - 1), y) - img.at(std::max(x - 1, 0), y);
      const double gy = img.at(x, std::min(y + 1, img.height - 1)) - img.at(x, std::max(y - 1, 0));
      const double mag = std::hypot(gx, gy);
      if (mag == 0) continue;
      double angle = std::atan2(gy, gx);
      if (angle < 0) angle += std::numbers::pi;
      if (angle >= std::numbers::pi) angle -= std::numbers::pi;
      // Linear vote between the two nearest bin centers, wrapping at 180 degrees.
      const double pos = angle / bin_width - 0.5;
      const int b0 = int(std::floor(pos));
      const double w1 = pos - b0;
      const int lo = (b0 + bins) % bins;
      const int hi = (b0 + 1) % bins;
      double* cell = &h[(std::size_t(cy) * params.cells_x + cx) * bins];
      cell[lo] += mag * (1.0 - w1);
      cell[hi] += mag * w1;
    }
  }
  return h;
}

}  // namespace cbir
