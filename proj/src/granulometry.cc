#include <algorithm>
#include <limits>

#include "cbir/global_descriptors.h"

namespace cbir {
namespace {

struct Direction {
  int dx;
  int dy;
};

Direction direction_of(int angle, int n_angles) {
  // Image rows grow downward, so 45 degrees points up and to the right.
  constexpr Direction kFour[] = {{1, 0}, {1, -1}, {0, 1}, {1, 1}};
  if (n_angles != 4) throw UsageError("granulometry: only 4 angles are supported");
  return kFour[angle];
}

// Running min (Erode) or max over windows of 2k+1 samples, out-of-range
// samples ignored. van Herk / Gil-Werman: three comparisons per sample.
template <bool Erode>
void running_extremum(std::vector<double>& line, int k, std::vector<double>& scratch) {
  const int n = int(line.size());
  if (k == 0 || n == 0) return;
  const int w = 2 * k + 1;
  const double identity = Erode ? std::numeric_limits<double>::infinity()
                                : -std::numeric_limits<double>::infinity();
  auto pick = [](double a, double b) { return Erode ? std::min(a, b) : std::max(a, b); };

  const int ext = n + 2 * k;
  const int padded = (ext + w - 1) / w * w;
  scratch.assign(std::size_t(padded) * 3, identity);
  double* e = scratch.data();
  double* g = e + padded;
  double* h = g + padded;
  std::copy(line.begin(), line.end(), e + k);
  for (int b = 0; b < padded; b += w) {
    g[b] = e[b];
    for (int i = 1; i < w; ++i) g[b + i] = pick(g[b + i - 1], e[b + i]);
    h[b + w - 1] = e[b + w - 1];
    for (int i = w - 2; i >= 0; --i) h[b + i] = pick(h[b + i + 1], e[b + i]);
  }
  for (int i = 0; i < n; ++i) line[i] = pick(h[i], g[i + w - 1]);
}

template <bool Erode>
void line_morphology(GrayImage& img, Direction d, int k) {
  std::vector<double> line, scratch;
  std::vector<std::size_t> index;
  auto inside = [&](int x, int y) { return x >= 0 && y >= 0 && x < img.width && y < img.height; };
  for (int y0 = 0; y0 < img.height; ++y0) {
    for (int x0 = 0; x0 < img.width; ++x0) {
      if (inside(x0 - d.dx, y0 - d.dy)) continue;  // not the start of a line
      line.clear();
      index.clear();
      for (int x = x0, y = y0; inside(x, y); x += d.dx, y += d.dy) {
        index.push_back(std::size_t(y) * img.width + x);
        line.push_back(img.pixels[index.back()]);
      }
      running_extremum<Erode>(line, k, scratch);
      for (std::size_t i = 0; i < index.size(); ++i) img.pixels[index[i]] = line[i];
    }
  }
}

double volume(const GrayImage& img) {
  double v = 0;
  for (double p : img.pixels) v += p;
  return v;
}

}  // namespace

PatternSpectrum pattern_spectrum(const GrayImage& img, int angle, const GranulometryParams& params) {
  if (params.n_sizes < 1) throw UsageError("granulometry: n_sizes must be positive");
  if (angle < 0 || angle >= params.n_angles) throw UsageError("granulometry: angle out of range");
  const int longest = 2 * params.n_sizes + 1;
  if (img.width < longest || img.height < longest) {
    throw UsageError("granulometry: image smaller than the " + std::to_string(longest) +
                     "-pixel structuring element");
  }
  const Direction d = direction_of(angle, params.n_angles);
  const double scale = 255.0 * double(img.pixels.size());

  PatternSpectrum s;
  double prev_open = volume(img);
  double prev_close = prev_open;
  for (int k = 1; k <= params.n_sizes; ++k) {
    GrayImage opened = img;
    line_morphology<true>(opened, d, k);
    line_morphology<false>(opened, d, k);
    GrayImage closed = img;
    line_morphology<false>(closed, d, k);
    line_morphology<true>(closed, d, k);
    const double vo = volume(opened);
    const double vc = volume(closed);
    s.opening.push_back((prev_open - vo) / scale);
    s.closing.push_back((vc - prev_close) / scale);
    prev_open = vo;
    prev_close = vc;
  }
  return s;
}

std::vector<double> granulometry(const RgbImage& img, const GranulometryParams& params) {
  std::vector<double> out;
  for (int c = 0; c < 3; ++c) {
    const GrayImage ch = channel(img, c);
    std::vector<double> opening(params.n_sizes, 0.0), closing(params.n_sizes, 0.0);
    for (int a = 0; a < params.n_angles; ++a) {
      const PatternSpectrum s = pattern_spectrum(ch, a, params);
      for (int k = 0; k < params.n_sizes; ++k) {
        opening[k] += s.opening[k] / params.n_angles;
        closing[k] += s.closing[k] / params.n_angles;
      }
    }
    out.insert(out.end(), opening.begin(), opening.end());
    out.insert(out.end(), closing.begin(), closing.end());
  }
  return out;
}

}  // namespace cbir
