#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "cbir/global_descriptors.h"

namespace cbir {
namespace {

// The FFTW planner is not thread-safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n)
      : data(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {}
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  fftw_complex* data;
};

struct FftwPlan {
  FftwPlan(int rows, int cols, fftw_complex* in, fftw_complex* out, int sign) {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_dft_2d(rows, cols, in, out, sign, FFTW_ESTIMATE);
  }
  ~FftwPlan() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  FftwPlan(const FftwPlan&) = delete;
  FftwPlan& operator=(const FftwPlan&) = delete;
  fftw_plan plan;
};

// Symmetric reflection, valid for any index.
int mirror(int i, int n) {
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

double signed_frequency(int k, int n) { return (k <= n / 2 ? k : k - n) / double(n); }

double wrap_angle(double a) {
  while (a > std::numbers::pi) a -= 2 * std::numbers::pi;
  while (a <= -std::numbers::pi) a += 2 * std::numbers::pi;
  return a;
}

void check_params(const GaborBankParams& p) {
  if (p.frequencies.empty() || p.n_orientations < 1) {
    throw UsageError("gabor: need at least one frequency and one orientation");
  }
  for (double f : p.frequencies) {
    if (!(f > 0 && f < 0.5)) throw UsageError("gabor: frequencies must lie in (0, 0.5)");
  }
}

void mean_std(const GrayImage& m, double& mean, double& stddev) {
  double s = 0, s2 = 0;
  for (double v : m.pixels) s += v;
  mean = s / double(m.pixels.size());
  for (double v : m.pixels) s2 += (v - mean) * (v - mean);
  stddev = std::sqrt(s2 / double(m.pixels.size()));
}

}  // namespace

std::vector<GrayImage> gabor_magnitudes(const GrayImage& img, const GaborBankParams& params) {
  check_params(params);
  if (img.width < 8 || img.height < 8) throw UsageError("gabor: image smaller than 8x8");

  const int n_filters = params.n_frequencies() * params.n_orientations;
  const auto [lo, hi] = std::minmax_element(img.pixels.begin(), img.pixels.end());
  if (*lo == *hi) {
    // Zero-mean filters give an identically zero response.
    return std::vector<GrayImage>(n_filters, GrayImage(img.width, img.height, 0.0));
  }

  const double f_min = *std::min_element(params.frequencies.begin(), params.frequencies.end());
  const double spatial_sigma = 1.0 / (2 * std::numbers::pi * params.relative_bandwidth * f_min);
  const int pad = int(std::ceil(3 * spatial_sigma));
  const int pw = img.width + 2 * pad;
  const int ph = img.height + 2 * pad;
  const std::size_t n = std::size_t(pw) * ph;

  FftwBuffer spatial(n), spectrum(n), product(n), response(n);
  for (int y = 0; y < ph; ++y) {
    const int sy = mirror(y - pad, img.height);
    for (int x = 0; x < pw; ++x) {
      spatial.data[std::size_t(y) * pw + x][0] = img.at(mirror(x - pad, img.width), sy);
      spatial.data[std::size_t(y) * pw + x][1] = 0.0;
    }
  }
  FftwPlan forward(ph, pw, spatial.data, spectrum.data, FFTW_FORWARD);
  FftwPlan backward(ph, pw, product.data, response.data, FFTW_BACKWARD);
  fftw_execute(forward.plan);

  std::vector<GrayImage> out;
  out.reserve(n_filters);
  for (double f : params.frequencies) {
    const double sigma_f = params.relative_bandwidth * f;
    for (int o = 0; o < params.n_orientations; ++o) {
      const double theta = o * std::numbers::pi / params.n_orientations;
      for (int ky = 0; ky < ph; ++ky) {
        const double v = signed_frequency(ky, ph);
        for (int kx = 0; kx < pw; ++kx) {
          const double u = signed_frequency(kx, pw);
          const std::size_t i = std::size_t(ky) * pw + kx;
          double gain = 0.0;
          if (kx != 0 || ky != 0) {
            const double rho = std::hypot(u, v);
            // Image rows grow downward; flip v so angles are counter-clockwise.
            const double dtheta = wrap_angle(std::atan2(-v, u) - theta);
            gain = std::exp(-(rho - f) * (rho - f) / (2 * sigma_f * sigma_f)) *
                   std::exp(-dtheta * dtheta / (2 * params.angular_sigma * params.angular_sigma));
          }
          product.data[i][0] = spectrum.data[i][0] * gain;
          product.data[i][1] = spectrum.data[i][1] * gain;
        }
      }
      fftw_execute(backward.plan);
      GrayImage mag(img.width, img.height);
      for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
          const fftw_complex& c = response.data[std::size_t(y + pad) * pw + x + pad];
          mag.at(x, y) = std::hypot(c[0], c[1]) / double(n);
        }
      }
      out.push_back(std::move(mag));
    }
  }
  return out;
}

std::vector<double> gabor_bank_stats(const GrayImage& img, const GaborBankParams& params) {
  std::vector<double> stats;
  for (const GrayImage& m : gabor_magnitudes(img, params)) {
    double mean, stddev;
    mean_std(m, mean, stddev);
    stats.push_back(mean);
    stats.push_back(stddev);
  }
  return stats;
}

std::vector<double> opponent_gabor(const RgbImage& img, const GaborBankParams& params) {
  std::vector<std::vector<GrayImage>> mags;
  std::vector<double> out;
  for (int c = 0; c < 3; ++c) {
    mags.push_back(gabor_magnitudes(channel(img, c), params));
    for (const GrayImage& m : mags.back()) {
      double mean, stddev;
      mean_std(m, mean, stddev);
      out.push_back(mean);
      out.push_back(stddev);
    }
  }

  // Each magnitude map scaled to unit RMS; a zero map stays zero.
  for (auto& per_channel : mags) {
    for (GrayImage& m : per_channel) {
      double s2 = 0;
      for (double v : m.pixels) s2 += v * v;
      const double rms = std::sqrt(s2 / double(m.pixels.size()));
      if (rms > 0) {
        for (double& v : m.pixels) v /= rms;
      }
    }
  }

  const int nf = params.n_frequencies();
  const int no = params.n_orientations;
  std::vector<std::pair<int, int>> scale_pairs;
  for (int m = 0; m < nf; ++m) scale_pairs.emplace_back(m, m);
  for (int m = 0; m + 1 < nf; ++m) scale_pairs.emplace_back(m, m + 1);

  constexpr std::pair<int, int> kChannelPairs[] = {{0, 1}, {0, 2}, {1, 2}};
  GrayImage diff(img.width, img.height);
  for (const auto& [ci, cj] : kChannelPairs) {
    for (const auto& [mi, mj] : scale_pairs) {
      for (int o = 0; o < no; ++o) {
        const GrayImage& a = mags[ci][mi * no + o];
        const GrayImage& b = mags[cj][mj * no + o];
        for (std::size_t k = 0; k < diff.pixels.size(); ++k) diff.pixels[k] = a.pixels[k] - b.pixels[k];
        double mean, stddev;
        mean_std(diff, mean, stddev);
        out.push_back(mean);
        out.push_back(stddev);
      }
    }
  }
  return out;
}

}  // namespace cbir
