// Global hand-crafted descriptors: color histograms, co-occurrence statistics,
// Gabor filter banks, HOG, granulometries and LBP.
//
// Every extractor returns an L2-normalized FeatureVector whose length equals
// dimension(kind, params).

#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cbir/core.h"

namespace cbir {

enum class GlobalKind {
  kHistL,           // hist_l, 256
  kHistHV,          // hist_hv, 512
  kHistRgb,         // hist_rgb, 768
  kHistRgbNorm,     // hist_rgbn, 768
  kSpatialHistRgb,  // spatial_hist_rgb, 1536
  kCoOcc,           // cooc, 5
  kGaborL,          // gabor_l, 32
  kGaborRgb,        // gabor_rgb, 96
  kOppGaborRgb,     // opp_gabor_rgb, 264
  kHog,             // hog, 81 by default
  kGranulometry,    // granulometry, 78
  kLbpL,            // lbp_l, 18
  kLbpRgb,          // lbp_rgb, 54
};

inline constexpr std::array<GlobalKind, 13> kAllGlobalKinds = {
    GlobalKind::kHistL,       GlobalKind::kHistHV,   GlobalKind::kHistRgb,
    GlobalKind::kHistRgbNorm, GlobalKind::kSpatialHistRgb, GlobalKind::kCoOcc,
    GlobalKind::kGaborL,      GlobalKind::kGaborRgb, GlobalKind::kOppGaborRgb,
    GlobalKind::kHog,         GlobalKind::kGranulometry,   GlobalKind::kLbpL,
    GlobalKind::kLbpRgb};

std::string_view kind_name(GlobalKind kind);
std::optional<GlobalKind> parse_global_kind(std::string_view name);

struct GaborBankParams {
  // Center frequencies in cycles/pixel, highest first.
  std::vector<double> frequencies = {0.4, 0.2, 0.1, 0.05};
  int n_orientations = 4;
  // Radial Gaussian width in the frequency domain, relative to the center
  // frequency (0.3 is roughly a one-octave bandwidth).
  double relative_bandwidth = 0.3;
  // Angular Gaussian width in radians.
  double angular_sigma = 0.39;

  int n_frequencies() const { return int(frequencies.size()); }
};

struct HogParams {
  int cells_x = 3;
  int cells_y = 3;
  int bins = 9;
};

struct GlcmOffset {
  int dx;
  int dy;
};

struct GranulometryParams {
  int n_sizes = 13;  // line lengths 3, 5, ..., 2*n_sizes+1
  int n_angles = 4;  // 0, 45, 90, 135 degrees
};

struct GlobalParams {
  GaborBankParams gabor;
  HogParams hog;
  GranulometryParams granulometry;
  int glcm_levels = 32;
  std::vector<GlcmOffset> glcm_offsets = {{1, 0}, {0, 1}, {1, 1}, {1, -1}};
  int lbp_radius = 2;
  int lbp_samples = 16;
};

std::size_t dimension(GlobalKind kind, const GlobalParams& params = {});

FeatureVector extract_global(const RgbImage& img, GlobalKind kind,
                             const GlobalParams& params = {}, int image_id = -1);

// --- Component operations, exposed for direct use and testing. ---

// Histograms return raw counts (not normalized).
std::vector<double> gray_histogram(const GrayImage& gray);
std::vector<double> hue_value_histogram(const RgbImage& img);
std::vector<double> rgb_histogram(const RgbImage& img, int y_begin, int y_end);
std::vector<double> chromaticity_histogram(const RgbImage& img);

struct GlcmStats {
  double contrast = 0;
  double correlation = 0;
  double energy = 0;
  double entropy = 0;
  double homogeneity = 0;
};

// Symmetric, normalized co-occurrence matrices, one per offset; statistics
// averaged over offsets. Gray values are quantized as floor(v * levels / 256).
// A constant image has undefined correlation; 0 is returned for it.
GlcmStats glcm_stats(const GrayImage& img, int levels, std::span<const GlcmOffset> offsets);

// Rotation-invariant uniform (riu2) LBP: samples + 2 bins, counted over every
// pixel at least `radius` away from the border. Neighbors are bilinearly
// interpolated.
std::vector<double> lbp_histogram(const GrayImage& img, int radius = 2, int samples = 16);

// Per-pixel riu2 codes; -1 marks pixels too close to the border.
std::vector<int> lbp_codes(const GrayImage& img, int radius = 2, int samples = 16);

// Mean and standard deviation of the response magnitude of every filter, in
// frequency-major order: [f0o0 mean, f0o0 std, f0o1 mean, ...].
std::vector<double> gabor_bank_stats(const GrayImage& img, const GaborBankParams& params);

// Response magnitudes of every filter, frequency-major.
std::vector<GrayImage> gabor_magnitudes(const GrayImage& img, const GaborBankParams& params);

// Monochrome stats of the three channels followed by opponent stats for the
// channel pairs (R,G), (R,B), (G,B) at equal and adjacent frequencies.
std::vector<double> opponent_gabor(const RgbImage& img, const GaborBankParams& params);

std::vector<double> hog(const GrayImage& img, const HogParams& params);

struct PatternSpectrum {
  std::vector<double> opening;  // loss of volume between line lengths 2k-1 and 2k+1
  std::vector<double> closing;  // gain of volume between the same lengths
};

// Opening/closing pattern spectrum of one channel with line structuring
// elements at angle index `angle` (angle * 180 / n_angles degrees).
PatternSpectrum pattern_spectrum(const GrayImage& img, int angle, const GranulometryParams& params);

// Per channel: angle-averaged opening then closing spectrum.
std::vector<double> granulometry(const RgbImage& img, const GranulometryParams& params);

}  // namespace cbir
