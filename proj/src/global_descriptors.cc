#include "cbir/global_descriptors.h"

#include <string>

namespace cbir {
namespace {

struct KindInfo {
  GlobalKind kind;
  std::string_view name;
};

constexpr KindInfo kKinds[] = {
    {GlobalKind::kHistL, "hist_l"},
    {GlobalKind::kHistHV, "hist_hv"},
    {GlobalKind::kHistRgb, "hist_rgb"},
    {GlobalKind::kHistRgbNorm, "hist_rgbn"},
    {GlobalKind::kSpatialHistRgb, "spatial_hist_rgb"},
    {GlobalKind::kCoOcc, "cooc"},
    {GlobalKind::kGaborL, "gabor_l"},
    {GlobalKind::kGaborRgb, "gabor_rgb"},
    {GlobalKind::kOppGaborRgb, "opp_gabor_rgb"},
    {GlobalKind::kHog, "hog"},
    {GlobalKind::kGranulometry, "granulometry"},
    {GlobalKind::kLbpL, "lbp_l"},
    {GlobalKind::kLbpRgb, "lbp_rgb"},
};

std::vector<double> cooc_vector(const RgbImage& img, const GlobalParams& p) {
  std::vector<double> v(5, 0.0);
  for (int c = 0; c < 3; ++c) {
    const GlcmStats s = glcm_stats(channel(img, c), p.glcm_levels, p.glcm_offsets);
    v[0] += s.contrast / 3;
    v[1] += s.correlation / 3;
    v[2] += s.energy / 3;
    v[3] += s.entropy / 3;
    v[4] += s.homogeneity / 3;
  }
  return v;
}

std::vector<double> concat_channels(const RgbImage& img, auto&& per_channel) {
  std::vector<double> out;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> part = per_channel(channel(img, c));
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

}  // namespace

std::string_view kind_name(GlobalKind kind) {
  for (const KindInfo& k : kKinds) {
    if (k.kind == kind) return k.name;
  }
  return "unknown";
}

std::optional<GlobalKind> parse_global_kind(std::string_view name) {
  for (const KindInfo& k : kKinds) {
    if (k.name == name) return k.kind;
  }
  return std::nullopt;
}

std::size_t dimension(GlobalKind kind, const GlobalParams& p) {
  const std::size_t gabor = std::size_t(p.gabor.n_frequencies()) * p.gabor.n_orientations * 2;
  const std::size_t lbp = std::size_t(p.lbp_samples) + 2;
  switch (kind) {
    case GlobalKind::kHistL: return 256;
    case GlobalKind::kHistHV: return 512;
    case GlobalKind::kHistRgb: return 768;
    case GlobalKind::kHistRgbNorm: return 768;
    case GlobalKind::kSpatialHistRgb: return 1536;
    case GlobalKind::kCoOcc: return 5;
    case GlobalKind::kGaborL: return gabor;
    case GlobalKind::kGaborRgb: return 3 * gabor;
    case GlobalKind::kOppGaborRgb: {
      const std::size_t nf = p.gabor.n_frequencies();
      const std::size_t pairs = nf + (nf > 0 ? nf - 1 : 0);
      return 3 * gabor + 3 * pairs * p.gabor.n_orientations * 2;
    }
    case GlobalKind::kHog: return std::size_t(p.hog.cells_x) * p.hog.cells_y * p.hog.bins;
    case GlobalKind::kGranulometry: return 3 * 2 * std::size_t(p.granulometry.n_sizes);
    case GlobalKind::kLbpL: return lbp;
    case GlobalKind::kLbpRgb: return 3 * lbp;
  }
  return 0;
}

FeatureVector extract_global(const RgbImage& img, GlobalKind kind, const GlobalParams& p,
                             int image_id) {
  if (!img.valid()) throw UsageError("extract_global: invalid image");
  std::vector<double> raw;
  try {
    switch (kind) {
      case GlobalKind::kHistL: raw = gray_histogram(to_grayscale(img)); break;
      case GlobalKind::kHistHV: raw = hue_value_histogram(img); break;
      case GlobalKind::kHistRgb: raw = rgb_histogram(img, 0, img.height); break;
      case GlobalKind::kHistRgbNorm: raw = chromaticity_histogram(img); break;
      case GlobalKind::kSpatialHistRgb: {
        if (img.height < 2) throw UsageError("image must have at least 2 rows");
        raw = rgb_histogram(img, 0, img.height / 2);
        std::vector<double> bottom = rgb_histogram(img, img.height / 2, img.height);
        raw.insert(raw.end(), bottom.begin(), bottom.end());
        break;
      }
      case GlobalKind::kCoOcc: raw = cooc_vector(img, p); break;
      case GlobalKind::kGaborL: raw = gabor_bank_stats(to_grayscale(img), p.gabor); break;
      case GlobalKind::kGaborRgb:
        raw = concat_channels(img, [&](const GrayImage& g) { return gabor_bank_stats(g, p.gabor); });
        break;
      case GlobalKind::kOppGaborRgb: raw = opponent_gabor(img, p.gabor); break;
      case GlobalKind::kHog: raw = hog(to_grayscale(img), p.hog); break;
      case GlobalKind::kGranulometry: raw = granulometry(img, p.granulometry); break;
      case GlobalKind::kLbpL:
        raw = lbp_histogram(to_grayscale(img), p.lbp_radius, p.lbp_samples);
        break;
      case GlobalKind::kLbpRgb:
        raw = concat_channels(img, [&](const GrayImage& g) {
          return lbp_histogram(g, p.lbp_radius, p.lbp_samples);
        });
        break;
    }
  } catch (const UsageError& e) {
    throw UsageError(std::string(kind_name(kind)) + ": " + e.what());
  }
  return make_feature(image_id, std::string(kind_name(kind)), raw);
}

}  // namespace cbir
