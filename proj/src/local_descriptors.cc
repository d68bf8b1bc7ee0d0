#include "cbir/local_descriptors.h"

#include <string>

namespace cbir {
namespace {

struct LocalInfo {
  LocalKind kind;
  std::string_view name;
  int vocabulary;
  int descriptor_dim;
};

constexpr LocalInfo kLocalKinds[] = {
    {LocalKind::kDenseSift, "dense_sift", 1024, 128},
    {LocalKind::kDenseSiftVlad, "dense_sift_vlad", 200, 128},
    {LocalKind::kDenseSiftFv, "dense_sift_fv", 160, 128},
    {LocalKind::kDenseLbpRgb, "dense_lbp_rgb", 1024, 54},
};

const LocalInfo& info(LocalKind kind) {
  for (const LocalInfo& i : kLocalKinds) {
    if (i.kind == kind) return i;
  }
  throw UsageError("unknown local kind");
}

}  // namespace

std::string_view kind_name(LocalKind kind) { return info(kind).name; }

std::optional<LocalKind> parse_local_kind(std::string_view name) {
  for (const LocalInfo& i : kLocalKinds) {
    if (i.name == name) return i.kind;
  }
  return std::nullopt;
}

int default_vocabulary_size(LocalKind kind) { return info(kind).vocabulary; }
int local_descriptor_dim(LocalKind kind) { return info(kind).descriptor_dim; }

std::size_t dimension(LocalKind kind, int vocabulary_size) {
  switch (kind) {
    case LocalKind::kDenseSift:
    case LocalKind::kDenseLbpRgb: return std::size_t(vocabulary_size);
    case LocalKind::kDenseSiftVlad: return std::size_t(vocabulary_size) * 128;
    case LocalKind::kDenseSiftFv: return std::size_t(2) * vocabulary_size * 128;
  }
  return 0;
}

LocalDescriptorSet extract_local_descriptors(const RgbImage& img, LocalKind kind,
                                             const LocalParams& params, int image_id) {
  LocalDescriptorSet set;
  if (kind == LocalKind::kDenseLbpRgb) {
    set = dense_lbp_rgb(img, dense_keypoints(img.width, img.height, params.step, params.lbp_window));
  } else {
    set = dense_sift(to_grayscale(img), dense_keypoints(img.width, img.height, params.step, params.patch));
  }
  set.image_id = image_id;
  return set;
}

FeatureVector extract_local(const RgbImage& img, LocalKind kind, const LocalModel& model,
                            const LocalParams& params, int image_id) {
  const LocalDescriptorSet descs = extract_local_descriptors(img, kind, params, image_id);
  FeatureVector fv;
  if (kind == LocalKind::kDenseSiftFv) {
    if (!model.gmm) throw UsageError(std::string(kind_name(kind)) + ": no GMM loaded");
    fv = encode_fisher(descs, *model.gmm);
  } else {
    if (!model.codebook) throw UsageError(std::string(kind_name(kind)) + ": no codebook loaded");
    fv = kind == LocalKind::kDenseSiftVlad ? encode_vlad(descs, *model.codebook)
                                           : encode_bovw(descs, *model.codebook);
  }
  fv.kind = std::string(kind_name(kind));
  fv.image_id = image_id;
  return fv;
}

FeatureVector dense_lbp_bovw(const RgbImage& img, int window, const Codebook& cb, int image_id) {
  LocalParams p;
  p.lbp_window = window;
  FeatureVector fv = encode_bovw(extract_local_descriptors(img, LocalKind::kDenseLbpRgb, p, image_id), cb);
  fv.kind = std::string(kind_name(LocalKind::kDenseLbpRgb));
  fv.image_id = image_id;
  return fv;
}

}  // namespace cbir
