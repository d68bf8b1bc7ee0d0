// Batch extraction over a dataset and codebook training from an image pool.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cbir/dataset.h"
#include "cbir/feature_store.h"
#include "cbir/global_descriptors.h"
#include "cbir/local_descriptors.h"

namespace cbir {

// True for the kinds extract_table can compute from pixels.
bool is_native_kind(const std::string& kind);
// Every native kind name: global kinds then local kinds.
std::vector<std::string> native_kinds();

struct ExtractOptions {
  GlobalParams global;
  LocalParams local;
  LocalModel model;  // required for local kinds
  int workers = 0;   // 0: OpenMP default
};

// One row per dataset image. Images are decoded and described in parallel;
// extract_table_reference does the same serially.
FeatureTable extract_table(const Dataset& ds, const std::string& kind, const ExtractOptions& opts);
FeatureTable extract_table_reference(const Dataset& ds, const std::string& kind, const ExtractOptions& opts);

// Supported image files under root, recursively, in sorted path order.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& root);

inline constexpr std::size_t kDescriptorSampleCap = 200'000;

// Local descriptors of every image, reduced to at most `cap` rows by
// reservoir sampling with the given seed (rows visited in image order).
std::vector<float> sample_descriptors(const std::vector<std::filesystem::path>& images, LocalKind kind,
                                      const LocalParams& params, std::size_t cap, std::uint64_t seed,
                                      int workers = 0);

// Codebook (k-means) or GMM for the kind, as its encoder needs.
LocalModel train_local_model(std::span<const float> rows, LocalKind kind, int vocabulary, std::uint64_t seed);

}  // namespace cbir
