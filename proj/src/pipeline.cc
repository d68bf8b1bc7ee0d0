#include "cbir/pipeline.h"

#include <algorithm>
#include <random>

#include "cbir/image_io.h"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;

namespace cbir {
namespace {

int thread_count(int workers) {
#ifdef _OPENMP
  return workers > 0 ? workers : omp_get_max_threads();
#else
  (void)workers;
  return 1;
#endif
}

FeatureVector describe(const RgbImage& img, const std::string& kind, const ExtractOptions& opts, int id) {
  if (const auto g = parse_global_kind(kind)) return extract_global(img, *g, opts.global, id);
  if (const auto l = parse_local_kind(kind)) return extract_local(img, *l, opts.model, opts.local, id);
  throw UsageError("'" + kind + "' is not a native descriptor kind");
}

FeatureTable extract_impl(const Dataset& ds, const std::string& kind, const ExtractOptions& opts, bool parallel) {
  if (!is_native_kind(kind)) throw UsageError("'" + kind + "' is not a native descriptor kind");
  if (const auto l = parse_local_kind(kind)) {
    const bool fv = *l == LocalKind::kDenseSiftFv;
    if (fv ? !opts.model.gmm : !opts.model.codebook) throw UsageError(kind + " needs a trained model");
  }
  const std::int64_t n = ds.size();
  std::vector<FeatureVector> rows(static_cast<std::size_t>(n));
  std::vector<std::string> errors(static_cast<std::size_t>(n));
  auto one = [&](std::int64_t i) {
    try {
      const ImageRecord& rec = ds.images[std::size_t(i)];
      rows[std::size_t(i)] = describe(read_image(rec.path), kind, opts, rec.id);
    } catch (const std::exception& e) {
      errors[std::size_t(i)] = e.what();
    }
  };
  if (parallel) {
#pragma omp parallel for schedule(dynamic, 1) num_threads(thread_count(opts.workers))
    for (std::int64_t i = 0; i < n; ++i) one(i);
  } else {
    for (std::int64_t i = 0; i < n; ++i) one(i);
  }
  for (std::int64_t i = 0; i < n; ++i) {
    if (!errors[std::size_t(i)].empty()) {
      throw DataError(ds.images[std::size_t(i)].path.string() + ": " + errors[std::size_t(i)]);
    }
  }
  if (rows.empty()) throw DataError("dataset '" + ds.name + "' has no images");
  FeatureTable t(kind, ds.name, rows.front().values.size());
  for (const FeatureVector& fv : rows) t.add(std::uint32_t(fv.image_id), std::span<const double>(fv.values));
  return t;
}

}  // namespace

bool is_native_kind(const std::string& kind) {
  return parse_global_kind(kind).has_value() || parse_local_kind(kind).has_value();
}

std::vector<std::string> native_kinds() {
  std::vector<std::string> out;
  for (GlobalKind g : kAllGlobalKinds) out.emplace_back(kind_name(g));
  for (LocalKind l : {LocalKind::kDenseSift, LocalKind::kDenseSiftVlad, LocalKind::kDenseSiftFv, LocalKind::kDenseLbpRgb}) {
    out.emplace_back(kind_name(l));
  }
  return out;
}

FeatureTable extract_table(const Dataset& ds, const std::string& kind, const ExtractOptions& opts) {
  return extract_impl(ds, kind, opts, true);
}

FeatureTable extract_table_reference(const Dataset& ds, const std::string& kind, const ExtractOptions& opts) {
  return extract_impl(ds, kind, opts, false);
}

std::vector<fs::path> list_images(const fs::path& root) {
  if (!fs::is_directory(root)) throw UsageError("image directory not found: " + root.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && is_supported_image(e.path())) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<float> sample_descriptors(const std::vector<fs::path>& images, LocalKind kind, const LocalParams& params,
                                      std::size_t cap, std::uint64_t seed, int workers) {
  if (cap == 0) throw UsageError("sample_descriptors: cap must be positive");
  const int dim = local_descriptor_dim(kind);
  std::vector<float> reservoir;
  std::mt19937_64 rng(seed);
  std::uint64_t seen = 0;
  const std::size_t batch = 64;
  for (std::size_t start = 0; start < images.size(); start += batch) {
    const std::int64_t count = std::int64_t(std::min(batch, images.size() - start));
    std::vector<LocalDescriptorSet> sets(static_cast<std::size_t>(count));
    std::vector<std::string> errors(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(dynamic, 1) num_threads(thread_count(workers))
    for (std::int64_t i = 0; i < count; ++i) {
      try {
        sets[std::size_t(i)] = extract_local_descriptors(read_image(images[start + std::size_t(i)]), kind, params);
      } catch (const std::exception& e) {
        errors[std::size_t(i)] = e.what();
      }
    }
    // Reservoir sampling in image order keeps the draw independent of threads.
    for (std::int64_t i = 0; i < count; ++i) {
      if (!errors[std::size_t(i)].empty()) {
        throw DataError(images[start + std::size_t(i)].string() + ": " + errors[std::size_t(i)]);
      }
      const LocalDescriptorSet& s = sets[std::size_t(i)];
      for (std::size_t r = 0; r < s.rows(); ++r) {
        const auto row = s.row(r);
        if (seen < cap) {
          reservoir.insert(reservoir.end(), row.begin(), row.end());
        } else {
          const std::uint64_t j = std::uniform_int_distribution<std::uint64_t>(0, seen)(rng);
          if (j < cap) std::copy(row.begin(), row.end(), reservoir.begin() + std::ptrdiff_t(j * dim));
        }
        ++seen;
      }
    }
  }
  return reservoir;
}

LocalModel train_local_model(std::span<const float> rows, LocalKind kind, int vocabulary, std::uint64_t seed) {
  const int dim = local_descriptor_dim(kind);
  LocalModel m;
  if (kind == LocalKind::kDenseSiftFv) {
    GmmOptions o;
    o.k = vocabulary;
    o.seed = seed;
    m.gmm = learn_gmm(rows, dim, o);
  } else {
    KMeansOptions o;
    o.k = vocabulary;
    o.seed = seed;
    m.codebook = learn_codebook_kmeans(rows, dim, o);
  }
  return m;
}

}  // namespace cbir
