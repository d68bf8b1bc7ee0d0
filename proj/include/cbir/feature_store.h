// Feature tables and their on-disk container.
//
// Container layout (little-endian):
//   "CBF1" | version u32 | kind (u32 len + bytes) | dataset (u32 len + bytes)
//   | D u32 | count u32 | count x (id u32, D x f32)
// Codebooks and GMMs use the same container with kinds "codebook.kmeans" and
// "codebook.gmm".

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cbir/core.h"
#include "cbir/local_descriptors.h"

namespace cbir {

inline constexpr std::uint32_t kContainerVersion = 1;

class FeatureTable {
 public:
  FeatureTable() = default;
  FeatureTable(std::string kind, std::string dataset, std::size_t dim);

  const std::string& kind() const { return kind_; }
  const std::string& dataset() const { return dataset_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }

  // Throws DataError on a duplicate id or a length mismatch.
  void add(std::uint32_t id, std::span<const float> values);
  void add(std::uint32_t id, std::span<const double> values);

  std::uint32_t id_at(std::size_t row) const { return ids_[row]; }
  std::span<const float> row(std::size_t r) const { return {data_.data() + r * dim_, dim_}; }
  std::span<const std::uint32_t> ids() const { return ids_; }
  std::span<const float> data() const { return data_; }

  std::optional<std::size_t> find(std::uint32_t id) const;
  bool contains(std::uint32_t id) const { return find(id).has_value(); }
  // Throws DataError when absent.
  std::span<const float> vector_of(std::uint32_t id) const;
  FeatureVector feature(std::uint32_t id) const;

  // True when every entry is >= 0 (needed by chi-square and intersection).
  bool nonnegative() const { return negative_entries_ == 0; }

  // Rows ordered by id.
  void sort_by_id();

  friend bool operator==(const FeatureTable& a, const FeatureTable& b);

 private:
  std::string kind_;
  std::string dataset_;
  std::size_t dim_ = 0;
  std::vector<std::uint32_t> ids_;
  std::vector<float> data_;
  std::vector<std::int64_t> row_of_;  // id -> row or -1
  std::size_t negative_entries_ = 0;
};

// `manifest` additionally writes <path>.json with a human-readable summary.
void save_table(const FeatureTable& table, const std::filesystem::path& path, bool manifest = false);
FeatureTable load_table(const std::filesystem::path& path);

struct IngestOptions {
  // Number of rows expected when rows carry no ids (0 disables the check).
  std::size_t expected_rows = 0;
  // First column of text input is the image id.
  bool first_column_is_id = false;
};

// Reads delimited text (comma and/or whitespace, one row per image in id
// order) or a .cbf container. Rows not already unit-norm within 1e-4 are
// L2-normalized.
FeatureTable ingest_external(const std::filesystem::path& path, const std::string& kind,
                             const std::string& dataset, const IngestOptions& opts = {});

void save_codebook(const Codebook& cb, const std::filesystem::path& path);
Codebook load_codebook(const std::filesystem::path& path);
void save_gmm(const GmmModel& gmm, const std::filesystem::path& path);
GmmModel load_gmm(const std::filesystem::path& path);

}  // namespace cbir
