// Class-per-directory image collections and their ground truth.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace cbir {

struct ImageRecord {
  int id = 0;
  std::filesystem::path path;
  int width = 0;
  int height = 0;
  int class_index = 0;
};

struct Dataset {
  std::string name;
  std::vector<ImageRecord> images;   // images[i].id == i
  std::vector<std::string> classes;  // sorted lexicographically
  std::vector<int> class_of;         // image id -> class index
  std::vector<std::string> warnings;

  int size() const { return int(images.size()); }
  int class_size(int class_index) const;
  // Number of relevant images for a query: its class minus itself.
  int ground_truth_size(int image_id) const { return class_size(class_of[image_id]) - 1; }
  bool same_class(int a, int b) const { return class_of[a] == class_of[b]; }
};

// Loads <root>/<class>/<image>. Classes are sorted by name and image ids are
// assigned in sorted filename order. Every image is decoded once to check it
// and to record its size.
Dataset load_dataset(const std::filesystem::path& root);

// Builds a dataset from labels alone (no image files), e.g. for ingested or
// synthetic feature tables.
Dataset dataset_from_labels(std::string name, const std::vector<int>& class_of,
                            std::vector<std::string> classes = {});

// JSON manifest with names, ids, paths and labels.
void save_manifest(const Dataset& ds, const std::filesystem::path& path);
Dataset load_manifest(const std::filesystem::path& path);

// `source` is either an image tree or a manifest file.
Dataset open_dataset(const std::filesystem::path& source);

}  // namespace cbir
