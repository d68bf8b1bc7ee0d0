#include "cbir/dataset.h"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "cbir/core.h"
#include "cbir/image_io.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cbir {

int Dataset::class_size(int class_index) const {
  return int(std::count(class_of.begin(), class_of.end(), class_index));
}

Dataset load_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError("dataset root not found: " + root.string());

  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end(),
            [](const fs::path& a, const fs::path& b) {
              return a.filename().string() < b.filename().string();
            });
  if (class_dirs.empty()) throw DataError("no classes in " + root.string());

  Dataset ds;
  ds.name = fs::absolute(root).lexically_normal().filename().string();
  if (ds.name.empty()) ds.name = fs::absolute(root).lexically_normal().parent_path().filename().string();

  for (const fs::path& dir : class_dirs) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && is_supported_image(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
      return a.filename().string() < b.filename().string();
    });
    const int class_index = int(ds.classes.size());
    ds.classes.push_back(dir.filename().string());
    if (files.size() < 2) {
      ds.warnings.push_back("class '" + ds.classes.back() + "' has " + std::to_string(files.size()) +
                            " image(s); its queries have an empty or tiny ground truth");
    }
    for (const fs::path& f : files) {
      RgbImage img = read_image(f);
      ImageRecord rec;
      rec.id = int(ds.images.size());
      rec.path = f;
      rec.width = img.width;
      rec.height = img.height;
      rec.class_index = class_index;
      ds.images.push_back(std::move(rec));
      ds.class_of.push_back(class_index);
    }
  }
  return ds;
}

Dataset dataset_from_labels(std::string name, const std::vector<int>& class_of,
                            std::vector<std::string> classes) {
  Dataset ds;
  ds.name = std::move(name);
  int n_classes = 0;
  for (int c : class_of) {
    if (c < 0) throw UsageError("dataset_from_labels: negative class index");
    n_classes = std::max(n_classes, c + 1);
  }
  if (classes.empty()) {
    for (int c = 0; c < n_classes; ++c) classes.push_back("class" + std::to_string(c));
  }
  if (int(classes.size()) < n_classes) throw UsageError("dataset_from_labels: missing class names");
  ds.classes = std::move(classes);
  ds.class_of = class_of;
  for (int i = 0; i < int(class_of.size()); ++i) {
    ImageRecord rec;
    rec.id = i;
    rec.class_index = class_of[i];
    ds.images.push_back(rec);
  }
  return ds;
}

void save_manifest(const Dataset& ds, const fs::path& path) {
  json j;
  j["name"] = ds.name;
  j["classes"] = ds.classes;
  json images = json::array();
  for (const ImageRecord& r : ds.images) {
    images.push_back({{"id", r.id},
                      {"path", r.path.string()},
                      {"width", r.width},
                      {"height", r.height},
                      {"class", r.class_index}});
  }
  j["images"] = std::move(images);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest: " + path.string());
  out << j.dump(1) << '\n';
}

Dataset load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path.string());
  json j;
  try {
    in >> j;
    Dataset ds;
    ds.name = j.at("name").get<std::string>();
    ds.classes = j.at("classes").get<std::vector<std::string>>();
    for (const json& im : j.at("images")) {
      ImageRecord r;
      r.id = im.at("id").get<int>();
      r.path = im.value("path", std::string());
      r.width = im.value("width", 0);
      r.height = im.value("height", 0);
      r.class_index = im.at("class").get<int>();
      if (r.id != int(ds.images.size())) throw DataError("manifest ids must be dense and ordered");
      if (r.class_index < 0 || r.class_index >= int(ds.classes.size())) {
        throw DataError("manifest class index out of range for image " + std::to_string(r.id));
      }
      ds.class_of.push_back(r.class_index);
      ds.images.push_back(std::move(r));
    }
    return ds;
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + path.string() + ": " + e.what());
  }
}

Dataset open_dataset(const fs::path& source) {
  if (fs::is_directory(source)) return load_dataset(source);
  if (fs::is_regular_file(source)) return load_manifest(source);
  throw DataError("dataset not found: " + source.string());
}

}  // namespace cbir
