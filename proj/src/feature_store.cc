#include "cbir/feature_store.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace cbir {
namespace {

constexpr char kMagic[4] = {'C', 'B', 'F', '1'};
constexpr const char* kCodebookKind = "codebook.kmeans";
constexpr const char* kGmmKind = "codebook.gmm";

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

class Writer {
 public:
  explicit Writer(const fs::path& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw DataError("cannot write " + path.string());
  }
  template <typename T>
  void put(T v) {
    v = to_little(v);
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_string(const std::string& s) {
    put(std::uint32_t(s.size()));
    out_.write(s.data(), std::streamsize(s.size()));
  }
  void raw(const char* p, std::size_t n) { out_.write(p, std::streamsize(n)); }
  void finish() {
    out_.flush();
    if (!out_) throw DataError("write failed: " + path_.string());
  }

 private:
  std::ofstream out_;
  fs::path path_;
};

class Reader {
 public:
  explicit Reader(const fs::path& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw DataError("cannot open " + path.string());
  }
  template <typename T>
  T get() {
    T v;
    read(reinterpret_cast<char*>(&v), sizeof(T));
    return to_little(v);
  }
  std::string get_string() {
    const std::uint32_t n = get<std::uint32_t>();
    if (n > (1u << 20)) throw DataError(path_.string() + ": corrupt header string");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  void read(char* p, std::size_t n) {
    in_.read(p, std::streamsize(n));
    if (std::size_t(in_.gcount()) != n) throw DataError(path_.string() + ": truncated file");
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::ifstream in_;
  fs::path path_;
};

struct Header {
  std::string kind;
  std::string dataset;
  std::uint32_t dim = 0;
  std::uint32_t count = 0;
};

Header read_header(Reader& r, const fs::path& path) {
  char magic[4];
  try {
    r.read(magic, 4);
  } catch (const DataError&) {
    throw DataError(path.string() + ": not a feature table");
  }
  if (std::memcmp(magic, kMagic, 4) != 0) throw DataError(path.string() + ": not a feature table");
  const std::uint32_t version = r.get<std::uint32_t>();
  if (version != kContainerVersion) {
    throw DataError(path.string() + ": unsupported container version " + std::to_string(version));
  }
  Header h;
  h.kind = r.get_string();
  h.dataset = r.get_string();
  h.dim = r.get<std::uint32_t>();
  h.count = r.get<std::uint32_t>();
  if (h.dim == 0) throw DataError(path.string() + ": zero dimension");
  return h;
}

bool is_container(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[4] = {};
  in.read(magic, 4);
  return in.gcount() == 4 && std::memcmp(magic, kMagic, 4) == 0;
}

std::vector<double> normalize_if_needed(std::vector<double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  if (std::abs(std::sqrt(s) - 1.0) <= 1e-4) return v;
  return l2_normalize(v).values;
}

}  // namespace

FeatureTable::FeatureTable(std::string kind, std::string dataset, std::size_t dim)
    : kind_(std::move(kind)), dataset_(std::move(dataset)), dim_(dim) {
  if (dim_ == 0) throw UsageError("FeatureTable: zero dimension");
}

void FeatureTable::add(std::uint32_t id, std::span<const float> values) {
  if (values.size() != dim_) {
    throw DataError("feature table '" + kind_ + "': row " + std::to_string(id) + " has length " +
                    std::to_string(values.size()) + ", expected " + std::to_string(dim_));
  }
  if (id >= row_of_.size()) row_of_.resize(std::size_t(id) + 1, -1);
  if (row_of_[id] >= 0) {
    throw DataError("feature table '" + kind_ + "': duplicate id " + std::to_string(id));
  }
  for (float v : values) {
    if (!std::isfinite(v)) throw DataError("feature table '" + kind_ + "': non-finite value in row " + std::to_string(id));
    negative_entries_ += v < 0;
  }
  row_of_[id] = std::int64_t(ids_.size());
  ids_.push_back(id);
  data_.insert(data_.end(), values.begin(), values.end());
}

void FeatureTable::add(std::uint32_t id, std::span<const double> values) {
  std::vector<float> f(values.begin(), values.end());
  add(id, std::span<const float>(f));
}

std::optional<std::size_t> FeatureTable::find(std::uint32_t id) const {
  if (id >= row_of_.size() || row_of_[id] < 0) return std::nullopt;
  return std::size_t(row_of_[id]);
}

std::span<const float> FeatureTable::vector_of(std::uint32_t id) const {
  const auto r = find(id);
  if (!r) throw DataError("feature table '" + kind_ + "' has no image " + std::to_string(id));
  return row(*r);
}

FeatureVector FeatureTable::feature(std::uint32_t id) const {
  const auto v = vector_of(id);
  FeatureVector fv;
  fv.image_id = int(id);
  fv.kind = kind_;
  fv.values.assign(v.begin(), v.end());
  fv.zero = std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0f; });
  return fv;
}

void FeatureTable::sort_by_id() {
  std::vector<std::size_t> order(ids_.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids_[a] < ids_[b]; });
  std::vector<std::uint32_t> ids;
  std::vector<float> data;
  ids.reserve(ids_.size());
  data.reserve(data_.size());
  for (std::size_t r : order) {
    ids.push_back(ids_[r]);
    data.insert(data.end(), data_.begin() + r * dim_, data_.begin() + (r + 1) * dim_);
  }
  ids_ = std::move(ids);
  data_ = std::move(data);
  for (std::size_t r = 0; r < ids_.size(); ++r) row_of_[ids_[r]] = std::int64_t(r);
}

bool operator==(const FeatureTable& a, const FeatureTable& b) {
  return a.kind_ == b.kind_ && a.dataset_ == b.dataset_ && a.dim_ == b.dim_ && a.ids_ == b.ids_ &&
         std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(float)) == 0 &&
         a.data_.size() == b.data_.size();
}

void save_table(const FeatureTable& table, const fs::path& path, bool manifest) {
  Writer w(path);
  w.raw(kMagic, 4);
  w.put(kContainerVersion);
  w.put_string(table.kind());
  w.put_string(table.dataset());
  w.put(std::uint32_t(table.dim()));
  w.put(std::uint32_t(table.size()));
  for (std::size_t r = 0; r < table.size(); ++r) {
    w.put(table.id_at(r));
    for (float v : table.row(r)) w.put(v);
  }
  w.finish();
  if (manifest) {
    nlohmann::json j = {{"kind", table.kind()},
                        {"dataset", table.dataset()},
                        {"dimension", table.dim()},
                        {"count", table.size()},
                        {"format", "CBF1"},
                        {"version", kContainerVersion}};
    std::ofstream(path.string() + ".json") << j.dump(1) << '\n';
  }
}

FeatureTable load_table(const fs::path& path) {
  Reader r(path);
  const Header h = read_header(r, path);
  FeatureTable t(h.kind, h.dataset, h.dim);
  std::vector<float> row(h.dim);
  for (std::uint32_t i = 0; i < h.count; ++i) {
    const std::uint32_t id = r.get<std::uint32_t>();
    for (float& v : row) v = r.get<float>();
    t.add(id, std::span<const float>(row));
  }
  if (!r.at_end()) throw DataError(path.string() + ": trailing bytes after " + std::to_string(h.count) + " rows");
  return t;
}

FeatureTable ingest_external(const fs::path& path, const std::string& kind, const std::string& dataset,
                             const IngestOptions& opts) {
  if (!fs::exists(path)) throw DataError("ingest: no such file " + path.string());
  std::vector<std::pair<std::uint32_t, std::vector<double>>> rows;
  if (is_container(path)) {
    const FeatureTable src = load_table(path);
    for (std::size_t i = 0; i < src.size(); ++i) {
      rows.emplace_back(src.id_at(i), std::vector<double>(src.row(i).begin(), src.row(i).end()));
    }
  } else {
    std::ifstream in(path);
    std::string line;
    std::size_t line_no = 0, row_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream ss(line);
      std::vector<double> values;
      std::string tok;
      while (ss >> tok) {
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') {
          throw DataError("ingest: line " + std::to_string(line_no) + ": bad number '" + tok + "'");
        }
        values.push_back(v);
      }
      if (values.empty()) continue;
      std::uint32_t id = std::uint32_t(row_no);
      if (opts.first_column_is_id) {
        if (values.front() < 0 || values.front() != std::floor(values.front())) {
          throw DataError("ingest: line " + std::to_string(line_no) + ": bad id");
        }
        id = std::uint32_t(values.front());
        values.erase(values.begin());
      }
      for (double v : values) {
        if (!std::isfinite(v)) throw DataError("ingest: non-finite value in row " + std::to_string(row_no));
      }
      if (!rows.empty() && values.size() != rows.front().second.size()) {
        throw DataError("ingest: ragged row " + std::to_string(row_no) + " (" + std::to_string(values.size()) +
                        " values, expected " + std::to_string(rows.front().second.size()) + ")");
      }
      rows.emplace_back(id, std::move(values));
      ++row_no;
    }
  }
  if (rows.empty()) throw DataError("ingest: no rows in " + path.string());
  if (opts.expected_rows && !opts.first_column_is_id && rows.size() != opts.expected_rows) {
    throw DataError("ingest: " + std::to_string(rows.size()) + " rows but dataset has " +
                    std::to_string(opts.expected_rows) + " images");
  }
  FeatureTable t(kind, dataset, rows.front().second.size());
  for (auto& [id, values] : rows) {
    const std::vector<double> v = normalize_if_needed(std::move(values));
    t.add(id, std::span<const double>(v));
  }
  t.sort_by_id();
  return t;
}

void save_codebook(const Codebook& cb, const fs::path& path) {
  FeatureTable t(kCodebookKind, "seed=" + std::to_string(cb.seed), std::size_t(cb.dim));
  for (int c = 0; c < cb.k; ++c) t.add(std::uint32_t(c), cb.centroid(c));
  save_table(t, path);
}

Codebook load_codebook(const fs::path& path) {
  const FeatureTable t = load_table(path);
  if (t.kind() != kCodebookKind) throw DataError(path.string() + ": not a k-means codebook");
  Codebook cb;
  cb.k = int(t.size());
  cb.dim = int(t.dim());
  for (int c = 0; c < cb.k; ++c) {
    const auto v = t.vector_of(std::uint32_t(c));
    cb.centroids.insert(cb.centroids.end(), v.begin(), v.end());
  }
  if (cb.k < 1) throw DataError(path.string() + ": empty codebook");
  return cb;
}

// One record per component: [weight, means..., variances...].
void save_gmm(const GmmModel& g, const fs::path& path) {
  FeatureTable t(kGmmKind, "diagonal", std::size_t(1 + 2 * g.dim));
  std::vector<double> rec(1 + 2 * std::size_t(g.dim));
  for (int c = 0; c < g.k; ++c) {
    rec[0] = g.weights[c];
    std::copy_n(&g.means[std::size_t(c) * g.dim], g.dim, rec.begin() + 1);
    std::copy_n(&g.variances[std::size_t(c) * g.dim], g.dim, rec.begin() + 1 + g.dim);
    t.add(std::uint32_t(c), std::span<const double>(rec));
  }
  save_table(t, path);
}

GmmModel load_gmm(const fs::path& path) {
  const FeatureTable t = load_table(path);
  if (t.kind() != kGmmKind || t.dim() < 3 || t.dim() % 2 != 1) {
    throw DataError(path.string() + ": not a GMM container");
  }
  GmmModel g;
  g.k = int(t.size());
  g.dim = int((t.dim() - 1) / 2);
  double wsum = 0;
  for (int c = 0; c < g.k; ++c) {
    const auto r = t.vector_of(std::uint32_t(c));
    g.weights.push_back(r[0]);
    wsum += r[0];
    g.means.insert(g.means.end(), r.begin() + 1, r.begin() + 1 + g.dim);
    for (int j = 0; j < g.dim; ++j) g.variances.push_back(std::max<double>(r[1 + g.dim + j], kVarianceFloor));
  }
  if (g.k < 1 || wsum <= 0) throw DataError(path.string() + ": empty or degenerate GMM");
  for (double& w : g.weights) w /= wsum;  // f32 storage drifts the sum slightly
  return g;
}

}  // namespace cbir
