// cbir: extract descriptors, build codebooks, ingest external vectors,
// evaluate retrieval schemes, merge reports and serve the query API.
//
// Exit codes: 0 success, 2 usage error, 3 data error.

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cbir/dataset.h"
#include "cbir/evaluation.h"
#include "cbir/feature_store.h"
#include "cbir/pipeline.h"
#include "cbir/report.h"
#include "cbir/service.h"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;
using namespace cbir;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

struct Options {
  std::string dataset;
  std::string kinds;
  std::string metric = "euclidean";
  std::string scheme = "basic";
  int n = 5;
  int alrf_iters = 10;
  std::uint64_t seed = 1;
  int workers = 0;
  std::string out = "cbir_out";
  // extract / codebook
  int step = 16;
  int lbp_window = 16;
  std::string source;
  int vocabulary = 0;
  std::size_t cap = kDescriptorSampleCap;
  // ingest
  std::string file;
  std::string kind;
  bool with_ids = false;
  // eval
  std::string fusion = "mean_rank";
  // report
  std::vector<std::string> inputs;
  std::string report_out;
  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
};

void log(const std::string& msg) { std::cerr << "[cbir] " << msg << '\n'; }

std::vector<std::string> split_kinds(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

fs::path table_path(const Options& o, const std::string& kind) { return fs::path(o.out) / (kind + ".cbf"); }
fs::path model_path(const Options& o, const std::string& kind) { return fs::path(o.out) / ("codebook_" + kind + ".cbf"); }
fs::path manifest_path(const Options& o) { return fs::path(o.out) / "dataset.json"; }

// --dataset names an image tree or a manifest; without it the manifest in
// the output directory is used.
Dataset open_configured_dataset(const Options& o) {
  if (!o.dataset.empty()) {
    if (!fs::exists(o.dataset)) throw UsageError("dataset not found: " + o.dataset);
    return open_dataset(o.dataset);
  }
  if (fs::exists(manifest_path(o))) return load_manifest(manifest_path(o));
  throw UsageError("--dataset is required (no manifest in " + o.out + ")");
}

// Writes next to the target and renames, so an interrupted run never leaves
// a partial table behind.
template <typename Save>
void atomic_save(const fs::path& path, Save save) {
  const fs::path tmp = path.string() + ".tmp";
  save(tmp);
  fs::rename(tmp, path);
}

LocalModel load_model(const Options& o, LocalKind kind) {
  const std::string name(kind_name(kind));
  const fs::path p = model_path(o, name);
  if (!fs::exists(p)) throw UsageError("no codebook for " + name + " at " + p.string() + "; run 'cbir codebook' first");
  LocalModel m;
  if (kind == LocalKind::kDenseSiftFv) {
    m.gmm = load_gmm(p);
  } else {
    m.codebook = load_codebook(p);
  }
  return m;
}

LocalParams local_params(const Options& o) {
  LocalParams p;
  p.step = o.step;
  p.lbp_window = o.lbp_window;
  return p;
}

bool table_complete(const fs::path& p, const Dataset& ds) {
  if (!fs::exists(p)) return false;
  try {
    const FeatureTable t = load_table(p);
    if (t.dataset() != ds.name || t.size() != std::size_t(ds.size())) return false;
    validate_table(t, ds);
    return true;
  } catch (const Error&) {
    return false;
  }
}

int cmd_extract(const Options& o) {
  if (o.dataset.empty()) throw UsageError("--dataset is required");
  if (!fs::is_directory(o.dataset)) throw UsageError("dataset directory not found: " + o.dataset);
  const std::vector<std::string> kinds = split_kinds(o.kinds);
  if (kinds.empty()) throw UsageError("--kinds is required");
  for (const std::string& k : kinds) {
    if (!is_native_kind(k)) throw UsageError("unknown descriptor kind '" + k + "'");
  }
  const Dataset ds = load_dataset(o.dataset);
  for (const std::string& w : ds.warnings) log("warning: " + w);
  fs::create_directories(o.out);
  save_manifest(ds, manifest_path(o));
  int done = 0;
  for (const std::string& k : kinds) {
    const fs::path p = table_path(o, k);
    if (table_complete(p, ds)) continue;
    ExtractOptions eo;
    eo.local = local_params(o);
    eo.workers = o.workers;
    if (const auto l = parse_local_kind(k)) eo.model = load_model(o, *l);
    log("extracting " + k + " from " + std::to_string(ds.size()) + " images");
    const FeatureTable t = extract_table(ds, k, eo);
    atomic_save(p, [&](const fs::path& tmp) { save_table(t, tmp, false); });
    log("wrote " + p.string() + " (" + std::to_string(t.size()) + " x " + std::to_string(t.dim()) + ")");
    ++done;
  }
  if (done == 0) log("up to date");
  return 0;
}

int cmd_codebook(const Options& o) {
  if (o.source.empty()) throw UsageError("--source (an image pool disjoint from the evaluation set) is required");
  const std::vector<std::string> kinds = split_kinds(o.kinds);
  if (kinds.empty()) throw UsageError("--kinds is required");
  std::vector<LocalKind> locals;
  for (const std::string& k : kinds) {
    const auto l = parse_local_kind(k);
    if (!l) throw UsageError("'" + k + "' does not use a codebook");
    locals.push_back(*l);
  }
  const std::vector<fs::path> images = list_images(o.source);
  if (images.empty()) throw DataError("no images under " + o.source);
  fs::create_directories(o.out);
  for (LocalKind l : locals) {
    const std::string name(kind_name(l));
    const int vocab = o.vocabulary > 0 ? o.vocabulary : default_vocabulary_size(l);
    log("sampling " + name + " descriptors from " + std::to_string(images.size()) + " images");
    const std::vector<float> rows = sample_descriptors(images, l, local_params(o), o.cap, o.seed, o.workers);
    log("training " + name + " model, K = " + std::to_string(vocab) + " on " +
        std::to_string(rows.size() / std::size_t(local_descriptor_dim(l))) + " descriptors");
    const LocalModel m = train_local_model(rows, l, vocab, o.seed);
    const fs::path p = model_path(o, name);
    atomic_save(p, [&](const fs::path& tmp) {
      if (m.gmm) {
        save_gmm(*m.gmm, tmp);
      } else {
        save_codebook(*m.codebook, tmp);
      }
    });
    log("wrote " + p.string());
  }
  return 0;
}

int cmd_ingest(const Options& o) {
  if (o.file.empty() || o.kind.empty()) throw UsageError("ingest needs a file and --kind");
  const Dataset ds = open_configured_dataset(o);
  IngestOptions io;
  io.first_column_is_id = o.with_ids;
  io.expected_rows = std::size_t(ds.size());
  FeatureTable t = ingest_external(o.file, o.kind, ds.name, io);
  validate_table(t, ds);
  fs::create_directories(o.out);
  if (!fs::exists(manifest_path(o))) save_manifest(ds, manifest_path(o));
  const fs::path p = table_path(o, o.kind);
  atomic_save(p, [&](const fs::path& tmp) { save_table(t, tmp, false); });
  log("wrote " + p.string() + " (" + std::to_string(t.size()) + " x " + std::to_string(t.dim()) + ")");
  return 0;
}

int cmd_eval(const Options& o) {
  const Dataset ds = open_configured_dataset(o);
  const std::vector<std::string> kinds = split_kinds(o.kinds);
  if (kinds.empty()) throw UsageError("--kinds is required");
  EvalConfig cfg;
  const auto scheme = parse_scheme(o.scheme);
  if (!scheme) throw UsageError("unknown scheme '" + o.scheme + "' (basic, pseudo, manual, alrf)");
  const auto metric = parse_metric(o.metric);
  if (!metric) throw UsageError("unknown metric '" + o.metric + "' (euclidean, cosine, manhattan, chisq, histint)");
  const auto fusion = parse_fusion(o.fusion);
  if (!fusion) throw UsageError("unknown fusion '" + o.fusion + "' (mean_rank, mean_distance)");
  if (o.n < 0) throw UsageError("--n must be >= 0");
  if (o.alrf_iters < 0) throw UsageError("--alrf-iters must be >= 0");
  cfg.scheme = *scheme;
  cfg.metric = *metric;
  cfg.rf.n = o.n;
  cfg.rf.fusion = *fusion;
  cfg.alrf.iterations = o.alrf_iters;
  cfg.seed = o.seed;
  cfg.workers = o.workers;

  std::vector<EvalReport> reports;
  const fs::path dir = fs::path(o.out) / "reports";
  for (const std::string& k : kinds) {
    const fs::path p = table_path(o, k);
    if (!fs::exists(p)) throw DataError("missing feature table " + p.string() + "; run extract or ingest first");
    const FeatureTable t = load_table(p);
    log("evaluating " + k + " (" + o.scheme + ", " + o.metric + ") over " + std::to_string(ds.size()) + " queries");
    EvalReport r = evaluate(t, ds, cfg);
    for (const std::string& w : r.warnings) log("warning: " + w);
    const std::string stem = write_report(r, dir);
    log("wrote " + (dir / stem).string() + ".{json,csv,_pr.csv}");
    if (r.scheme == "manual") {
      log("shortfall: " + std::to_string(r.queries_with_shortfall) + " queries, mean " +
          std::to_string(r.mean_shortfall) + ", max " + std::to_string(r.max_shortfall));
    }
    reports.push_back(std::move(r));
  }
  const std::string table = report_table(reports);
  std::ofstream(dir / (o.scheme + "_" + o.metric + ".csv")) << table;
  std::cout << table;
  return 0;
}

int cmd_report(const Options& o) {
  if (o.inputs.empty()) throw UsageError("report needs at least one report file or directory");
  std::vector<fs::path> files;
  for (const std::string& in : o.inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.path().extension() == ".json") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::exists(in)) {
      files.emplace_back(in);
    } else {
      throw UsageError("no such report: " + in);
    }
  }
  std::vector<EvalReport> reports;
  for (const fs::path& f : files) {
    std::ifstream in(f);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(f.string() + ": " + e.what());
    }
    reports.push_back(report_from_json(j));
  }
  const std::string table = merged_table(merge_reports(reports));
  if (!o.report_out.empty()) {
    const fs::path parent = fs::path(o.report_out).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    std::ofstream(o.report_out) << table;
  }
  std::cout << table;
  return 0;
}

std::atomic<HttpService*> g_service{nullptr};

int cmd_serve(const Options& o) {
  const Dataset ds = open_configured_dataset(o);
  std::vector<std::string> kinds = split_kinds(o.kinds);
  if (kinds.empty()) {
    for (const auto& e : fs::directory_iterator(o.out)) {
      const std::string stem = e.path().stem().string();
      if (e.path().extension() == ".cbf" && stem.rfind("codebook_", 0) != 0) kinds.push_back(stem);
    }
    std::sort(kinds.begin(), kinds.end());
  }
  if (kinds.empty()) throw UsageError("no feature tables in " + o.out);
  std::map<std::string, FeatureTable> tables;
  std::map<std::string, LocalModel> models;
  for (const std::string& k : kinds) {
    FeatureTable t = load_table(table_path(o, k));
    validate_table(t, ds);
    tables.emplace(k, std::move(t));
    if (const auto l = parse_local_kind(k); l && fs::exists(model_path(o, k))) models.emplace(k, load_model(o, *l));
  }
  ServiceOptions so;
  so.local_params = local_params(o);
  so.alrf.iterations = o.alrf_iters;
  so.alrf.seed = o.seed;
  so.rf.n = o.n;
  so.static_dir = o.static_dir;
  ServiceCore core(ds, std::move(tables), std::move(models), so);
  HttpService http(core);
  g_service = &http;
  std::signal(SIGINT, [](int) {
    if (HttpService* s = g_service.load()) s->stop();
  });
  log("serving " + std::to_string(kinds.size()) + " kinds of '" + ds.name + "' on http://" + o.host + ":" +
      std::to_string(o.port));
  http.run(o.host, o.port);
  g_service = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Content-based image retrieval: descriptors, retrieval schemes and evaluation"};
  app.set_config("--config", "", "Flat key = value file; command-line flags override it");
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* c) {
    c->add_option("--dataset", o.dataset, "Image tree (<root>/<class>/<image>) or dataset manifest");
    c->add_option("--out", o.out, "Working directory for tables, codebooks and reports");
    c->add_option("--workers", o.workers, "Worker threads (0: all cores)");
    c->add_option("--seed", o.seed, "Random seed");
  };

  auto* extract = app.add_subcommand("extract", "Compute descriptor tables for a dataset (resumable)");
  common(extract);
  extract->add_option("--kinds", o.kinds, "Comma-separated descriptor kinds");
  extract->add_option("--step", o.step, "Dense grid step for local descriptors");
  extract->add_option("--lbp-window", o.lbp_window, "Patch side of dense LBP descriptors");

  auto* codebook = app.add_subcommand("codebook", "Train codebooks / GMMs for local kinds on an image pool");
  common(codebook);
  codebook->add_option("--kinds", o.kinds, "Comma-separated local descriptor kinds");
  codebook->add_option("--source", o.source, "Image directory used for training (searched recursively)");
  codebook->add_option("--vocabulary", o.vocabulary, "Codewords or mixture components (0: kind default)");
  codebook->add_option("--cap", o.cap, "Maximum number of sampled descriptors");
  codebook->add_option("--step", o.step, "Dense grid step");
  codebook->add_option("--lbp-window", o.lbp_window, "Patch side of dense LBP descriptors");

  auto* ingest = app.add_subcommand("ingest", "Import precomputed vectors as a feature table");
  common(ingest);
  ingest->add_option("file", o.file, "Delimited text (one row per image in id order) or .cbf container")->required();
  ingest->add_option("--kind", o.kind, "Name of the new kind")->required();
  ingest->add_flag("--with-ids", o.with_ids, "First column of each row is the image id");

  auto* eval = app.add_subcommand("eval", "Run every image as a query and write reports");
  common(eval);
  eval->add_option("--kinds", o.kinds, "Comma-separated descriptor kinds");
  eval->add_option("--metric", o.metric, "euclidean, cosine, manhattan, chisq or histint");
  eval->add_option("--scheme", o.scheme, "basic, pseudo, manual or alrf");
  eval->add_option("--n", o.n, "Expansion count of pseudo and manual feedback");
  eval->add_option("--alrf-iters", o.alrf_iters, "Active-learning feedback iterations");
  eval->add_option("--fusion", o.fusion, "mean_rank or mean_distance");

  auto* report = app.add_subcommand("report", "Merge reports and order descriptors by average rank");
  report->add_option("inputs", o.inputs, "Report .json files or directories")->required();
  report->add_option("--out", o.report_out, "Also write the merged table to this file");

  auto* serve = app.add_subcommand("serve", "Serve the query and feedback API over HTTP");
  common(serve);
  serve->add_option("--kinds", o.kinds, "Kinds to load (default: every table in --out)");
  serve->add_option("--host", o.host, "Bind address");
  serve->add_option("--port", o.port, "Port");
  serve->add_option("--n", o.n, "Default expansion count of manual sessions");
  serve->add_option("--alrf-iters", o.alrf_iters, "Default active-learning iterations");
  serve->add_option("--static", o.static_dir, "Directory of UI assets served at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

#ifdef _OPENMP
  if (o.workers > 0) omp_set_num_threads(o.workers);
#endif

  try {
    if (*extract) return cmd_extract(o);
    if (*codebook) return cmd_codebook(o);
    if (*ingest) return cmd_ingest(o);
    if (*eval) return cmd_eval(o);
    if (*report) return cmd_report(o);
    if (*serve) return cmd_serve(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
