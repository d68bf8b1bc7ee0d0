// Acceptance runner: one PASS/FAIL line per criterion. `--only <name>` runs a
// single criterion; the exit status is nonzero when any selected one fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "cbir/evaluation.h"
#include "cbir/global_descriptors.h"
#include "cbir/local_descriptors.h"
#include "cbir/metrics.h"
#include "cbir/relevance_feedback.h"
#include "cbir/retrieval.h"
#include "metric_cases.h"
#include "rank_oracle.h"
#include "synthetic.h"

namespace cbir {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Pinned tolerances and budgets.
constexpr double kMetricTol = 1e-9;
constexpr double kMetricBudgetSeconds = 1.0;
constexpr double kDimensionBudgetSeconds = 60.0;
constexpr double kSchemeBudgetSeconds = 300.0;
constexpr double kAlrfMargin = 0.05;
constexpr double kPerfectTol = 1e-12;
constexpr double kKktTol = 1e-4;
constexpr int kSchemeSeeds = 20;
constexpr int kRankTables = 100;
constexpr double kPublishedTol = 0.01;
constexpr double kPublishedBudgetSeconds = 600.0;

struct Outcome {
  enum Status { kPass, kFail, kWaived } status = kPass;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

Outcome metric_oracles() {
  const auto t0 = Clock::now();
  const std::vector<testing::MetricCase> cases = testing::metric_cases();
  double worst = 0;
  std::string worst_case;
  std::vector<QueryJudgment> js;
  auto track = [&](const std::string& name, double got, double want) {
    const double err = std::abs(got - want);
    if (err > worst) {
      worst = err;
      worst_case = name;
    }
  };
  for (const testing::MetricCase& c : cases) {
    const QueryJudgment j = judgment_from_ranks(c.ng, c.relevant_ranks, c.n_retrieved);
    js.push_back(j);
    track(c.name + " avr", avr(j), c.avr);
    track(c.name + " nmrr", nmrr(j), c.nmrr);
    track(c.name + " ap", average_precision(j), c.ap);
    for (const auto& [k, p] : c.precision) track(c.name + " P@" + std::to_string(k), precision_at_k(j, k).value, p);
    const std::array<double, 11> pr = interpolated_pr(j);
    for (int i = 0; i < 11; ++i) track(c.name + " pr" + std::to_string(i), pr[std::size_t(i)], c.pr[std::size_t(i)]);
  }
  double mean_nmrr = 0, mean_ap = 0;
  for (const testing::MetricCase& c : cases) {
    mean_nmrr += c.nmrr / double(cases.size());
    mean_ap += c.ap / double(cases.size());
  }
  track("anmrr", anmrr(js), mean_nmrr);
  track("map", mean_average_precision(js), mean_ap);
  const double secs = seconds_since(t0);
  const bool ok = cases.size() >= 10 && worst <= kMetricTol && secs < kMetricBudgetSeconds;
  return {ok ? Outcome::kPass : Outcome::kFail,
          std::to_string(cases.size()) + " judgment sets, max error " + fmt(worst) +
              (worst_case.empty() ? "" : " (" + worst_case + ")") + ", " + fmt(secs) + " s"};
}

Outcome eqc_table() {
  const std::vector<std::pair<std::int64_t, std::int64_t>> table = {
      {5, 1}, {128, 25}, {1024, 204}, {2048, 409}, {4096, 819}, {25600, 5120}, {40960, 8192}};
  std::string bad;
  for (const auto& [l, want] : table) {
    if (eqc(l) != want) bad += " L=" + std::to_string(l) + "->" + std::to_string(eqc(l));
  }
  if (bad.empty()) return {Outcome::kPass, "7 lengths match"};
  return {Outcome::kFail, "mismatch:" + bad};
}

Outcome descriptor_dimensions() {
  const auto t0 = Clock::now();
  const std::vector<std::pair<GlobalKind, std::size_t>> global = {
      {GlobalKind::kHistL, 256},     {GlobalKind::kHistHV, 512},       {GlobalKind::kHistRgb, 768},
      {GlobalKind::kHistRgbNorm, 768}, {GlobalKind::kSpatialHistRgb, 1536}, {GlobalKind::kCoOcc, 5},
      {GlobalKind::kGaborL, 32},     {GlobalKind::kGaborRgb, 96},      {GlobalKind::kOppGaborRgb, 264},
      {GlobalKind::kHog, 81},        {GlobalKind::kGranulometry, 78},  {GlobalKind::kLbpL, 18},
      {GlobalKind::kLbpRgb, 54}};

  // Full-size models with random centroids: only the encoded length matters here.
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<float> u(0.0f, 0.3f);
  auto random_codebook = [&](int k, int dim) {
    Codebook cb;
    cb.k = k;
    cb.dim = dim;
    cb.centroids.resize(std::size_t(k) * std::size_t(dim));
    for (float& v : cb.centroids) v = u(rng);
    return cb;
  };
  LocalModel sift_bovw, sift_vlad, sift_fv, lbp_bovw;
  sift_bovw.codebook = random_codebook(1024, 128);
  sift_vlad.codebook = random_codebook(200, 128);
  lbp_bovw.codebook = random_codebook(1024, 54);
  GmmModel gmm;
  gmm.k = 160;
  gmm.dim = 128;
  gmm.weights.assign(160, 1.0 / 160);
  gmm.means.resize(160 * 128);
  for (double& v : gmm.means) v = u(rng);
  gmm.variances.assign(160 * 128, 0.01);
  sift_fv.gmm = gmm;
  const std::vector<std::tuple<LocalKind, const LocalModel*, std::size_t>> local = {
      {LocalKind::kDenseSift, &sift_bovw, 1024},
      {LocalKind::kDenseSiftVlad, &sift_vlad, 25600},
      {LocalKind::kDenseSiftFv, &sift_fv, 40960},
      {LocalKind::kDenseLbpRgb, &lbp_bovw, 1024}};

  std::string bad;
  int checks = 0;
  for (int i = 0; i < 10; ++i) {
    const RgbImage img = testing::textured_image(64, 64, i % 4, std::uint64_t(i) + 1);
    for (const auto& [kind, want] : global) {
      const FeatureVector fv = extract_global(img, kind, {}, i);
      ++checks;
      if (fv.values.size() != want || dimension(kind) != want) {
        bad += " " + std::string(kind_name(kind)) + "=" + std::to_string(fv.values.size());
      }
    }
    for (const auto& [kind, model, want] : local) {
      const FeatureVector fv = extract_local(img, kind, *model, {}, i);
      ++checks;
      if (fv.values.size() != want || dimension(kind, default_vocabulary_size(kind)) != want) {
        bad += " " + std::string(kind_name(kind)) + "=" + std::to_string(fv.values.size());
      }
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = bad.empty() && secs < kDimensionBudgetSeconds;
  return {ok ? Outcome::kPass : Outcome::kFail,
          std::to_string(checks) + " extractions over 17 kinds, " + fmt(secs) + " s" + (bad.empty() ? "" : ";" + bad)};
}

Outcome ranking_correctness() {
  constexpr std::array<Metric, 5> metrics = {Metric::kEuclidean, Metric::kCosine, Metric::kManhattan,
                                             Metric::kChiSquare, Metric::kHistIntersection};
  std::mt19937_64 rng(2024);
  int compared = 0, mismatched = 0;
  for (int t = 0; t < kRankTables; ++t) {
    // Every other table draws from a coarse grid so exact ties are common.
    const bool coarse = t % 2 == 1;
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::uniform_int_distribution<int> grid(0, 3);
    FeatureTable table("rand", "acceptance", 16);
    for (std::uint32_t id = 0; id < 100; ++id) {
      std::vector<float> row(16);
      for (float& v : row) v = coarse ? 0.25f * float(grid(rng)) : u(rng);
      table.add(id, row);
    }
    const std::uint32_t qid = std::uint32_t(rng() % 100);
    const std::span<const float> q = table.vector_of(qid);
    for (Metric m : metrics) {
      for (bool exclude : {false, true}) {
        const RankedList got = rank(q, int(qid), table, m, exclude);
        ++compared;
        if (got.items != testing::naive_rank(q, qid, table, m, exclude)) ++mismatched;
      }
    }
  }
  return {mismatched == 0 ? Outcome::kPass : Outcome::kFail,
          std::to_string(compared) + " rankings over " + std::to_string(kRankTables) + " tables, " +
              std::to_string(mismatched) + " mismatches"};
}

Outcome scheme_ordering() {
  const auto t0 = Clock::now();
  double map_basic = 0, map_pseudo = 0, map_manual = 0, anmrr_basic = 0, anmrr_alrf = 0;
  for (int s = 0; s < kSchemeSeeds; ++s) {
    const testing::SyntheticSet set = testing::gaussian_clusters(std::uint64_t(s) + 1);
    EvalConfig cfg;
    cfg.seed = std::uint64_t(s) + 1;
    cfg.alrf.seed = cfg.seed;
    cfg.scheme = Scheme::kBasic;
    const EvalReport basic = evaluate(set.table, set.dataset, cfg);
    cfg.scheme = Scheme::kPseudo;
    const EvalReport pseudo = evaluate(set.table, set.dataset, cfg);
    cfg.scheme = Scheme::kManual;
    const EvalReport manual = evaluate(set.table, set.dataset, cfg);
    cfg.scheme = Scheme::kAlrf;
    const EvalReport alrf = evaluate(set.table, set.dataset, cfg);
    map_basic += basic.map / kSchemeSeeds;
    map_pseudo += pseudo.map / kSchemeSeeds;
    map_manual += manual.map / kSchemeSeeds;
    anmrr_basic += basic.anmrr / kSchemeSeeds;
    anmrr_alrf += alrf.anmrr / kSchemeSeeds;
  }
  const double secs = seconds_since(t0);
  const bool map_order = map_basic <= map_pseudo && map_pseudo <= map_manual;
  const bool alrf_gain = anmrr_alrf <= anmrr_basic - kAlrfMargin;
  const bool ok = map_order && alrf_gain && secs < kSchemeBudgetSeconds;
  std::string detail = "MAP basic " + fmt(map_basic) + " <= pseudo " + fmt(map_pseudo) + " <= manual " +
                       fmt(map_manual) + (map_order ? " holds" : " violated") + "; ANMRR alrf " + fmt(anmrr_alrf) +
                       " vs basic " + fmt(anmrr_basic) + " - " + fmt(kAlrfMargin) +
                       (alrf_gain ? " holds" : " violated") + "; " + fmt(secs) + " s";
  return {ok ? Outcome::kPass : Outcome::kFail, detail};
}

Outcome degenerate_bounds() {
  const testing::SyntheticSet set = testing::gaussian_clusters(1);
  const EvalReport perfect = evaluate(set.table, set.dataset, {});
  // Worst ranking: every query's list reversed, so relevant images come last.
  std::vector<QueryJudgment> worst;
  for (int q = 0; q < set.dataset.size(); ++q) {
    RankedList list = rank(std::uint32_t(q), set.table, Metric::kEuclidean, true);
    std::reverse(list.items.begin(), list.items.end());
    worst.push_back(judge(list, set.dataset));
  }
  const double worst_anmrr = anmrr(worst);
  const bool ok = std::abs(perfect.anmrr) <= kPerfectTol && std::abs(perfect.map - 1.0) <= kPerfectTol &&
                  std::abs(worst_anmrr - 1.0) <= kPerfectTol;
  return {ok ? Outcome::kPass : Outcome::kFail, "perfect ANMRR " + fmt(perfect.anmrr) + ", MAP " + fmt(perfect.map) +
                                                    "; reversed ANMRR " + fmt(worst_anmrr)};
}

Outcome svm_sanity() {
  const testing::SyntheticSet set = testing::separable_histograms(5);
  const std::size_t n = set.table.size();
  std::vector<double> kernel(n * n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = set.dataset.class_of[set.table.id_at(i)] == 0 ? 1 : -1;
    for (std::size_t j = 0; j < n; ++j) kernel[i * n + j] = hi_kernel(set.table.row(i), set.table.row(j));
  }
  const SvmModel model = train_svm(kernel, labels);
  int correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = model.decision(std::span<const double>(kernel.data() + i * n, n));
    if ((f > 0 ? 1 : -1) == labels[i]) ++correct;
  }
  double kkt = 0;
  for (double r : kkt_residuals(model, kernel)) kkt = std::max(kkt, r);

  const FeedbackOracle oracle(set.dataset.class_of);
  double worst_p10 = 1.0;
  for (std::uint32_t q = 0; q < n; q += 7) {
    const AlrfResult r = alrf_session(q, set.table, oracle, {});
    worst_p10 = std::min(worst_p10, precision_at_k(judge(r.list, set.dataset), 10).value);
  }
  const bool ok = correct == int(n) && kkt <= kKktTol && worst_p10 == 1.0;
  return {ok ? Outcome::kPass : Outcome::kFail,
          "training accuracy " + std::to_string(correct) + "/" + std::to_string(n) + ", max KKT residual " + fmt(kkt) +
              ", min ALRF P@10 " + fmt(worst_p10)};
}

// Published vectors: CBIR_PUBLISHED_FEATURES names a directory holding
// dataset.json plus <kind>.cbf tables and expected.json ({"kind": anmrr}).
Outcome published_features() {
  const char* env = std::getenv("CBIR_PUBLISHED_FEATURES");
  if (!env || !*env) return {Outcome::kWaived, "CBIR_PUBLISHED_FEATURES not set; published vectors unavailable"};
  const fs::path dir(env);
  const auto t0 = Clock::now();
  std::ifstream in(dir / "expected.json");
  if (!in) return {Outcome::kFail, "missing " + (dir / "expected.json").string()};
  const nlohmann::json expected = nlohmann::json::parse(in);
  const Dataset ds = load_manifest(dir / "dataset.json");
  int within = 0;
  std::string detail;
  for (const auto& [kind, want] : expected.items()) {
    const FeatureTable t = load_table(dir / (kind + ".cbf"));
    const EvalReport r = evaluate(t, ds, {});
    const bool hit = std::abs(r.anmrr - want.get<double>()) <= kPublishedTol;
    within += hit;
    detail += " " + kind + "=" + fmt(r.anmrr) + (hit ? "" : "(want " + fmt(want.get<double>()) + ")");
  }
  const double secs = seconds_since(t0);
  const bool ok = within >= 3 && secs < kPublishedBudgetSeconds;
  return {ok ? Outcome::kPass : Outcome::kFail,
          std::to_string(within) + " rows within " + fmt(kPublishedTol) + ";" + detail + "; " + fmt(secs) + " s"};
}

}  // namespace
}  // namespace cbir

int main(int argc, char** argv) {
  using namespace cbir;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"metric_oracles", metric_oracles},
      {"eqc_table", eqc_table},
      {"descriptor_dimensions", descriptor_dimensions},
      {"ranking_correctness", ranking_correctness},
      {"scheme_ordering", scheme_ordering},
      {"degenerate_bounds", degenerate_bounds},
      {"svm_sanity", svm_sanity},
      {"published_features", published_features},
  };

  CLI::App app("Acceptance criteria");
  std::string only;
  app.add_option("--only", only, "Run a single criterion");
  CLI11_PARSE(app, argc, argv);

  int failures = 0, ran = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && only != name) continue;
    ++ran;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {Outcome::kFail, std::string("threw: ") + e.what()};
    }
    const char* tag = o.status == Outcome::kPass ? "PASS" : o.status == Outcome::kFail ? "FAIL" : "WAIVED";
    std::cout << tag << ' ' << name << ": " << o.detail << std::endl;
    failures += o.status == Outcome::kFail;
  }
  if (ran == 0) {
    std::cerr << "unknown criterion '" << only << "'\n";
    return 2;
  }
  return failures == 0 ? 0 : 1;
}
