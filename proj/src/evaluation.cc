#include "cbir/evaluation.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cbir {
namespace {

constexpr std::string_view kSchemeNames[] = {"basic", "pseudo", "manual", "alrf"};

struct QueryOutcome {
  RankedList list;
  int shortfall = 0;
};

QueryOutcome run_query(std::uint32_t q, const FeatureTable& table, const FeedbackOracle& oracle,
                       const EvalConfig& cfg) {
  QueryOutcome out;
  switch (cfg.scheme) {
    case Scheme::kBasic:
      out.list = rank(q, table, cfg.metric, true);
      break;
    case Scheme::kPseudo:
      out.list = pseudo_rf(q, table, cfg.metric, cfg.rf);
      break;
    case Scheme::kManual: {
      ManualRfResult r = manual_rf_simulated(q, table, cfg.metric, cfg.rf, oracle);
      out.list = std::move(r.list);
      out.shortfall = r.shortfall;
      break;
    }
    case Scheme::kAlrf: {
      AlrfConfig a = cfg.alrf;
      a.metric = cfg.metric;
      a.seed = cfg.seed;
      out.list = alrf_session(q, table, oracle, a).list;
      break;
    }
  }
  return out;
}

QueryResult score_query(const QueryOutcome& o, const Dataset& ds, std::array<bool, kPrecisionCutoffs.size()>& trunc) {
  const QueryJudgment j = judge(o.list, ds);
  QueryResult r;
  r.query_id = j.query_id;
  r.ng = j.ng;
  r.shortfall = o.shortfall;
  for (std::size_t c = 0; c < kPrecisionCutoffs.size(); ++c) {
    const PrefixValue p = precision_at_k(j, kPrecisionCutoffs[c]);
    r.precision[c] = p.value;
    trunc[c] = p.truncated;
  }
  if (j.ng < 1) return r;
  r.avr = avr(j);
  r.nmrr = nmrr(j);
  r.average_precision = average_precision(j);
  r.pr = interpolated_pr(j);
  return r;
}

EvalReport make_header(const FeatureTable& table, const Dataset& ds, const EvalConfig& cfg) {
  EvalReport r;
  r.dataset = ds.name;
  r.dataset_size = ds.size();
  r.features = table.kind();
  r.scheme = std::string(scheme_name(cfg.scheme));
  r.metric = std::string(metric_name(cfg.metric));
  r.n = (cfg.scheme == Scheme::kPseudo || cfg.scheme == Scheme::kManual) ? cfg.rf.n : 0;
  r.alrf_iterations = cfg.scheme == Scheme::kAlrf ? cfg.alrf.iterations : 0;
  r.seed = cfg.seed;
  r.dimension = table.dim();
  r.eqc = eqc(std::int64_t(table.dim())) * eqc_multiplier(cfg);
  return r;
}

// Aggregation in query order.
void aggregate(EvalReport& r, std::vector<QueryResult> results,
               const std::vector<std::array<bool, kPrecisionCutoffs.size()>>& trunc) {
  r.queries = std::move(results);
  int used = 0, shortfalls = 0;
  double shortfall_sum = 0;
  for (std::size_t i = 0; i < r.queries.size(); ++i) {
    const QueryResult& q = r.queries[i];
    for (std::size_t c = 0; c < kPrecisionCutoffs.size(); ++c) {
      r.precision[c] += q.precision[c];
      r.precision_truncated[c] = r.precision_truncated[c] || trunc[i][c];
    }
    shortfall_sum += q.shortfall;
    shortfalls += q.shortfall > 0;
    r.max_shortfall = std::max(r.max_shortfall, q.shortfall);
    if (q.ng < 1) {
      ++r.skipped_queries;
      continue;
    }
    ++used;
    r.anmrr += q.nmrr;
    r.map += q.average_precision;
    for (std::size_t l = 0; l < 11; ++l) r.pr[l] += q.pr[l];
  }
  const double nq = double(r.queries.size());
  for (double& p : r.precision) p = nq > 0 ? p / nq : 0.0;
  if (used > 0) {
    r.anmrr /= used;
    r.map /= used;
    for (double& v : r.pr) v /= used;
  }
  r.queries_with_shortfall = shortfalls;
  r.mean_shortfall = nq > 0 ? shortfall_sum / nq : 0.0;
  if (r.skipped_queries > 0) {
    r.warnings.push_back(std::to_string(r.skipped_queries) + " queries without ground truth were skipped");
  }
}

EvalReport evaluate_impl(const FeatureTable& table, const Dataset& ds, const EvalConfig& cfg, bool parallel) {
  validate_table(table, ds);
  EvalReport r = make_header(table, ds, cfg);
  const FeedbackOracle oracle(ds.class_of);
  const std::int64_t n = ds.size();
  std::vector<QueryResult> results(static_cast<std::size_t>(n));
  std::vector<std::array<bool, kPrecisionCutoffs.size()>> trunc(static_cast<std::size_t>(n));
  std::vector<std::string> errors(static_cast<std::size_t>(n));

  auto one = [&](std::int64_t q) {
    try {
      results[std::size_t(q)] = score_query(run_query(std::uint32_t(q), table, oracle, cfg), ds, trunc[std::size_t(q)]);
    } catch (const std::exception& e) {
      errors[std::size_t(q)] = e.what();
    }
  };
  if (parallel) {
    int threads = cfg.workers;
#ifdef _OPENMP
    if (threads <= 0) threads = omp_get_max_threads();
#else
    threads = 1;
#endif
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (std::int64_t q = 0; q < n; ++q) one(q);
  } else {
    for (std::int64_t q = 0; q < n; ++q) one(q);
  }
  for (std::int64_t q = 0; q < n; ++q) {
    if (!errors[std::size_t(q)].empty()) {
      throw DataError("query " + std::to_string(q) + ": " + errors[std::size_t(q)]);
    }
  }
  aggregate(r, std::move(results), trunc);
  return r;
}

std::string fmt(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string_view scheme_name(Scheme s) { return kSchemeNames[int(s)]; }

std::optional<Scheme> parse_scheme(std::string_view name) {
  for (int i = 0; i < 4; ++i) {
    if (kSchemeNames[i] == name) return Scheme(i);
  }
  return std::nullopt;
}

int eqc_multiplier(const EvalConfig& cfg) {
  switch (cfg.scheme) {
    case Scheme::kBasic:
      return 1;
    case Scheme::kPseudo:
    case Scheme::kManual:
      return std::max(cfg.rf.n, 1);
    case Scheme::kAlrf:
      return kAlrfEqcMultiplier;
  }
  return 1;
}

void validate_table(const FeatureTable& table, const Dataset& ds) {
  if (!table.dataset().empty() && !ds.name.empty() && table.dataset() != ds.name) {
    throw DataError("table '" + table.kind() + "' belongs to dataset '" + table.dataset() + "', not '" + ds.name + "'");
  }
  if (table.size() != std::size_t(ds.size())) {
    throw DataError("table '" + table.kind() + "' has " + std::to_string(table.size()) + " rows, dataset has " +
                    std::to_string(ds.size()) + " images");
  }
  for (int id = 0; id < ds.size(); ++id) {
    if (!table.contains(std::uint32_t(id))) {
      throw DataError("table '" + table.kind() + "' has no row for image " + std::to_string(id));
    }
  }
}

EvalReport evaluate(const FeatureTable& table, const Dataset& ds, const EvalConfig& cfg) {
  return evaluate_impl(table, ds, cfg, true);
}

EvalReport evaluate_reference(const FeatureTable& table, const Dataset& ds, const EvalConfig& cfg) {
  return evaluate_impl(table, ds, cfg, false);
}

nlohmann::json to_json(const EvalReport& r, bool per_query) {
  nlohmann::json j;
  j["dataset"] = r.dataset;
  j["dataset_size"] = r.dataset_size;
  j["features"] = r.features;
  j["scheme"] = r.scheme;
  j["metric"] = r.metric;
  j["n"] = r.n;
  j["alrf_iterations"] = r.alrf_iterations;
  j["seed"] = r.seed;
  j["dimension"] = r.dimension;
  j["eqc"] = r.eqc;
  j["anmrr"] = r.anmrr;
  j["map"] = r.map;
  nlohmann::json p = nlohmann::json::object();
  nlohmann::json t = nlohmann::json::object();
  for (std::size_t c = 0; c < kPrecisionCutoffs.size(); ++c) {
    p[std::to_string(kPrecisionCutoffs[c])] = r.precision[c];
    t[std::to_string(kPrecisionCutoffs[c])] = r.precision_truncated[c];
  }
  j["precision"] = p;
  j["precision_truncated"] = t;
  j["pr"] = r.pr;
  j["skipped_queries"] = r.skipped_queries;
  if (r.scheme == "manual") {
    j["shortfall"] = {{"queries", r.queries_with_shortfall}, {"mean", r.mean_shortfall}, {"max", r.max_shortfall}};
  }
  j["warnings"] = r.warnings;
  if (per_query) {
    nlohmann::json qs = nlohmann::json::array();
    for (const QueryResult& q : r.queries) {
      nlohmann::json e = {{"query", q.query_id}, {"ng", q.ng}, {"avr", q.avr}, {"nmrr", q.nmrr},
                          {"average_precision", q.average_precision}, {"precision", q.precision}};
      if (r.scheme == "manual") e["shortfall"] = q.shortfall;
      qs.push_back(std::move(e));
    }
    j["queries"] = std::move(qs);
  }
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  try {
    EvalReport r;
    r.dataset = j.at("dataset").get<std::string>();
    r.dataset_size = j.at("dataset_size").get<int>();
    r.features = j.at("features").get<std::string>();
    r.scheme = j.at("scheme").get<std::string>();
    r.metric = j.at("metric").get<std::string>();
    r.n = j.value("n", 0);
    r.alrf_iterations = j.value("alrf_iterations", 0);
    r.seed = j.value("seed", std::uint64_t(0));
    r.dimension = j.at("dimension").get<std::size_t>();
    r.eqc = j.at("eqc").get<std::int64_t>();
    r.anmrr = j.at("anmrr").get<double>();
    r.map = j.at("map").get<double>();
    for (std::size_t c = 0; c < kPrecisionCutoffs.size(); ++c) {
      r.precision[c] = j.at("precision").at(std::to_string(kPrecisionCutoffs[c])).get<double>();
    }
    if (j.contains("pr")) r.pr = j.at("pr").get<std::array<double, 11>>();
    r.skipped_queries = j.value("skipped_queries", 0);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

std::string report_table(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  os << "features,ANMRR,MAP,P@5,P@10,P@50,P@100,P@1000,EQC\n";
  for (const EvalReport& r : reports) {
    os << r.features << ',' << fmt(r.anmrr, 3) << ',' << fmt(100 * r.map, 2);
    for (double p : r.precision) os << ',' << fmt(100 * p, 2);
    os << ',' << r.eqc << '\n';
  }
  return os.str();
}

std::string pr_curve_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "recall,precision\n";
  for (int l = 0; l <= 10; ++l) os << fmt(l / 10.0, 1) << ',' << fmt(r.pr[std::size_t(l)], 6) << '\n';
  return os.str();
}

std::string write_report(const EvalReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string stem = r.features + "_" + r.scheme + "_" + r.metric;
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name);
    out << text;
    if (!out) throw DataError("cannot write " + (dir / name).string());
  };
  write(stem + ".json", to_json(r).dump(1) + "\n");
  write(stem + ".csv", report_table({r}));
  write(stem + "_pr.csv", pr_curve_csv(r));
  return stem;
}

}  // namespace cbir
