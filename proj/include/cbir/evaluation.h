// The all-queries evaluation protocol: every image queries the rest of the
// collection and is judged against its own class.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cbir/dataset.h"
#include "cbir/feature_store.h"
#include "cbir/metrics.h"
#include "cbir/relevance_feedback.h"

namespace cbir {

enum class Scheme { kBasic, kPseudo, kManual, kAlrf };

// basic, pseudo, manual, alrf
std::string_view scheme_name(Scheme s);
std::optional<Scheme> parse_scheme(std::string_view name);

inline constexpr std::array<int, 5> kPrecisionCutoffs = {5, 10, 50, 100, 1000};

// Query-count factor applied to the table EQC: 1 for basic, n for the
// expansion schemes, 20 for active learning.
inline constexpr int kAlrfEqcMultiplier = 20;

struct EvalConfig {
  Scheme scheme = Scheme::kBasic;
  Metric metric = Metric::kEuclidean;
  RfConfig rf;
  AlrfConfig alrf;
  int workers = 0;  // 0: OpenMP default
  std::uint64_t seed = 1;
};

int eqc_multiplier(const EvalConfig& cfg);

struct QueryResult {
  int query_id = -1;
  int ng = 0;
  double avr = 0;
  double nmrr = 0;
  double average_precision = 0;
  std::array<double, kPrecisionCutoffs.size()> precision{};
  std::array<double, 11> pr{};
  int shortfall = 0;  // manual scheme: missing expansion images
};

struct EvalReport {
  std::string dataset;
  int dataset_size = 0;
  std::string features;
  std::string scheme;
  std::string metric;
  int n = 0;               // expansion count (pseudo/manual)
  int alrf_iterations = 0; // active learning
  std::uint64_t seed = 0;
  std::size_t dimension = 0;
  std::int64_t eqc = 0;

  double anmrr = 0;
  double map = 0;
  std::array<double, kPrecisionCutoffs.size()> precision{};
  std::array<bool, kPrecisionCutoffs.size()> precision_truncated{};
  std::array<double, 11> pr{};
  int skipped_queries = 0;

  // Manual scheme bookkeeping.
  int queries_with_shortfall = 0;
  double mean_shortfall = 0;
  int max_shortfall = 0;

  std::vector<QueryResult> queries;
  std::vector<std::string> warnings;
};

// Throws DataError unless the table holds exactly the dataset's images.
void validate_table(const FeatureTable& table, const Dataset& ds);

// Queries run in parallel; aggregation follows query order, so the result is
// identical to the serial evaluate_reference.
EvalReport evaluate(const FeatureTable& table, const Dataset& ds, const EvalConfig& cfg);
EvalReport evaluate_reference(const FeatureTable& table, const Dataset& ds, const EvalConfig& cfg);

nlohmann::json to_json(const EvalReport& r, bool per_query = true);
EvalReport report_from_json(const nlohmann::json& j);

// Columns: features, ANMRR, MAP, P@5, P@10, P@50, P@100, P@1000, EQC.
// MAP and precision are percentages, ANMRR a fraction.
std::string report_table(const std::vector<EvalReport>& reports);
// recall, precision: 11 rows.
std::string pr_curve_csv(const EvalReport& r);

// Writes <stem>.json, <stem>.csv and <stem>_pr.csv under dir and returns the
// stem, <features>_<scheme>_<metric>.
std::string write_report(const EvalReport& r, const std::filesystem::path& dir);

}  // namespace cbir
