// Distances and exhaustive ranking.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cbir/core.h"
#include "cbir/feature_store.h"

namespace cbir {

enum class Metric { kEuclidean, kCosine, kManhattan, kChiSquare, kHistIntersection };

inline constexpr Metric kAllMetrics[] = {Metric::kEuclidean, Metric::kCosine, Metric::kManhattan,
                                         Metric::kChiSquare, Metric::kHistIntersection};

// euclidean, cosine, manhattan, chisq, histint
std::string_view metric_name(Metric m);
std::optional<Metric> parse_metric(std::string_view name);

// Histogram intersection is the only similarity (higher is better).
inline bool is_similarity(Metric m) { return m == Metric::kHistIntersection; }

inline constexpr double kChiSquareEpsilon = 1e-10;

// Computed in double precision. Throws UsageError on a length mismatch and
// DataError on negative entries for chi-square and intersection. The cosine
// distance involving an all-zero vector is 1.
double distance(Metric m, std::span<const double> x, std::span<const double> y);
double distance(Metric m, std::span<const float> x, std::span<const float> y);
double distance(Metric m, std::span<const double> x, std::span<const float> y);

struct RankedItem {
  std::uint32_t id;
  double score;

  friend bool operator==(const RankedItem&, const RankedItem&) = default;
};

// Direction in which scores improve.
enum class Order { kAscending, kDescending };

inline Order natural_order(Metric m) { return is_similarity(m) ? Order::kDescending : Order::kAscending; }

struct RankedList {
  int query_id = -1;  // -1 for a query that is not in the table
  Metric metric = Metric::kEuclidean;
  Order order = Order::kAscending;
  std::vector<RankedItem> items;  // best first

  std::size_t size() const { return items.size(); }
  std::vector<std::uint32_t> ids() const;
};

// True when a should be ranked ahead of b: better score, then lower id.
inline bool ranks_before(Order o, const RankedItem& a, const RankedItem& b) {
  if (a.score != b.score) return o == Order::kDescending ? a.score > b.score : a.score < b.score;
  return a.id < b.id;
}

// Scores every table row against the query and sorts. When exclude_query is
// set, the row whose id equals query_id is left out. Rows are scored in
// parallel; rank_reference is a serial implementation with identical output.
RankedList rank(std::span<const double> query, int query_id, const FeatureTable& table, Metric m,
                bool exclude_query);
RankedList rank(std::span<const float> query, int query_id, const FeatureTable& table, Metric m,
                bool exclude_query);
// Query by a row of the table.
RankedList rank(std::uint32_t query_id, const FeatureTable& table, Metric m, bool exclude_query);

RankedList rank_reference(std::span<const float> query, int query_id, const FeatureTable& table,
                          Metric m, bool exclude_query);

}  // namespace cbir
