#include "cbir/retrieval.h"

#include <algorithm>
#include <cmath>

namespace cbir {
namespace {

constexpr std::string_view kMetricNames[] = {"euclidean", "cosine", "manhattan", "chisq", "histint"};

template <typename A, typename B>
double distance_impl(Metric m, std::span<const A> x, std::span<const B> y) {
  if (x.size() != y.size()) {
    throw UsageError("distance: length mismatch (" + std::to_string(x.size()) + " vs " +
                     std::to_string(y.size()) + ")");
  }
  const std::size_t n = x.size();
  switch (m) {
    case Metric::kEuclidean: {
      double s = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = double(x[i]) - double(y[i]);
        s += d * d;
      }
      return std::sqrt(s);
    }
    case Metric::kCosine: {
      double xy = 0, xx = 0, yy = 0;
      for (std::size_t i = 0; i < n; ++i) {
        xy += double(x[i]) * double(y[i]);
        xx += double(x[i]) * double(x[i]);
        yy += double(y[i]) * double(y[i]);
      }
      if (xx == 0 || yy == 0) return 1.0;
      return 1.0 - xy / (std::sqrt(xx) * std::sqrt(yy));
    }
    case Metric::kManhattan: {
      double s = 0;
      for (std::size_t i = 0; i < n; ++i) s += std::abs(double(x[i]) - double(y[i]));
      return s;
    }
    case Metric::kChiSquare: {
      double s = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double a = x[i], b = y[i];
        if (a < 0 || b < 0) throw DataError("chisq: negative entry at index " + std::to_string(i));
        const double d = a - b;
        s += d * d / (a + b + kChiSquareEpsilon);
      }
      return s;
    }
    case Metric::kHistIntersection: {
      double s = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double a = x[i], b = y[i];
        if (a < 0 || b < 0) throw DataError("histint: negative entry at index " + std::to_string(i));
        s += std::min(a, b);
      }
      return s;
    }
  }
  throw UsageError("distance: unknown metric");
}

void check_query(std::size_t qdim, const FeatureTable& table, Metric m) {
  if (qdim != table.dim()) {
    throw UsageError("rank: query has dimension " + std::to_string(qdim) + ", table '" + table.kind() +
                     "' has " + std::to_string(table.dim()));
  }
  if ((m == Metric::kChiSquare || m == Metric::kHistIntersection) && !table.nonnegative()) {
    throw DataError(std::string(metric_name(m)) + " requires nonnegative features; table '" + table.kind() +
                    "' has negative entries");
  }
}

void sort_items(std::vector<RankedItem>& items, Metric m) {
  const Order o = natural_order(m);
  std::sort(items.begin(), items.end(),
            [o](const RankedItem& a, const RankedItem& b) { return ranks_before(o, a, b); });
}

template <typename Q>
RankedList rank_parallel(std::span<const Q> query, int query_id, const FeatureTable& table, Metric m,
                         bool exclude_query) {
  check_query(query.size(), table, m);
  const std::int64_t n = std::int64_t(table.size());
  std::vector<RankedItem> all(std::size_t(n), RankedItem{0, 0.0});
  std::vector<std::uint8_t> error(std::size_t(n), 0);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < n; ++r) {
    try {
      all[std::size_t(r)] = {table.id_at(std::size_t(r)), distance_impl<Q, float>(m, query, table.row(std::size_t(r)))};
    } catch (...) {
      error[std::size_t(r)] = 1;
    }
  }
  for (std::int64_t r = 0; r < n; ++r) {
    // Re-run serially so the exception escapes with its message.
    if (error[std::size_t(r)]) distance_impl<Q, float>(m, query, table.row(std::size_t(r)));
  }
  RankedList out;
  out.query_id = query_id;
  out.metric = m;
  out.order = natural_order(m);
  out.items.reserve(all.size());
  for (const RankedItem& it : all) {
    if (exclude_query && query_id >= 0 && it.id == std::uint32_t(query_id)) continue;
    out.items.push_back(it);
  }
  sort_items(out.items, m);
  return out;
}

}  // namespace

std::string_view metric_name(Metric m) { return kMetricNames[int(m)]; }

std::optional<Metric> parse_metric(std::string_view name) {
  for (Metric m : kAllMetrics) {
    if (metric_name(m) == name) return m;
  }
  return std::nullopt;
}

double distance(Metric m, std::span<const double> x, std::span<const double> y) {
  return distance_impl<double, double>(m, x, y);
}
double distance(Metric m, std::span<const float> x, std::span<const float> y) {
  return distance_impl<float, float>(m, x, y);
}
double distance(Metric m, std::span<const double> x, std::span<const float> y) {
  return distance_impl<double, float>(m, x, y);
}

std::vector<std::uint32_t> RankedList::ids() const {
  std::vector<std::uint32_t> out;
  out.reserve(items.size());
  for (const RankedItem& it : items) out.push_back(it.id);
  return out;
}

RankedList rank(std::span<const double> query, int query_id, const FeatureTable& table, Metric m,
                bool exclude_query) {
  return rank_parallel<double>(query, query_id, table, m, exclude_query);
}

RankedList rank(std::span<const float> query, int query_id, const FeatureTable& table, Metric m,
                bool exclude_query) {
  return rank_parallel<float>(query, query_id, table, m, exclude_query);
}

RankedList rank(std::uint32_t query_id, const FeatureTable& table, Metric m, bool exclude_query) {
  return rank(table.vector_of(query_id), int(query_id), table, m, exclude_query);
}

RankedList rank_reference(std::span<const float> query, int query_id, const FeatureTable& table,
                          Metric m, bool exclude_query) {
  check_query(query.size(), table, m);
  RankedList out;
  out.query_id = query_id;
  out.metric = m;
  out.order = natural_order(m);
  for (std::size_t r = 0; r < table.size(); ++r) {
    const std::uint32_t id = table.id_at(r);
    if (exclude_query && query_id >= 0 && id == std::uint32_t(query_id)) continue;
    out.items.push_back({id, distance(m, query, table.row(r))});
  }
  sort_items(out.items, m);
  return out;
}

}  // namespace cbir
