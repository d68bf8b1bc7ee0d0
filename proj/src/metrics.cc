#include "cbir/metrics.h"

#include <algorithm>
#include <string>

namespace cbir {
namespace {

void require_ng(const QueryJudgment& j, const char* what) {
  if (j.ng < 1) {
    throw UsageError(std::string(what) + ": query " + std::to_string(j.query_id) + " has no ground truth");
  }
}

}  // namespace

QueryJudgment judge(const RankedList& list, const Dataset& ds) {
  QueryJudgment j;
  j.query_id = list.query_id;
  if (list.query_id < 0 || list.query_id >= ds.size()) {
    throw UsageError("judge: query id " + std::to_string(list.query_id) + " is not in dataset '" + ds.name + "'");
  }
  j.ng = ds.ground_truth_size(list.query_id);
  j.rel.reserve(list.items.size());
  for (const RankedItem& it : list.items) {
    const int id = int(it.id);
    if (id >= ds.size()) throw DataError("judge: ranked id " + std::to_string(id) + " is not in the dataset");
    j.rel.push_back(id != list.query_id && ds.same_class(id, list.query_id));
  }
  return j;
}

QueryJudgment judgment_from_ranks(int ng, std::span<const int> relevant_ranks, int n_retrieved) {
  QueryJudgment j;
  j.ng = ng;
  j.rel.assign(std::size_t(n_retrieved), 0);
  for (int r : relevant_ranks) {
    if (r < 1 || r > n_retrieved) throw UsageError("judgment_from_ranks: rank out of range");
    j.rel[std::size_t(r - 1)] = 1;
  }
  if (int(relevant_ranks.size()) > ng) throw UsageError("judgment_from_ranks: more relevant ranks than NG");
  return j;
}

double avr(const QueryJudgment& j, int k_override) {
  require_ng(j, "avr");
  const double k = k_override > 0 ? k_override : 2.0 * j.ng;
  const double penalty = 1.25 * k;
  double sum = 0;
  int found = 0;
  for (std::size_t i = 0; i < j.rel.size() && found < j.ng; ++i) {
    if (!j.rel[i]) continue;
    const double r = double(i + 1);
    sum += r <= k ? r : penalty;
    ++found;
  }
  sum += double(j.ng - found) * penalty;
  return sum / j.ng;
}

double nmrr(const QueryJudgment& j, int k_override) {
  const double k = k_override > 0 ? k_override : 2.0 * j.ng;
  const double best = 0.5 * (1.0 + j.ng);
  return (avr(j, k_override) - best) / (1.25 * k - best);
}

double anmrr(std::span<const QueryJudgment> js, int* skipped) {
  double sum = 0;
  int used = 0, skip = 0;
  for (const QueryJudgment& j : js) {
    if (j.ng < 1) {
      ++skip;
      continue;
    }
    sum += nmrr(j);
    ++used;
  }
  if (skipped) *skipped = skip;
  return used ? sum / used : 0.0;
}

PrefixValue precision_at_k(const QueryJudgment& j, int k) {
  if (k < 1) throw UsageError("precision_at_k: k must be >= 1");
  const std::size_t n = std::min<std::size_t>(std::size_t(k), j.rel.size());
  int hits = 0;
  for (std::size_t i = 0; i < n; ++i) hits += j.rel[i];
  return {double(hits) / k, std::size_t(k) > j.rel.size()};
}

PrefixValue recall_at_k(const QueryJudgment& j, int k) {
  if (k < 1) throw UsageError("recall_at_k: k must be >= 1");
  require_ng(j, "recall_at_k");
  const std::size_t n = std::min<std::size_t>(std::size_t(k), j.rel.size());
  int hits = 0;
  for (std::size_t i = 0; i < n; ++i) hits += j.rel[i];
  return {double(hits) / j.ng, std::size_t(k) > j.rel.size()};
}

double average_precision(const QueryJudgment& j) {
  require_ng(j, "average_precision");
  double sum = 0;
  int hits = 0;
  for (std::size_t i = 0; i < j.rel.size(); ++i) {
    if (!j.rel[i]) continue;
    ++hits;
    sum += double(hits) / double(i + 1);
  }
  return sum / j.ng;
}

double mean_average_precision(std::span<const QueryJudgment> js) {
  double sum = 0;
  int used = 0;
  for (const QueryJudgment& j : js) {
    if (j.ng < 1) continue;
    sum += average_precision(j);
    ++used;
  }
  return used ? sum / used : 0.0;
}

std::array<double, 11> interpolated_pr(const QueryJudgment& j) {
  require_ng(j, "interpolated_pr");
  // best[i]: highest precision at any rank whose recall reaches level i/10.
  std::array<double, 11> best{};
  int hits = 0;
  for (std::size_t r = 0; r < j.rel.size(); ++r) {
    if (!j.rel[r]) continue;  // precision only peaks at relevant ranks
    ++hits;
    const double p = double(hits) / double(r + 1);
    for (int i = 0; i <= 10; ++i) {
      if (hits * 10 >= i * j.ng) best[std::size_t(i)] = std::max(best[std::size_t(i)], p);
    }
  }
  return best;
}

std::int64_t eqc(std::int64_t length, std::int64_t base, std::int64_t cost) {
  if (length < 1 || base < 1) throw UsageError("eqc: length and base must be >= 1");
  return cost * (length / base);
}

}  // namespace cbir
