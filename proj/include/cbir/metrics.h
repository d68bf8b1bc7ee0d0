// Retrieval-quality measures: AVR/NMRR/ANMRR, precision and recall at k,
// average precision, interpolated precision-recall and the equivalent query
// cost.

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "cbir/dataset.h"
#include "cbir/retrieval.h"

namespace cbir {

struct QueryJudgment {
  int query_id = -1;
  int ng = 0;                      // ground-truth size
  std::vector<std::uint8_t> rel;   // rel[k-1] = 1 when the k-th result is relevant
};

// Relevance = same class as the query; the query itself never counts.
QueryJudgment judge(const RankedList& list, const Dataset& ds);

// Builds a judgment from the 1-based ranks of the retrieved relevant items.
QueryJudgment judgment_from_ranks(int ng, std::span<const int> relevant_ranks, int n_retrieved);

// Average rank with K = 2*NG unless k_override > 0. Ranks beyond K and
// relevant items never retrieved count as 1.25K. Throws UsageError for NG = 0.
double avr(const QueryJudgment& j, int k_override = 0);
double nmrr(const QueryJudgment& j, int k_override = 0);
// Mean NMRR over judgments with NG >= 1; skipped queries are counted in
// *skipped when given.
double anmrr(std::span<const QueryJudgment> js, int* skipped = nullptr);

struct PrefixValue {
  double value = 0;
  bool truncated = false;  // k exceeded the number of retrieved items
};

PrefixValue precision_at_k(const QueryJudgment& j, int k);
PrefixValue recall_at_k(const QueryJudgment& j, int k);

double average_precision(const QueryJudgment& j);
double mean_average_precision(std::span<const QueryJudgment> js);

// Precision interpolated at recall 0.0, 0.1, ..., 1.0.
std::array<double, 11> interpolated_pr(const QueryJudgment& j);

// C * floor(L / B).
std::int64_t eqc(std::int64_t length, std::int64_t base = 5, std::int64_t cost = 1);

}  // namespace cbir
