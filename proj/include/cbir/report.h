// Merges evaluation reports into one comparison ordered by average rank.

#pragma once

#include <array>
#include <string>
#include <vector>

#include "cbir/evaluation.h"

namespace cbir {

// Measures a descriptor is ranked on within each (dataset, scheme, metric)
// group: ANMRR and EQC ascending, MAP and P@5/10/50/100 descending.
inline constexpr std::array<const char*, 7> kRankedMeasures = {"ANMRR", "MAP",  "P@5", "P@10",
                                                               "P@50",  "P@100", "EQC"};

struct MergedRow {
  std::string features;
  double average_rank = 0;
  int groups = 0;  // (dataset, scheme, metric) groups the descriptor appears in
};

struct MergedReport {
  std::vector<MergedRow> rows;  // by average rank, then name
  std::vector<std::string> groups;
};

// Tied values share the mean of the positions they occupy. Throws DataError
// on duplicate (features, dataset, scheme, metric) entries, on a dataset name
// used with different sizes, and when groups cover different descriptor sets.
MergedReport merge_reports(const std::vector<EvalReport>& reports);

// features,average_rank
std::string merged_table(const MergedReport& m);

}  // namespace cbir
