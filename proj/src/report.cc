#include "cbir/report.h"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace cbir {
namespace {

double measure(const EvalReport& r, std::size_t m) {
  switch (m) {
    case 0: return r.anmrr;
    case 1: return r.map;
    case 2: return r.precision[0];
    case 3: return r.precision[1];
    case 4: return r.precision[2];
    case 5: return r.precision[3];
    default: return double(r.eqc);
  }
}

bool lower_is_better(std::size_t m) { return m == 0 || m == 6; }

// Fractional ranks (1-based) of values; ties get the mean position.
std::vector<double> fractional_ranks(const std::vector<double>& v, bool ascending) {
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return ascending ? v[a] < v[b] : v[a] > v[b];
  });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double mean_pos = (double(i + 1) + double(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = mean_pos;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

MergedReport merge_reports(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw UsageError("report: no input reports");
  std::map<std::string, int> dataset_size;
  std::map<std::string, std::vector<const EvalReport*>> groups;
  std::set<std::string> seen;
  for (const EvalReport& r : reports) {
    const auto [it, inserted] = dataset_size.emplace(r.dataset, r.dataset_size);
    if (!inserted && it->second != r.dataset_size) {
      throw DataError("report: dataset '" + r.dataset + "' appears with " + std::to_string(it->second) + " and " +
                      std::to_string(r.dataset_size) + " images");
    }
    const std::string group = r.dataset + "/" + r.scheme + "/" + r.metric;
    if (!seen.insert(group + "/" + r.features).second) {
      throw DataError("report: duplicate entry for " + r.features + " in " + group);
    }
    groups[group].push_back(&r);
  }
  std::set<std::string> descriptors;
  for (const EvalReport* r : groups.begin()->second) descriptors.insert(r->features);
  for (const auto& [name, members] : groups) {
    std::set<std::string> d;
    for (const EvalReport* r : members) d.insert(r->features);
    if (d != descriptors) throw DataError("report: group " + name + " covers a different descriptor set");
  }

  std::map<std::string, double> rank_sum;
  std::map<std::string, int> rank_count;
  MergedReport out;
  for (const auto& [name, members] : groups) {
    out.groups.push_back(name);
    for (std::size_t m = 0; m < kRankedMeasures.size(); ++m) {
      std::vector<double> v;
      for (const EvalReport* r : members) v.push_back(measure(*r, m));
      const std::vector<double> ranks = fractional_ranks(v, lower_is_better(m));
      for (std::size_t i = 0; i < members.size(); ++i) {
        rank_sum[members[i]->features] += ranks[i];
        ++rank_count[members[i]->features];
      }
    }
  }
  for (const std::string& d : descriptors) {
    out.rows.push_back({d, rank_sum[d] / rank_count[d], int(groups.size())});
  }
  std::sort(out.rows.begin(), out.rows.end(), [](const MergedRow& a, const MergedRow& b) {
    if (a.average_rank != b.average_rank) return a.average_rank < b.average_rank;
    return a.features < b.features;
  });
  return out;
}

std::string merged_table(const MergedReport& m) {
  std::ostringstream os;
  os << "features,average_rank\n";
  char buf[32];
  for (const MergedRow& r : m.rows) {
    std::snprintf(buf, sizeof buf, "%.4f", r.average_rank);
    os << r.features << ',' << buf << '\n';
  }
  return os.str();
}

}  // namespace cbir
