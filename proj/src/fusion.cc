#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "cbir/relevance_feedback.h"

namespace cbir {

int FeedbackOracle::ground_truth_size(std::uint32_t query) const {
  const int c = class_of_.at(query);
  return int(std::count(class_of_.begin(), class_of_.end(), c)) - 1;
}

std::string_view fusion_name(Fusion f) { return f == Fusion::kMeanRank ? "mean_rank" : "mean_distance"; }

std::optional<Fusion> parse_fusion(std::string_view name) {
  if (name == "mean_rank") return Fusion::kMeanRank;
  if (name == "mean_distance") return Fusion::kMeanDistance;
  return std::nullopt;
}

RankedList fuse(std::span<const RankedList> lists, Fusion fusion) {
  if (lists.empty()) throw UsageError("fuse: no lists");
  const RankedList& first = lists.front();
  const std::size_t n = first.items.size();
  std::unordered_map<std::uint32_t, std::size_t> slot;
  slot.reserve(n);
  for (std::size_t i = 0; i < n; ++i) slot.emplace(first.items[i].id, i);
  if (slot.size() != n) throw UsageError("fuse: duplicate id in a ranked list");

  std::vector<std::uint32_t> ids(n);
  for (const auto& [id, i] : slot) ids[i] = id;
  std::vector<std::int64_t> rank_sum(n, 0);
  std::vector<std::vector<double>> scores(n);
  for (const RankedList& l : lists) {
    if (l.items.size() != n || l.metric != first.metric || l.order != first.order) {
      throw UsageError("fuse: lists differ in size, metric or order");
    }
    for (std::size_t pos = 0; pos < n; ++pos) {
      const auto it = slot.find(l.items[pos].id);
      if (it == slot.end()) throw UsageError("fuse: lists rank different id sets");
      rank_sum[it->second] += std::int64_t(pos + 1);
      scores[it->second].push_back(l.items[pos].score);
    }
  }
  // Summing sorted values keeps the mean independent of list order.
  std::vector<double> mean_score(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::sort(scores[i].begin(), scores[i].end());
    mean_score[i] = std::accumulate(scores[i].begin(), scores[i].end(), 0.0) / double(lists.size());
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const bool descending = first.order == Order::kDescending;
  auto better_score = [&](std::size_t a, std::size_t b) {
    return descending ? mean_score[a] > mean_score[b] : mean_score[a] < mean_score[b];
  };
  if (fusion == Fusion::kMeanRank) {
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (rank_sum[a] != rank_sum[b]) return rank_sum[a] < rank_sum[b];
      if (mean_score[a] != mean_score[b]) return better_score(a, b);
      return ids[a] < ids[b];
    });
  } else {
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (mean_score[a] != mean_score[b]) return better_score(a, b);
      return ids[a] < ids[b];
    });
  }

  RankedList out;
  out.query_id = first.query_id;
  out.metric = first.metric;
  out.order = fusion == Fusion::kMeanRank ? Order::kAscending : first.order;
  out.items.reserve(n);
  for (std::size_t i : order) {
    const double s = fusion == Fusion::kMeanRank ? double(rank_sum[i]) / double(lists.size()) : mean_score[i];
    out.items.push_back({ids[i], s});
  }
  return out;
}

RankedList expand_and_fuse(std::span<const float> query, std::uint32_t query_id,
                           std::span<const std::uint32_t> expansion, const FeatureTable& table, Metric m,
                           Fusion fusion) {
  std::vector<RankedList> lists;
  lists.reserve(expansion.size() + 1);
  lists.push_back(rank(query, int(query_id), table, m, true));
  if (expansion.empty()) return lists.front();
  for (std::uint32_t e : expansion) lists.push_back(rank(table.vector_of(e), int(query_id), table, m, true));
  RankedList out = fuse(lists, fusion);
  out.query_id = int(query_id);
  return out;
}

RankedList pseudo_rf(std::uint32_t query_id, const FeatureTable& table, Metric m, const RfConfig& cfg) {
  if (cfg.n < 0) throw UsageError("pseudo_rf: n must be >= 0");
  if (table.size() < std::size_t(cfg.n) + 1) {
    throw UsageError("pseudo_rf: table has " + std::to_string(table.size()) + " rows, need n+1 = " +
                     std::to_string(cfg.n + 1));
  }
  const auto q = table.vector_of(query_id);
  const RankedList basic = rank(q, int(query_id), table, m, true);
  if (cfg.n == 0) return basic;
  std::vector<std::uint32_t> top;
  for (int i = 0; i < cfg.n && std::size_t(i) < basic.items.size(); ++i) top.push_back(basic.items[std::size_t(i)].id);
  return expand_and_fuse(q, query_id, top, table, m, cfg.fusion);
}

ManualRfResult manual_rf_simulated(std::uint32_t query_id, const FeatureTable& table, Metric m,
                                   const RfConfig& cfg, const FeedbackOracle& oracle) {
  if (cfg.n < 0) throw UsageError("manual_rf: n must be >= 0");
  const auto q = table.vector_of(query_id);
  ManualRfResult res;
  res.list = rank(q, int(query_id), table, m, true);
  for (const RankedItem& it : res.list.items) {
    if (int(res.used.size()) == cfg.n) break;
    if (oracle.relevant(query_id, it.id)) res.used.push_back(it.id);
  }
  res.shortfall = cfg.n - int(res.used.size());
  if (!res.used.empty()) res.list = expand_and_fuse(q, query_id, res.used, table, m, cfg.fusion);
  return res;
}

ManualSession::ManualSession(const FeatureTable& table, std::uint32_t query_id, Metric m, const RfConfig& cfg,
                             int chunk)
    : table_(table), query_(query_id), metric_(m), cfg_(cfg), chunk_(chunk) {
  if (chunk_ < 1) throw UsageError("manual session: chunk must be >= 1");
  if (cfg_.n < 0) throw UsageError("manual session: n must be >= 0");
  basic_ = rank(table.vector_of(query_id), int(query_id), table, m, true);
  ranking_ = basic_;
  if (cfg_.n == 0 || basic_.items.empty()) {
    finished_ = true;
    return;
  }
  for (; cursor_ < basic_.items.size() && int(pending_.size()) < chunk_; ++cursor_) {
    pending_.push_back(basic_.items[cursor_].id);
  }
}

void ManualSession::submit(std::span<const std::uint8_t> labels) {
  if (finished_) throw SessionFinishedError("session already finished");
  if (labels.size() != pending_.size()) {
    throw UsageError("expected " + std::to_string(pending_.size()) + " labels, got " + std::to_string(labels.size()));
  }
  for (std::size_t i = 0; i < pending_.size(); ++i) {
    const auto it = labels_.find(pending_[i]);
    if (it != labels_.end() && it->second != bool(labels[i])) {
      throw LabelConflictError("label for image " + std::to_string(pending_[i]) + " contradicts an earlier label");
    }
  }
  ++rounds_;
  for (std::size_t i = 0; i < pending_.size(); ++i) {
    labels_[pending_[i]] = labels[i] != 0;
    if (labels[i] && int(used_.size()) < cfg_.n) used_.push_back(pending_[i]);
  }
  pending_.clear();
  if (int(used_.size()) < cfg_.n && cursor_ < basic_.items.size()) {
    for (; cursor_ < basic_.items.size() && int(pending_.size()) < chunk_; ++cursor_) {
      pending_.push_back(basic_.items[cursor_].id);
    }
    return;
  }
  finished_ = true;
  ranking_ = expand_and_fuse(table_.vector_of(query_), query_, used_, table_, metric_, cfg_.fusion);
}

}  // namespace cbir
