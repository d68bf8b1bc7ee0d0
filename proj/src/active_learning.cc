#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "cbir/metrics.h"
#include "cbir/relevance_feedback.h"

namespace cbir {
namespace {

constexpr int kKernelKmeansRestarts = 8;
constexpr int kKernelKmeansMaxIters = 100;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

struct KernelClustering {
  std::vector<int> assign;
  double objective = std::numeric_limits<double>::infinity();
};

// Squared feature-space distance of every point to every cluster mean.
std::vector<double> cluster_distances(const std::vector<double>& K, int n, const std::vector<int>& assign, int h) {
  std::vector<int> size(std::size_t(h), 0);
  for (int c : assign) ++size[std::size_t(c)];
  std::vector<double> within(std::size_t(h), 0.0);  // sum over members j,l of K_jl
  std::vector<double> to(std::size_t(n) * h, 0.0);  // sum over members j of K_ij
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) to[std::size_t(i) * h + assign[j]] += K[std::size_t(i) * n + j];
  }
  for (int i = 0; i < n; ++i) within[std::size_t(assign[i])] += to[std::size_t(i) * h + assign[i]];
  std::vector<double> d(std::size_t(n) * h, std::numeric_limits<double>::infinity());
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < h; ++c) {
      const double s = size[std::size_t(c)];
      if (s == 0) continue;
      d[std::size_t(i) * h + c] = K[std::size_t(i) * n + i] - 2.0 * to[std::size_t(i) * h + c] / s + within[std::size_t(c)] / (s * s);
    }
  }
  return d;
}

KernelClustering kernel_kmeans_once(const std::vector<double>& K, int n, int h, std::mt19937_64& rng) {
  auto dist2 = [&](int i, int j) {
    return std::max(0.0, K[std::size_t(i) * n + i] + K[std::size_t(j) * n + j] - 2.0 * K[std::size_t(i) * n + j]);
  };
  // k-means++ seeding on kernel distances.
  std::vector<int> centers = {int(std::uniform_int_distribution<int>(0, n - 1)(rng))};
  std::vector<double> nearest(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) nearest[std::size_t(i)] = dist2(i, centers[0]);
  while (int(centers.size()) < h) {
    const double total = std::accumulate(nearest.begin(), nearest.end(), 0.0);
    int pick = 0;
    if (total <= 0) {
      pick = std::uniform_int_distribution<int>(0, n - 1)(rng);
    } else {
      double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (pick = 0; pick < n - 1; ++pick) {
        u -= nearest[std::size_t(pick)];
        if (u < 0) break;
      }
    }
    centers.push_back(pick);
    for (int i = 0; i < n; ++i) nearest[std::size_t(i)] = std::min(nearest[std::size_t(i)], dist2(i, pick));
  }
  KernelClustering out;
  out.assign.assign(std::size_t(n), 0);
  for (int i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int c = 0; c < h; ++c) {
      const double d = dist2(i, centers[std::size_t(c)]);
      if (d < best) {
        best = d;
        out.assign[std::size_t(i)] = c;
      }
    }
  }
  for (int iter = 0; iter < kKernelKmeansMaxIters; ++iter) {
    // Refill empty clusters with the point farthest from its own cluster.
    std::vector<int> size(std::size_t(h), 0);
    for (int c : out.assign) ++size[std::size_t(c)];
    for (int c = 0; c < h; ++c) {
      if (size[std::size_t(c)] > 0) continue;
      const std::vector<double> d = cluster_distances(K, n, out.assign, h);
      int far = -1;
      for (int i = 0; i < n; ++i) {
        if (size[std::size_t(out.assign[std::size_t(i)])] < 2) continue;
        if (far < 0 || d[std::size_t(i) * h + out.assign[std::size_t(i)]] > d[std::size_t(far) * h + out.assign[std::size_t(far)]]) far = i;
      }
      if (far < 0) break;
      --size[std::size_t(out.assign[std::size_t(far)])];
      out.assign[std::size_t(far)] = c;
      size[std::size_t(c)] = 1;
    }
    const std::vector<double> d = cluster_distances(K, n, out.assign, h);
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = out.assign[std::size_t(i)];
      for (int c = 0; c < h; ++c) {
        if (d[std::size_t(i) * h + c] < d[std::size_t(i) * h + best]) best = c;
      }
      if (best != out.assign[std::size_t(i)]) {
        out.assign[std::size_t(i)] = best;
        changed = true;
      }
    }
    if (!changed) break;
  }
  const std::vector<double> d = cluster_distances(K, n, out.assign, h);
  out.objective = 0;
  for (int i = 0; i < n; ++i) out.objective += d[std::size_t(i) * h + out.assign[std::size_t(i)]];
  return out;
}

}  // namespace

AlrfSelection alrf_select(std::span<const std::uint32_t> candidates, std::span<const double> decision,
                          const FeatureTable& table, int p, int h, std::uint64_t seed) {
  if (candidates.size() != decision.size()) throw UsageError("alrf_select: one decision value per candidate");
  if (p < 1 || h < 1) throw UsageError("alrf_select: p and h must be >= 1");
  if (h >= p) throw UsageError("alrf_select: h must be smaller than p");
  AlrfSelection out;
  if (candidates.empty()) return out;
  if (candidates.size() < std::size_t(p)) {
    out.warnings.push_back("only " + std::to_string(candidates.size()) + " candidates for p = " + std::to_string(p));
  }

  // Step 1: the p most uncertain candidates.
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double fa = std::abs(decision[a]), fb = std::abs(decision[b]);
    if (fa != fb) return fa < fb;
    return candidates[a] < candidates[b];
  });
  const int n = int(std::min<std::size_t>(order.size(), std::size_t(p)));
  std::vector<std::uint32_t> pool(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pool[std::size_t(i)] = candidates[order[std::size_t(i)]];
  std::sort(pool.begin(), pool.end());
  if (n <= h) {
    out.ids = pool;
    return out;
  }

  // Step 2: kernel k-means into h clusters, one dense representative each.
  std::vector<double> K(std::size_t(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const double k = hi_kernel(table.vector_of(pool[std::size_t(i)]), table.vector_of(pool[std::size_t(j)]));
      K[std::size_t(i) * n + j] = K[std::size_t(j) * n + i] = k;
    }
  }
  std::mt19937_64 rng(seed);
  KernelClustering best;
  for (int r = 0; r < kKernelKmeansRestarts; ++r) {
    KernelClustering c = kernel_kmeans_once(K, n, h, rng);
    if (c.objective < best.objective) best = std::move(c);
  }
  for (int c = 0; c < h; ++c) {
    std::vector<int> members;
    for (int i = 0; i < n; ++i) {
      if (best.assign[std::size_t(i)] == c) members.push_back(i);
    }
    if (members.empty()) continue;
    int rep = members.front();
    double rep_density = -std::numeric_limits<double>::infinity();
    for (int i : members) {
      double s = 0;
      for (int j : members) {
        if (j != i) s += K[std::size_t(i) * n + j];
      }
      const double density = members.size() > 1 ? s / double(members.size() - 1) : 0.0;
      if (density > rep_density) {  // members are in ascending id order
        rep_density = density;
        rep = i;
      }
    }
    out.ids.push_back(pool[std::size_t(rep)]);
  }
  std::sort(out.ids.begin(), out.ids.end());
  return out;
}

AlrfSession::AlrfSession(const FeatureTable& table, std::uint32_t query_id, const AlrfConfig& cfg,
                         const FeedbackOracle* oracle)
    : table_(table), query_(query_id), cfg_(cfg), oracle_(oracle) {
  if (cfg_.iterations < 0 || cfg_.seed_relevant < 1 || cfg_.seed_irrelevant < 1 || cfg_.seed_chunk < 1) {
    throw UsageError("alrf: iterations >= 0, seed_relevant >= 1, seed_irrelevant >= 1 and seed_chunk >= 1 required");
  }
  if (cfg_.h < 1 || cfg_.h >= cfg_.p) throw UsageError("alrf: 1 <= h < p required");
  if (!table.nonnegative()) {
    throw DataError("alrf: the intersection kernel needs nonnegative features; table '" + table.kind() +
                    "' has negative entries");
  }
  basic_ = rank(table.vector_of(query_id), int(query_id), table, cfg_.metric, true);
  ranking_ = basic_;
  labels_[query_] = true;
  for (; basic_cursor_ < basic_.items.size() && int(pending_.size()) < cfg_.seed_chunk; ++basic_cursor_) {
    pending_.push_back(basic_.items[basic_cursor_].id);
  }
  if (pending_.empty()) finish_seeding();
}

void AlrfSession::submit(std::span<const std::uint8_t> labels) {
  if (phase_ == Phase::kFinished) throw SessionFinishedError("session already finished");
  if (labels.size() != pending_.size()) {
    throw UsageError("expected " + std::to_string(pending_.size()) + " labels, got " + std::to_string(labels.size()));
  }
  for (std::size_t i = 0; i < pending_.size(); ++i) {
    const auto it = labels_.find(pending_[i]);
    if (it != labels_.end() && it->second != bool(labels[i])) {
      throw LabelConflictError("label for image " + std::to_string(pending_[i]) + " contradicts an earlier label");
    }
  }
  const std::vector<std::uint32_t> shown = std::move(pending_);
  pending_.clear();
  for (std::size_t i = 0; i < shown.size(); ++i) labels_[shown[i]] = labels[i] != 0;

  if (phase_ == Phase::kSeeding) {
    const std::size_t need_rel = std::size_t(cfg_.seed_relevant - 1);
    const std::size_t need_irr = std::size_t(cfg_.seed_irrelevant);
    for (std::size_t i = 0; i < shown.size(); ++i) {
      if (labels[i] && seed_rel_.size() < need_rel) seed_rel_.push_back(shown[i]);
      if (!labels[i] && seed_irr_.size() < need_irr) seed_irr_.push_back(shown[i]);
    }
    if ((seed_rel_.size() == need_rel && seed_irr_.size() == need_irr) || basic_cursor_ >= basic_.items.size()) {
      finish_seeding();
      return;
    }
    for (; basic_cursor_ < basic_.items.size() && int(pending_.size()) < cfg_.seed_chunk; ++basic_cursor_) {
      pending_.push_back(basic_.items[basic_cursor_].id);
    }
    return;
  }

  for (std::size_t i = 0; i < shown.size(); ++i) {
    train_ids_.push_back(shown[i]);
    train_labels_.push_back(labels[i] ? 1 : -1);
  }
  train_and_rank();
  AlrfRound round;
  round.iteration = int(trace_.size()) + 1;
  round.shown = shown;
  round.labels.assign(labels.begin(), labels.end());
  if (oracle_ && oracle_->ground_truth_size(query_) > 0) {
    QueryJudgment j;
    j.query_id = int(query_);
    j.ng = oracle_->ground_truth_size(query_);
    for (const RankedItem& it : ranking_.items) j.rel.push_back(oracle_->relevant(query_, it.id));
    round.nmrr = nmrr(j);
  }
  trace_.push_back(std::move(round));
  if (int(trace_.size()) >= cfg_.iterations) {
    phase_ = Phase::kFinished;
    return;
  }
  propose();
}

void AlrfSession::finish_seeding() {
  if (seed_irr_.empty()) throw DataError("alrf: no irrelevant image found for query " + std::to_string(query_));
  if (int(seed_rel_.size()) < cfg_.seed_relevant - 1) {
    warnings_.push_back("only " + std::to_string(seed_rel_.size() + 1) + " relevant seed images");
  }
  train_ids_ = {query_};
  train_labels_ = {1};
  for (std::uint32_t id : seed_rel_) {
    train_ids_.push_back(id);
    train_labels_.push_back(1);
  }
  for (std::uint32_t id : seed_irr_) {
    train_ids_.push_back(id);
    train_labels_.push_back(-1);
  }
  phase_ = Phase::kIterating;
  train_and_rank();
  if (cfg_.iterations == 0) {
    phase_ = Phase::kFinished;
    return;
  }
  propose();
}

void AlrfSession::train_and_rank() {
  const std::size_t rows = table_.size();
  while (kernel_rows_.size() < train_ids_.size()) {
    const auto x = table_.vector_of(train_ids_[kernel_rows_.size()]);
    std::vector<double> k(rows);
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < std::int64_t(rows); ++r) k[std::size_t(r)] = hi_kernel(x, table_.row(std::size_t(r)));
    kernel_rows_.push_back(std::move(k));
  }
  const std::size_t n = train_ids_.size();
  std::vector<std::size_t> train_rows(n);
  for (std::size_t a = 0; a < n; ++a) train_rows[a] = *table_.find(train_ids_[a]);
  std::vector<double> K(n * n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) K[a * n + b] = kernel_rows_[a][train_rows[b]];
  }
  // Kernel rows are computed in one direction; symmetrize exactly.
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) K[b * n + a] = K[a * n + b];
  }
  SvmOptions opts;
  opts.c = cfg_.svm_c;
  const SvmModel model = train_svm(K, train_labels_, opts);
  if (!model.converged) warnings_.push_back("svm did not converge");

  decision_.assign(rows, model.bias);
  for (std::size_t a = 0; a < n; ++a) {
    const double w = model.alpha[a] * model.labels[a];
    if (w == 0) continue;
    for (std::size_t r = 0; r < rows; ++r) decision_[r] += w * kernel_rows_[a][r];
  }
  ranking_.query_id = int(query_);
  ranking_.metric = Metric::kHistIntersection;
  ranking_.order = Order::kDescending;
  ranking_.items.clear();
  for (std::size_t r = 0; r < rows; ++r) {
    if (table_.id_at(r) == query_) continue;
    ranking_.items.push_back({table_.id_at(r), decision_[r]});
  }
  std::sort(ranking_.items.begin(), ranking_.items.end(),
            [](const RankedItem& a, const RankedItem& b) { return ranks_before(Order::kDescending, a, b); });
}

void AlrfSession::propose() {
  // Seeding labels outside the training set still count as answered.
  std::vector<std::uint32_t> cand;
  std::vector<double> f;
  for (std::size_t r = 0; r < table_.size(); ++r) {
    const std::uint32_t id = table_.id_at(r);
    if (labels_.count(id)) continue;
    cand.push_back(id);
    f.push_back(decision_[r]);
  }
  if (cand.empty()) {
    warnings_.push_back("no unlabeled images left");
    phase_ = Phase::kFinished;
    return;
  }
  const std::uint64_t seed = splitmix(splitmix(cfg_.seed ^ splitmix(query_)) + std::uint64_t(trace_.size()));
  AlrfSelection sel = alrf_select(cand, f, table_, cfg_.p, cfg_.h, seed);
  warnings_.insert(warnings_.end(), sel.warnings.begin(), sel.warnings.end());
  pending_ = std::move(sel.ids);
}

AlrfResult alrf_session(std::uint32_t query_id, const FeatureTable& table, const FeedbackOracle& oracle,
                        const AlrfConfig& cfg) {
  AlrfSession s(table, query_id, cfg, &oracle);
  std::vector<std::uint8_t> labels;
  while (s.phase() != AlrfSession::Phase::kFinished) {
    labels.clear();
    for (std::uint32_t id : s.pending()) labels.push_back(oracle.relevant(query_id, id));
    s.submit(labels);
  }
  AlrfResult r;
  r.list = s.ranking();
  r.trace = s.trace();
  r.training_size = s.training_size();
  r.warnings = s.warnings();
  return r;
}

}  // namespace cbir
