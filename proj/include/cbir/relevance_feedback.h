// Relevance feedback: pseudo and simulated manual query expansion with rank
// fusion, a kernel SVM, and the active-learning feedback loop.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cbir/feature_store.h"
#include "cbir/retrieval.h"

namespace cbir {

// A label disagrees with one given earlier for the same image.
class LabelConflictError : public UsageError {
 public:
  using UsageError::UsageError;
};

// Feedback was sent to a session that has already produced its final ranking.
class SessionFinishedError : public UsageError {
 public:
  using UsageError::UsageError;
};

// Answers relevance questions from class labels.
class FeedbackOracle {
 public:
  explicit FeedbackOracle(std::vector<int> class_of) : class_of_(std::move(class_of)) {}

  bool relevant(std::uint32_t query, std::uint32_t image) const {
    return image != query && class_of_.at(image) == class_of_.at(query);
  }
  // Relevant images for the query, the query excluded.
  int ground_truth_size(std::uint32_t query) const;

 private:
  std::vector<int> class_of_;
};

// ---- Expansion schemes ----

enum class Fusion {
  kMeanRank,      // mean 1-based position; ties by mean score, then id
  kMeanDistance,  // mean score; ties by id
};

std::string_view fusion_name(Fusion f);
std::optional<Fusion> parse_fusion(std::string_view name);

struct RfConfig {
  int n = 5;
  Fusion fusion = Fusion::kMeanRank;
};

// Fuses rankings over the same id set. The result does not depend on the
// order of `lists`. Mean-rank fusion scores are mean positions (ascending);
// mean-distance fusion keeps the metric's own direction.
RankedList fuse(std::span<const RankedList> lists, Fusion fusion);

// Ranks the table with the query and with each expansion image (the query
// excluded from all lists) and fuses the n+1 lists. No expansion returns the
// basic ranking unchanged.
RankedList expand_and_fuse(std::span<const float> query, std::uint32_t query_id,
                           std::span<const std::uint32_t> expansion, const FeatureTable& table,
                           Metric m, Fusion fusion);

// Expands with the top n basic results. Throws UsageError when the table has
// fewer than n+1 rows.
RankedList pseudo_rf(std::uint32_t query_id, const FeatureTable& table, Metric m, const RfConfig& cfg);

struct ManualRfResult {
  RankedList list;
  std::vector<std::uint32_t> used;  // expansion images in rank order
  int shortfall = 0;                // n - used.size()
};

// Expands with the first n basic results the oracle marks relevant.
ManualRfResult manual_rf_simulated(std::uint32_t query_id, const FeatureTable& table, Metric m,
                                   const RfConfig& cfg, const FeedbackOracle& oracle);

// ---- Kernel SVM ----

struct SvmOptions {
  double c = 100.0;
  double eps = 1e-6;  // stopping gap of the maximal violating pair
  long max_iterations = 10'000'000;
};

struct SvmModel {
  std::vector<double> alpha;   // one per training point
  std::vector<int> labels;     // +1 / -1
  double bias = 0;
  double c = 0;
  long iterations = 0;
  bool converged = false;

  // sum_i alpha_i y_i k_i + bias, k = kernel values against the training points.
  double decision(std::span<const double> kernel_row) const;
  std::vector<int> support() const;  // indices with alpha > 0
};

// Soft-margin dual solved by sequential minimal optimization with
// second-order working-set selection. `kernel` is the row-major n x n matrix.
// Throws UsageError when only one label is present or the matrix is not
// symmetric within 1e-8.
SvmModel train_svm(std::span<const double> kernel, std::span<const int> labels,
                   const SvmOptions& opts = {});

// Per training point: violation of y f(x) >= 1 (alpha = 0), y f(x) = 1
// (0 < alpha < C) or y f(x) <= 1 (alpha = C). Zero at an exact optimum.
std::vector<double> kkt_residuals(const SvmModel& model, std::span<const double> kernel);

// Histogram intersection kernel between table rows.
double hi_kernel(std::span<const float> x, std::span<const float> y);

// ---- Active learning ----

struct AlrfConfig {
  int iterations = 10;
  int seed_relevant = 2;  // the query counts as one of them
  int seed_irrelevant = 3;
  int p = 20;
  int h = 5;
  double svm_c = 100.0;
  std::uint64_t seed = 1;
  Metric metric = Metric::kEuclidean;  // basic ranking the seeds are drawn from
  int seed_chunk = 20;                 // basic-ranking images shown per seeding round
};

struct AlrfSelection {
  std::vector<std::uint32_t> ids;  // ascending
  std::vector<std::string> warnings;
};

// The p candidates with the smallest |f| (ties by id) are split into h
// clusters by kernel k-means; each cluster contributes the member with the
// largest mean kernel value to its co-members (ties by id).
// `decision` holds f for each candidate.
AlrfSelection alrf_select(std::span<const std::uint32_t> candidates, std::span<const double> decision,
                          const FeatureTable& table, int p, int h, std::uint64_t seed);

struct AlrfRound {
  int iteration = 0;  // 1-based
  std::vector<std::uint32_t> shown;
  std::vector<std::uint8_t> labels;
  std::optional<double> nmrr;  // of the ranking after this round, when judged
};

// One query's feedback loop, driven one labeling round at a time.
// Seeding rounds show consecutive chunks of the basic ranking until the first
// seed_relevant-1 relevant and seed_irrelevant irrelevant images (in rank
// order) are known. Each of the following `iterations` rounds trains the SVM,
// proposes h images and receives their labels; the final ranking orders every
// image but the query by decreasing decision value, ties by id.
class AlrfSession {
 public:
  enum class Phase { kSeeding, kIterating, kFinished };

  // `oracle`, when given, is used only to record NMRR in the trace.
  AlrfSession(const FeatureTable& table, std::uint32_t query_id, const AlrfConfig& cfg,
              const FeedbackOracle* oracle = nullptr);

  Phase phase() const { return phase_; }
  std::uint32_t query_id() const { return query_; }
  const AlrfConfig& config() const { return cfg_; }
  // Images awaiting labels, in display order.
  const std::vector<std::uint32_t>& pending() const { return pending_; }
  // Completed feedback iterations (seeding rounds excluded).
  int iteration() const { return int(trace_.size()); }
  const std::vector<AlrfRound>& trace() const { return trace_; }
  // Current ranking: the basic ranking until the first training, then by f.
  const RankedList& ranking() const { return ranking_; }
  const std::map<std::uint32_t, bool>& labels() const { return labels_; }
  std::size_t training_size() const { return train_ids_.size(); }
  const std::vector<std::string>& warnings() const { return warnings_; }

  // Labels for pending(), in the same order. Throws LabelConflictError,
  // SessionFinishedError, or UsageError on a size mismatch.
  void submit(std::span<const std::uint8_t> labels);

 private:
  void finish_seeding();
  void train_and_rank();
  void propose();

  const FeatureTable& table_;
  std::uint32_t query_;
  AlrfConfig cfg_;
  const FeedbackOracle* oracle_;
  Phase phase_ = Phase::kSeeding;
  RankedList basic_;
  std::size_t basic_cursor_ = 0;
  std::vector<std::uint32_t> seed_rel_, seed_irr_;
  std::vector<std::uint32_t> pending_;
  std::map<std::uint32_t, bool> labels_;
  std::vector<std::uint32_t> train_ids_;
  std::vector<int> train_labels_;
  std::vector<std::vector<double>> kernel_rows_;  // per training image, HI against every table row
  std::vector<double> decision_;                  // per table row
  RankedList ranking_;
  std::vector<AlrfRound> trace_;
  std::vector<std::string> warnings_;
};

struct AlrfResult {
  RankedList list;
  std::vector<AlrfRound> trace;
  std::size_t training_size = 0;
  std::vector<std::string> warnings;
};

// Runs an AlrfSession to completion with the oracle's labels.
AlrfResult alrf_session(std::uint32_t query_id, const FeatureTable& table, const FeedbackOracle& oracle,
                        const AlrfConfig& cfg);

// The manual scheme driven by explicit labels: consecutive chunks of the basic
// ranking are shown until n relevant images are known (or the ranking runs
// out), then the query is expanded with them.
class ManualSession {
 public:
  ManualSession(const FeatureTable& table, std::uint32_t query_id, Metric m, const RfConfig& cfg,
                int chunk = 20);

  bool finished() const { return finished_; }
  const std::vector<std::uint32_t>& pending() const { return pending_; }
  int rounds() const { return rounds_; }
  const RankedList& ranking() const { return ranking_; }
  const std::vector<std::uint32_t>& used() const { return used_; }
  const std::map<std::uint32_t, bool>& labels() const { return labels_; }

  void submit(std::span<const std::uint8_t> labels);

 private:
  const FeatureTable& table_;
  std::uint32_t query_;
  Metric metric_;
  RfConfig cfg_;
  int chunk_;
  RankedList basic_;
  std::size_t cursor_ = 0;
  bool finished_ = false;
  int rounds_ = 0;
  std::vector<std::uint32_t> pending_;
  std::vector<std::uint32_t> used_;
  std::map<std::uint32_t, bool> labels_;
  RankedList ranking_;
};

}  // namespace cbir
