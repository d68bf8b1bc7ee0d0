#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "cbir/metrics.h"
#include "metric_cases.h"

namespace cbir {
namespace {

using testing::metric_cases;

QueryJudgment random_judgment(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> ng_dist(1, 12);
  const int ng = ng_dist(rng);
  const int n = std::uniform_int_distribution<int>(0, 60)(rng);
  QueryJudgment j;
  j.ng = ng;
  j.rel.assign(std::size_t(n), 0);
  int placed = 0;
  for (auto& r : j.rel) {
    if (placed < ng && std::bernoulli_distribution(0.3)(rng)) {
      r = 1;
      ++placed;
    }
  }
  return j;
}

TEST(Metrics, HandComputedCases) {
  for (const auto& c : metric_cases()) {
    SCOPED_TRACE(c.name);
    const QueryJudgment j = judgment_from_ranks(c.ng, c.relevant_ranks, c.n_retrieved);
    EXPECT_NEAR(avr(j), c.avr, 1e-9);
    EXPECT_NEAR(nmrr(j), c.nmrr, 1e-9);
    EXPECT_NEAR(average_precision(j), c.ap, 1e-9);
    for (const auto& [k, p] : c.precision) EXPECT_NEAR(precision_at_k(j, k).value, p, 1e-9) << k;
    const auto pr = interpolated_pr(j);
    for (int i = 0; i <= 10; ++i) EXPECT_NEAR(pr[std::size_t(i)], c.pr[std::size_t(i)], 1e-9) << i;
  }
}

TEST(Metrics, AnmrrAndMapAreMeans) {
  std::vector<QueryJudgment> js;
  double nsum = 0, asum = 0;
  for (const auto& c : metric_cases()) {
    js.push_back(judgment_from_ranks(c.ng, c.relevant_ranks, c.n_retrieved));
    nsum += c.nmrr;
    asum += c.ap;
  }
  const double n = double(js.size());
  EXPECT_NEAR(anmrr(js), nsum / n, 1e-12);
  EXPECT_NEAR(mean_average_precision(js), asum / n, 1e-12);
}

TEST(Metrics, RecallAndTruncation) {
  const QueryJudgment j = judgment_from_ranks(2, std::vector<int>{1, 3}, 3);
  EXPECT_NEAR(precision_at_k(j, 3).value, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(recall_at_k(j, 3).value, 1.0, 1e-15);
  EXPECT_NEAR(recall_at_k(j, 1).value, 0.5, 1e-15);
  EXPECT_FALSE(precision_at_k(j, 3).truncated);
  const PrefixValue beyond = precision_at_k(j, 10);
  EXPECT_TRUE(beyond.truncated);
  EXPECT_NEAR(beyond.value, 0.2, 1e-15);
  EXPECT_THROW(precision_at_k(j, 0), UsageError);
}

TEST(Metrics, NoGroundTruth) {
  QueryJudgment j;
  j.ng = 0;
  j.rel = {0, 0};
  EXPECT_THROW(avr(j), UsageError);
  EXPECT_THROW(average_precision(j), UsageError);
  const std::vector<QueryJudgment> js = {j, judgment_from_ranks(1, std::vector<int>{1}, 1)};
  int skipped = -1;
  EXPECT_EQ(anmrr(js, &skipped), 0.0);
  EXPECT_EQ(skipped, 1);
  EXPECT_EQ(mean_average_precision(js), 1.0);
}

TEST(Metrics, KOverride) {
  const QueryJudgment j = judgment_from_ranks(2, std::vector<int>{1, 5}, 10);
  EXPECT_NEAR(avr(j, 10), 3.0, 1e-15);  // rank 5 kept when K = 10
  EXPECT_NEAR(nmrr(j, 10), (3.0 - 1.5) / (12.5 - 1.5), 1e-15);
}

TEST(Metrics, AppendingIrrelevantKeepsAp) {
  QueryJudgment j = judgment_from_ranks(3, std::vector<int>{1, 4}, 4);
  const double before = average_precision(j);
  j.rel.resize(40, 0);
  EXPECT_EQ(average_precision(j), before);
}

TEST(MetricProperties, BoundsAndMonotonePr) {
  std::mt19937_64 rng(42);
  for (int t = 0; t < 2000; ++t) {
    const QueryJudgment j = random_judgment(rng);
    const double n = nmrr(j);
    EXPECT_GE(n, -1e-12);
    EXPECT_LE(n, 1.0 + 1e-12);
    const double ap = average_precision(j);
    EXPECT_GE(ap, 0.0);
    EXPECT_LE(ap, 1.0);
    const auto pr = interpolated_pr(j);
    for (int i = 1; i <= 10; ++i) EXPECT_LE(pr[std::size_t(i)], pr[std::size_t(i - 1)]);
    for (int k : {1, 5, 10, 50}) {
      const double p = precision_at_k(j, k).value;
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 1.0);
    }
  }
}

TEST(MetricProperties, NmrrZeroIffPerfectPrefix) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 2000; ++t) {
    const QueryJudgment j = random_judgment(rng);
    bool perfect = int(j.rel.size()) >= j.ng;
    for (int i = 0; perfect && i < j.ng; ++i) perfect = j.rel[std::size_t(i)] == 1;
    EXPECT_EQ(nmrr(j) == 0.0, perfect);
  }
}

TEST(MetricProperties, AggregatesIgnoreQueryOrder) {
  std::mt19937_64 rng(9);
  std::vector<QueryJudgment> js;
  for (int i = 0; i < 50; ++i) js.push_back(random_judgment(rng));
  const double a = anmrr(js), m = mean_average_precision(js);
  std::shuffle(js.begin(), js.end(), rng);
  EXPECT_NEAR(anmrr(js), a, 1e-12);
  EXPECT_NEAR(mean_average_precision(js), m, 1e-12);
}

TEST(Eqc, TableValues) {
  const std::pair<std::int64_t, std::int64_t> table[] = {{5, 1},       {128, 25},     {1024, 204}, {2048, 409},
                                                         {4096, 819}, {25600, 5120}, {40960, 8192}};
  for (const auto& [l, q] : table) EXPECT_EQ(eqc(l), q) << l;
  EXPECT_EQ(eqc(4096, 5, 20), 16380);
  EXPECT_THROW(eqc(0), UsageError);
}

TEST(Eqc, Monotone) {
  for (std::int64_t l = 1; l < 5000; ++l) {
    EXPECT_LE(eqc(l), eqc(l + 1));
    if (l % 5 == 0) {
      EXPECT_EQ(eqc(l + 5), eqc(l) + 1);
    }
  }
}

TEST(Judge, UsesClassesAndSkipsQuery) {
  const Dataset ds = dataset_from_labels("d", {0, 0, 1, 0});
  RankedList list;
  list.query_id = 0;
  list.items = {{0, 0.0}, {2, 0.1}, {3, 0.2}, {1, 0.3}};
  const QueryJudgment j = judge(list, ds);
  EXPECT_EQ(j.ng, 2);
  EXPECT_EQ(j.rel, (std::vector<std::uint8_t>{0, 0, 1, 1}));
  list.items.push_back({9, 1.0});
  EXPECT_THROW(judge(list, ds), DataError);
}

}  // namespace
}  // namespace cbir
