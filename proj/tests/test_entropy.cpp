#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cxrflag/corpus.hpp"
#include "cxrflag/entropy.hpp"
#include "cxrflag/errors.hpp"
#include "cxrflag/evaluation.hpp"
#include "test_util.hpp"

namespace cxrflag {
namespace {

using testing::Gen;

constexpr double kExact = 1e-12;

Report report_with(TokenProbabilities p, std::optional<TokenDistributions> d = std::nullopt) {
  Report r;
  r.study_id = "e";
  r.text = "x";
  r.token_probs = std::move(p);
  r.token_distributions = std::move(d);
  return r;
}

TEST(EntropyBaselines, AllCertain) {
  const auto s = entropy_baselines(report_with({{1.0, 1.0}, {1.0}}, TokenDistributions{
                                                                       {{1.0, 0.0}, {1.0}},
                                                                       {{0.0, 1.0, 0.0}}}));
  EXPECT_NEAR(s.avg_neg_logprob, 0.0, kExact);
  ASSERT_TRUE(s.avg_entropy.has_value());
  EXPECT_NEAR(*s.avg_entropy, 0.0, kExact);
  EXPECT_EQ(s.distribution_slice, 3);
}

TEST(EntropyBaselines, HalfAndHalf) {
  const auto s = entropy_baselines(
      report_with({{0.5, 0.5}}, TokenDistributions{{{0.5, 0.5}, {0.5, 0.5}}}));
  EXPECT_NEAR(s.avg_neg_logprob, std::log(2.0), kExact);
  EXPECT_NEAR(*s.avg_entropy, std::log(2.0), kExact);
}

TEST(EntropyBaselines, MeanOfSentenceMeans) {
  // Sentence means 1 and 3 (in -log p); token-weighted mean would differ.
  const double e = std::exp(1.0);
  const auto s = entropy_baselines(report_with({{1 / e}, {1 / (e * e * e), 1 / (e * e * e),
                                                          1 / (e * e * e)}}));
  EXPECT_NEAR(s.avg_neg_logprob, 2.0, kExact);
  EXPECT_FALSE(s.avg_entropy.has_value());
}

TEST(EntropyBaselines, Errors) {
  Report none;
  none.study_id = "e";
  none.text = "x";
  EXPECT_THROW(entropy_baselines(none), DataError);
  EXPECT_THROW(entropy_baselines(report_with({{}})), DataError);
  EXPECT_THROW(entropy_baselines(report_with({{0.0}})), DataError);
  EXPECT_THROW(entropy_baselines(report_with({{0.5}}, TokenDistributions{{{0.5}}, {{0.5}}})),
               DataError);
}

// Random inputs: non-negative scores and the bound -log(max p) <= avg.
TEST(EntropyBaselines, PropertyBounds) {
  Gen g(8);
  for (int trial = 0; trial < 300; ++trial) {
    TokenProbabilities p;
    TokenDistributions d;
    double max_p = 0.0;
    const int sentences = g.uniform_int(1, 5);
    for (int s = 0; s < sentences; ++s) {
      p.emplace_back();
      d.emplace_back();
      const int tokens = g.uniform_int(1, 6);
      for (int t = 0; t < tokens; ++t) {
        const double x = 1e-6 + (1 - 1e-6) * g.uniform01();
        p.back().push_back(x);
        max_p = std::max(max_p, x);
        d.back().push_back({x, 1 - x});
      }
    }
    const auto s = entropy_baselines(report_with(p, d));
    EXPECT_GE(s.avg_neg_logprob, -std::log(max_p) - kExact);
    EXPECT_GE(*s.avg_entropy, 0.0);
  }
}

TEST(EntropyBaselines, SerialAndParallelAgree) {
  Gen g(12);
  std::vector<Report> reports;
  for (int i = 0; i < 64; ++i) {
    TokenProbabilities p(1);
    for (int t = 0; t < 5; ++t) p[0].push_back(0.01 + 0.99 * g.uniform01());
    reports.push_back(report_with(p));
    reports.back().study_id = "e" + std::to_string(i);
  }
  EXPECT_EQ(serial::entropy_baselines(reports), omp::entropy_baselines(reports));
}

TEST(EntropyBaselines, ParallelRethrowsFirstError) {
  std::vector<Report> reports(8, report_with({{0.5}}));
  reports[3].token_probs.reset();
  reports[3].study_id = "bad3";
  reports[6].token_probs.reset();
  reports[6].study_id = "bad6";
  try {
    omp::entropy_baselines(reports);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("bad3"), std::string::npos);
  }
}

// Fixture ranking: per-report values are ingested, grouped by rank, and the
// group means compared with direct sums over the same values.
TEST(EntropyFixture, GroupMeansFromIngestedValues) {
  const auto studies = load_dataset(testing::fixture_dir() / "entropy" / "dataset.jsonl", 10);
  ASSERT_EQ(studies.size(), 197u);
  std::vector<RankedReport> by_entropy;
  for (const auto& s : studies) {
    const auto e = entropy_baselines(s.candidate);
    by_entropy.push_back({s.study_id, *e.avg_entropy,
                          static_cast<int>(s.external_metrics.at("true_hallucinations"))});
  }
  const auto split = rank_split(by_entropy, 10);
  EXPECT_EQ(split.accepted.n, 187);
  std::vector<RankedReport> sorted = by_entropy;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.score != b.score ? a.score > b.score : a.study_id < b.study_id;
  });
  double top = 0;
  for (int i = 0; i < 10; ++i) top += sorted[static_cast<std::size_t>(i)].true_hallucinations;
  EXPECT_NEAR(*split.flagged.mean, top / 10.0, kExact);
}

}  // namespace
}  // namespace cxrflag
