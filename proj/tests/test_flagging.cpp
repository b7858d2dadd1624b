#include <gtest/gtest.h>

#include <vector>

#include "cxrflag/errors.hpp"
#include "cxrflag/flagging.hpp"
#include "test_util.hpp"

namespace cxrflag {
namespace {

using testing::Gen;

EntailmentScore score_of(int value, int index = 0, const std::string& id = "s1") {
  return {{id, index}, value, 10};
}

std::vector<SentenceDecision> decisions_with(const std::string& id, std::vector<bool> flags) {
  std::vector<SentenceDecision> out;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    out.push_back({{id, static_cast<int>(i)}, flags[i] ? 0 : 10, flags[i]});
  }
  return out;
}

TEST(FlagSentence, StrictlyBelowThreshold) {
  EXPECT_TRUE(flag_sentence(score_of(5), 6).flagged);
  EXPECT_FALSE(flag_sentence(score_of(6), 6).flagged);
  EXPECT_TRUE(flag_sentence(score_of(0), 4).flagged);
  const auto d = flag_sentence(score_of(3, 2, "x"), 4);
  EXPECT_EQ(d.sentence_ref, (SentenceRef{"x", 2}));
  EXPECT_EQ(d.score, 3);
}

TEST(FlagReport, AtLeastRule) {
  const auto four = decisions_with("r", {true, true, true, true, false});
  EXPECT_TRUE(flag_report("r", four, 4).flagged);
  EXPECT_EQ(flag_report("r", four, 4).flag_count, 4);
  const auto none = decisions_with("r", {false, false});
  EXPECT_FALSE(flag_report("r", none, 2).flagged);
}

TEST(FlagReport, MoreThanRule) {
  const auto four = decisions_with("r", {true, true, true, true});
  EXPECT_FALSE(flag_report("r", four, 4, ReportRule::kMoreThan).flagged);
  EXPECT_TRUE(flag_report("r", four, 3, ReportRule::kMoreThan).flagged);
}

TEST(FlagReport, EmptyDecisionsAccepted) {
  const auto d = flag_report("r", {}, 1);
  EXPECT_FALSE(d.flagged);
  EXPECT_EQ(d.flag_count, 0);
}

TEST(FlagReport, MixedStudiesRejected) {
  auto d = decisions_with("a", {true});
  d.push_back({{"b", 0}, 0, true});
  EXPECT_THROW(flag_report("a", d, 1), DataError);
}

TEST(ReportRuleNames, RoundTrip) {
  EXPECT_EQ(report_rule_from_string("at_least"), ReportRule::kAtLeast);
  EXPECT_EQ(report_rule_from_string("more_than"), ReportRule::kMoreThan);
  EXPECT_EQ(to_string(ReportRule::kMoreThan), "more_than");
  EXPECT_THROW(report_rule_from_string("sometimes"), ConfigError);
}

Report three_sentence_report() {
  Report r;
  r.study_id = "r";
  r.text = "Mild cardiomegaly. No pleural effusion. Right chest tube in place.";
  r.token_probs = TokenProbabilities{{0.9, 0.8}, {0.7}, {0.6}};
  return r;
}

TEST(RemoveFlagged, NoFlagsIsIdentity) {
  const auto r = three_sentence_report();
  const auto out = remove_flagged(r, decisions_with("r", {false, false, false}));
  EXPECT_EQ(out.report, r);
  EXPECT_FALSE(out.emptied);
}

TEST(RemoveFlagged, AllFlaggedEmptiesReport) {
  const auto out = remove_flagged(three_sentence_report(), decisions_with("r", {true, true, true}));
  EXPECT_TRUE(out.report.text.empty());
  EXPECT_TRUE(out.emptied);
}

TEST(RemoveFlagged, MiddleSentenceDropped) {
  const auto out =
      remove_flagged(three_sentence_report(), decisions_with("r", {false, true, false}));
  EXPECT_EQ(out.report.text, "Mild cardiomegaly. Right chest tube in place.");
  EXPECT_FALSE(out.report.token_probs.has_value());
  EXPECT_FALSE(out.emptied);
}

TEST(RemoveFlagged, CoverageMismatch) {
  EXPECT_THROW(remove_flagged(three_sentence_report(), decisions_with("r", {true, false})),
               DataError);
  auto shifted = decisions_with("r", {true, false, false});
  shifted[2].sentence_ref.index = 5;
  EXPECT_THROW(remove_flagged(three_sentence_report(), shifted), DataError);
}

// Raising lambda1 can only add flagged sentences.
TEST(FlaggingProperty, NestedSentenceFlagsAcrossLambda1) {
  Gen g(101);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = g.uniform_int(1, 15);
    const int count = g.uniform_int(1, 40);
    std::vector<EntailmentScore> scores;
    for (int i = 0; i < count; ++i) scores.push_back(score_of(g.uniform_int(0, n), i));
    const int lo = g.uniform_int(0, n + 1);
    const int hi = g.uniform_int(lo, n + 1);
    for (const auto& s : scores) {
      if (flag_sentence(s, lo).flagged) ASSERT_TRUE(flag_sentence(s, hi).flagged);
    }
  }
}

// Raising lambda2 can only remove flagged reports; raising lambda1 can only
// add them.
TEST(FlaggingProperty, NestedReportFlagsAcrossLambda2) {
  Gen g(202);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 10;
    const int lambda1 = g.uniform_int(0, n + 1);
    const int lambda1_hi = g.uniform_int(lambda1, n + 1);
    const int lo = g.uniform_int(1, 8);
    const int hi = g.uniform_int(lo, 9);
    const auto rule = g.coin(0.5) ? ReportRule::kAtLeast : ReportRule::kMoreThan;
    for (int r = 0; r < 20; ++r) {
      const std::string id = "r" + std::to_string(r);
      std::vector<SentenceDecision> at, at_hi;
      const int len = g.uniform_int(0, 12);
      for (int i = 0; i < len; ++i) {
        const auto s = score_of(g.uniform_int(0, n), i, id);
        at.push_back(flag_sentence(s, lambda1));
        at_hi.push_back(flag_sentence(s, lambda1_hi));
      }
      if (flag_report(id, at, hi, rule).flagged) ASSERT_TRUE(flag_report(id, at, lo, rule).flagged);
      if (flag_report(id, at, lo, rule).flagged) {
        ASSERT_TRUE(flag_report(id, at_hi, lo, rule).flagged);
      }
    }
  }
}

}  // namespace
}  // namespace cxrflag
