#pragma once

#include <span>
#include <string>
#include <vector>

#include "cxrflag/corpus.hpp"
#include "cxrflag/entailment.hpp"

namespace cxrflag {

struct SentenceDecision {
  SentenceRef sentence_ref;
  int score = 0;
  bool flagged = false;

  bool operator==(const SentenceDecision&) const = default;
};

// kAtLeast flags a report when h(r) >= lambda2; kMoreThan when h(r) > lambda2.
enum class ReportRule { kAtLeast, kMoreThan };

std::string to_string(ReportRule rule);
ReportRule report_rule_from_string(const std::string& name);

struct ReportDecision {
  std::string study_id;
  int flag_count = 0;
  bool flagged = false;
  int lambda2 = 1;

  bool operator==(const ReportDecision&) const = default;
};

SentenceDecision flag_sentence(const EntailmentScore& score, int lambda1);

// An empty decision list yields an accepted report with flag_count 0. Throws
// DataError when decisions belong to different studies.
ReportDecision flag_report(const std::string& study_id, std::span<const SentenceDecision> decisions,
                           int lambda2, ReportRule rule = ReportRule::kAtLeast);

struct FilteredReport {
  Report report;
  // Every sentence was flagged, so nothing is left.
  bool emptied = false;
};

// Drops flagged sentences from the candidate. Decisions must cover exactly
// the candidate's sentences (indices 0..k-1); otherwise DataError.
FilteredReport remove_flagged(const Report& candidate, std::span<const SentenceDecision> decisions);

}  // namespace cxrflag
