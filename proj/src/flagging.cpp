#include "cxrflag/flagging.hpp"

#include <algorithm>

#include "cxrflag/errors.hpp"
#include "cxrflag/tokenizer.hpp"

namespace cxrflag {

std::string to_string(ReportRule rule) {
  return rule == ReportRule::kAtLeast ? "at_least" : "more_than";
}

ReportRule report_rule_from_string(const std::string& name) {
  if (name == "at_least") return ReportRule::kAtLeast;
  if (name == "more_than") return ReportRule::kMoreThan;
  throw ConfigError("unknown report_rule '" + name + "' (at_least | more_than)");
}

SentenceDecision flag_sentence(const EntailmentScore& score, int lambda1) {
  return {score.sentence_ref, score.value, score.value < lambda1};
}

ReportDecision flag_report(const std::string& study_id, std::span<const SentenceDecision> decisions,
                           int lambda2, ReportRule rule) {
  ReportDecision out;
  out.study_id = study_id;
  out.lambda2 = lambda2;
  for (const auto& d : decisions) {
    if (d.sentence_ref.study_id != study_id) {
      throw DataError("decision for study '" + d.sentence_ref.study_id +
                      "' passed to report '" + study_id + "'");
    }
    if (d.flagged) ++out.flag_count;
  }
  out.flagged = rule == ReportRule::kAtLeast ? out.flag_count >= lambda2 : out.flag_count > lambda2;
  return out;
}

FilteredReport remove_flagged(const Report& candidate, std::span<const SentenceDecision> decisions) {
  const auto sentences = split_sentences(candidate.text);
  std::vector<const SentenceDecision*> by_index(sentences.size(), nullptr);
  for (const auto& d : decisions) {
    const auto i = d.sentence_ref.index;
    if (d.sentence_ref.study_id != candidate.study_id || i < 0 ||
        static_cast<std::size_t>(i) >= sentences.size() || by_index[static_cast<std::size_t>(i)]) {
      throw DataError("decision " + d.sentence_ref.study_id + "#" + std::to_string(i) +
                      " does not match a sentence of candidate '" + candidate.study_id + "'");
    }
    by_index[static_cast<std::size_t>(i)] = &d;
  }
  if (std::find(by_index.begin(), by_index.end(), nullptr) != by_index.end()) {
    throw DataError("decisions cover " + std::to_string(decisions.size()) + " of " +
                    std::to_string(sentences.size()) + " sentences of '" + candidate.study_id + "'");
  }

  const bool any_flagged =
      std::any_of(by_index.begin(), by_index.end(), [](const auto* d) { return d->flagged; });
  if (!any_flagged) return {candidate, false};

  std::string text;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (by_index[i]->flagged) continue;
    if (!text.empty()) text += ' ';
    text += sentences[i];
  }
  FilteredReport out;
  out.report = candidate;
  out.report.text = std::move(text);
  out.report.token_probs.reset();
  out.report.token_distributions.reset();
  out.emptied = out.report.text.empty() && !sentences.empty();
  return out;
}

}  // namespace cxrflag
