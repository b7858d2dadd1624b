#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cxrflag/corpus.hpp"
#include "cxrflag/entailment.hpp"
#include "cxrflag/flagging.hpp"
#include "json.hpp"

namespace cxrflag {

struct ConfusionCounts {
  long flag_halluc = 0;
  long flag_factual = 0;
  long accept_factual = 0;
  long accept_halluc = 0;

  long total() const { return flag_halluc + flag_factual + accept_factual + accept_halluc; }
  long flagged() const { return flag_halluc + flag_factual; }
  long hallucinated() const { return flag_halluc + accept_halluc; }
  // Absent when nothing is flagged.
  std::optional<double> precision() const;
  // Absent when there are no hallucinated sentences.
  std::optional<double> recall() const;

  ConfusionCounts& operator+=(const ConfusionCounts& other);
  bool operator==(const ConfusionCounts&) const = default;
  nlohmann::json to_json() const;
};

// Number of candidate sentences with entailed = 0. Labels must cover every
// candidate sentence exactly once; the study needs a ground-truth report.
int true_hallucinations(const Study& study, std::span<const CalibrationLabel> labels);

// Decisions and labels are matched by sentence ref, so their order does not
// matter. Both must cover the same set of refs.
ConfusionCounts confusion(std::span<const SentenceDecision> decisions,
                          std::span<const CalibrationLabel> labels);

// categories[i] is the category of decisions[i]. Every category is present in
// the result, possibly with zero counts.
std::map<Category, ConfusionCounts> category_breakdown(std::span<const SentenceDecision> decisions,
                                                       std::span<const CalibrationLabel> labels,
                                                       std::span<const Category> categories);

struct Agreement {
  double accuracy = 0.0;
  // [judge][reference], index 1 = entailed.
  long matrix[2][2] = {{0, 0}, {0, 0}};

  long total() const { return matrix[0][0] + matrix[0][1] + matrix[1][0] + matrix[1][1]; }
};

Agreement agreement(std::span<const int> judge_labels, std::span<const int> reference_labels);

struct AgreementRow {
  std::string sentence_ref;
  int judge_label = 0;
  int reference_label = 0;
};

// CSV with header sentence_ref,judge_label,reference_label.
std::vector<AgreementRow> load_agreement_csv(const std::filesystem::path& path);

enum class SplitLabel { kOriginal, kAccepted, kFlagged };
std::string_view to_string(SplitLabel label);

struct SummaryRow {
  SplitLabel split = SplitLabel::kOriginal;
  std::optional<int> lambda2;
  int n_reports = 0;
  // Absent for an empty group.
  std::optional<double> avg_true_hallucinations;
  std::map<std::string, double> external_metric_means;

  nlohmann::json to_json() const;
};

// Per-report inputs to the summary table.
struct StudyOutcome {
  std::string study_id;
  int true_hallucinations = 0;
  int flag_count = 0;
  std::map<std::string, double> external_metrics;
};

// One original row, then an accepted and a flagged row per lambda2. External
// metric means only average reports that carry the metric.
std::vector<SummaryRow> summary_table(std::span<const StudyOutcome> outcomes,
                                      std::span<const int> lambda2_values,
                                      ReportRule rule = ReportRule::kAtLeast);

// Builds outcomes from studies, sentence decisions and ground-truth labels.
// Throws DataError when a decision or label references an unknown study or a
// study's decisions and labels disagree.
std::vector<SummaryRow> summary_table(std::span<const Study> studies,
                                      std::span<const SentenceDecision> decisions,
                                      std::span<const CalibrationLabel> labels,
                                      std::span<const int> lambda2_values,
                                      ReportRule rule = ReportRule::kAtLeast);

// Aligned-column rendering of summary rows.
std::string format_summary_table(std::span<const SummaryRow> rows);

// Report-level split by ranking: the k highest-scoring reports are flagged.
struct RankedReport {
  std::string study_id;
  double score = 0.0;
  int true_hallucinations = 0;
};

struct GroupStats {
  int n = 0;
  std::optional<double> mean;
  std::optional<double> median;
};

struct RankSplit {
  int k = 0;
  GroupStats accepted;
  GroupStats flagged;
  std::vector<std::string> flagged_ids;
};

// Ties in score are broken by study_id so the split is deterministic.
RankSplit rank_split(std::span<const RankedReport> reports, int k);

// round(fraction * count), clamped to [0, count].
int top_k_for_fraction(double fraction, std::size_t count);

GroupStats group_stats(std::vector<int> values);

}  // namespace cxrflag
