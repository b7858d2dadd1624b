#include "cxrflag/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "cxrflag/errors.hpp"
#include "cxrflag/tokenizer.hpp"

namespace cxrflag {

using nlohmann::json;

namespace {

std::string ref_string(const SentenceRef& ref) {
  return ref.study_id + "#" + std::to_string(ref.index);
}

std::map<SentenceRef, int> index_labels(std::span<const CalibrationLabel> labels) {
  std::map<SentenceRef, int> out;
  for (const auto& l : labels) {
    if (l.entailed != 0 && l.entailed != 1) {
      throw DataError("label for " + ref_string(l.sentence_ref) + " is not 0 or 1");
    }
    if (!out.emplace(l.sentence_ref, l.entailed).second) {
      throw DataError("duplicate label for " + ref_string(l.sentence_ref));
    }
  }
  return out;
}

void tally(ConfusionCounts& c, bool flagged, int entailed) {
  if (flagged) {
    (entailed ? c.flag_factual : c.flag_halluc) += 1;
  } else {
    (entailed ? c.accept_factual : c.accept_halluc) += 1;
  }
}

// Looks up the label of every decision; throws unless the ref sets match.
std::vector<int> align(std::span<const SentenceDecision> decisions,
                       std::span<const CalibrationLabel> labels) {
  const auto by_ref = index_labels(labels);
  if (by_ref.size() != decisions.size()) {
    throw DataError(fmt::format("{} decisions but {} labels", decisions.size(), by_ref.size()));
  }
  std::set<SentenceRef> seen;
  std::vector<int> out;
  out.reserve(decisions.size());
  for (const auto& d : decisions) {
    const auto it = by_ref.find(d.sentence_ref);
    if (it == by_ref.end()) throw DataError("no label for " + ref_string(d.sentence_ref));
    if (!seen.insert(d.sentence_ref).second) {
      throw DataError("duplicate decision for " + ref_string(d.sentence_ref));
    }
    out.push_back(it->second);
  }
  return out;
}

std::optional<double> mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return std::nullopt;
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

SummaryRow make_row(SplitLabel split, std::optional<int> lambda2,
                    const std::vector<const StudyOutcome*>& group) {
  SummaryRow row;
  row.split = split;
  row.lambda2 = lambda2;
  row.n_reports = static_cast<int>(group.size());
  std::vector<double> halluc;
  std::map<std::string, std::vector<double>> metrics;
  for (const auto* o : group) {
    halluc.push_back(o->true_hallucinations);
    for (const auto& [name, value] : o->external_metrics) metrics[name].push_back(value);
  }
  row.avg_true_hallucinations = mean_of(halluc);
  for (const auto& [name, values] : metrics) row.external_metric_means[name] = *mean_of(values);
  return row;
}

}  // namespace

std::optional<double> ConfusionCounts::precision() const {
  if (flagged() == 0) return std::nullopt;
  return static_cast<double>(flag_halluc) / static_cast<double>(flagged());
}

std::optional<double> ConfusionCounts::recall() const {
  if (hallucinated() == 0) return std::nullopt;
  return static_cast<double>(flag_halluc) / static_cast<double>(hallucinated());
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& other) {
  flag_halluc += other.flag_halluc;
  flag_factual += other.flag_factual;
  accept_factual += other.accept_factual;
  accept_halluc += other.accept_halluc;
  return *this;
}

json ConfusionCounts::to_json() const {
  const auto opt = [](std::optional<double> v) { return v ? json(*v) : json(nullptr); };
  return {{"flag_halluc", flag_halluc},   {"flag_factual", flag_factual},
          {"accept_factual", accept_factual}, {"accept_halluc", accept_halluc},
          {"precision", opt(precision())},  {"recall", opt(recall())}};
}

int true_hallucinations(const Study& study, std::span<const CalibrationLabel> labels) {
  if (!study.ground_truth) {
    throw DataError("study '" + study.study_id + "' has no ground-truth report");
  }
  const auto sentence_count = split_sentences(study.candidate.text).size();
  std::vector<bool> covered(sentence_count, false);
  int count = 0;
  for (const auto& l : labels) {
    const auto i = l.sentence_ref.index;
    if (l.sentence_ref.study_id != study.study_id || i < 0 ||
        static_cast<std::size_t>(i) >= sentence_count || covered[static_cast<std::size_t>(i)]) {
      throw DataError("label " + ref_string(l.sentence_ref) + " does not match a sentence of '" +
                      study.study_id + "'");
    }
    covered[static_cast<std::size_t>(i)] = true;
    if (l.entailed == 0) ++count;
  }
  if (labels.size() != sentence_count) {
    throw DataError(fmt::format("labels cover {} of {} sentences of '{}'", labels.size(),
                                sentence_count, study.study_id));
  }
  return count;
}

ConfusionCounts confusion(std::span<const SentenceDecision> decisions,
                          std::span<const CalibrationLabel> labels) {
  const auto entailed = align(decisions, labels);
  ConfusionCounts c;
  for (std::size_t i = 0; i < decisions.size(); ++i) tally(c, decisions[i].flagged, entailed[i]);
  return c;
}

std::map<Category, ConfusionCounts> category_breakdown(std::span<const SentenceDecision> decisions,
                                                       std::span<const CalibrationLabel> labels,
                                                       std::span<const Category> categories) {
  if (categories.size() != decisions.size()) {
    throw DataError(fmt::format("{} decisions but {} categories", decisions.size(),
                                categories.size()));
  }
  const auto entailed = align(decisions, labels);
  std::map<Category, ConfusionCounts> out;
  for (auto c : kAllCategories) out[c] = {};
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    tally(out[categories[i]], decisions[i].flagged, entailed[i]);
  }
  return out;
}

Agreement agreement(std::span<const int> judge_labels, std::span<const int> reference_labels) {
  if (judge_labels.size() != reference_labels.size()) {
    throw DataError(fmt::format("{} judge labels but {} reference labels", judge_labels.size(),
                                reference_labels.size()));
  }
  if (judge_labels.empty()) throw DataError("agreement of empty label lists");
  Agreement a;
  long matches = 0;
  for (std::size_t i = 0; i < judge_labels.size(); ++i) {
    const int j = judge_labels[i];
    const int r = reference_labels[i];
    if ((j != 0 && j != 1) || (r != 0 && r != 1)) throw DataError("labels must be 0 or 1");
    ++a.matrix[j][r];
    if (j == r) ++matches;
  }
  a.accuracy = static_cast<double>(matches) / static_cast<double>(judge_labels.size());
  return a;
}

std::vector<AgreementRow> load_agreement_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "sentence_ref,judge_label,reference_label") {
    throw DataError(path.string() + ":1: expected header sentence_ref,judge_label,reference_label");
  }
  std::vector<AgreementRow> rows;
  for (int lineno = 2; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 3 || (cells[1] != "0" && cells[1] != "1") ||
        (cells[2] != "0" && cells[2] != "1")) {
      throw DataError(fmt::format("{}:{}: expected <ref>,<0|1>,<0|1>", path.string(), lineno));
    }
    rows.push_back({cells[0], cells[1] == "1", cells[2] == "1"});
  }
  return rows;
}

std::string_view to_string(SplitLabel label) {
  switch (label) {
    case SplitLabel::kOriginal: return "original";
    case SplitLabel::kAccepted: return "accepted";
    case SplitLabel::kFlagged: return "flagged";
  }
  return "?";
}

json SummaryRow::to_json() const {
  json j = {{"split", std::string(to_string(split))}, {"n_reports", n_reports}};
  j["lambda2"] = lambda2 ? json(*lambda2) : json(nullptr);
  j["avg_true_hallucinations"] =
      avg_true_hallucinations ? json(*avg_true_hallucinations) : json(nullptr);
  j["external_metric_means"] = external_metric_means;
  return j;
}

std::vector<SummaryRow> summary_table(std::span<const StudyOutcome> outcomes,
                                      std::span<const int> lambda2_values, ReportRule rule) {
  std::vector<const StudyOutcome*> all;
  for (const auto& o : outcomes) all.push_back(&o);
  std::vector<SummaryRow> rows{make_row(SplitLabel::kOriginal, std::nullopt, all)};
  for (int lambda2 : lambda2_values) {
    std::vector<const StudyOutcome*> accepted, flagged;
    for (const auto* o : all) {
      const bool f = rule == ReportRule::kAtLeast ? o->flag_count >= lambda2
                                                  : o->flag_count > lambda2;
      (f ? flagged : accepted).push_back(o);
    }
    rows.push_back(make_row(SplitLabel::kAccepted, lambda2, accepted));
    rows.push_back(make_row(SplitLabel::kFlagged, lambda2, flagged));
  }
  return rows;
}

std::vector<SummaryRow> summary_table(std::span<const Study> studies,
                                      std::span<const SentenceDecision> decisions,
                                      std::span<const CalibrationLabel> labels,
                                      std::span<const int> lambda2_values, ReportRule rule) {
  std::map<std::string, std::size_t> position;
  std::vector<StudyOutcome> outcomes;
  for (const auto& s : studies) {
    if (!position.emplace(s.study_id, outcomes.size()).second) {
      throw DataError("duplicate study '" + s.study_id + "'");
    }
    outcomes.push_back({s.study_id, 0, 0, s.external_metrics});
  }
  const auto entailed = align(decisions, labels);
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    const auto it = position.find(decisions[i].sentence_ref.study_id);
    if (it == position.end()) {
      throw DataError("decision for unknown study '" + decisions[i].sentence_ref.study_id + "'");
    }
    auto& o = outcomes[it->second];
    if (decisions[i].flagged) ++o.flag_count;
    if (entailed[i] == 0) ++o.true_hallucinations;
  }
  return summary_table(std::span<const StudyOutcome>(outcomes), lambda2_values, rule);
}

std::string format_summary_table(std::span<const SummaryRow> rows) {
  std::set<std::string> metric_names;
  for (const auto& r : rows) {
    for (const auto& [name, v] : r.external_metric_means) metric_names.insert(name);
  }
  std::vector<std::string> header{"Quality", "lambda2", "n", "AvgTrueHalluc"};
  header.insert(header.end(), metric_names.begin(), metric_names.end());

  std::vector<std::vector<std::string>> cells{header};
  for (const auto& r : rows) {
    std::vector<std::string> line{std::string(to_string(r.split)),
                                  r.lambda2 ? std::to_string(*r.lambda2) : "--",
                                  std::to_string(r.n_reports),
                                  r.avg_true_hallucinations
                                      ? fmt::format("{:.2f}", *r.avg_true_hallucinations)
                                      : "--"};
    for (const auto& name : metric_names) {
      const auto it = r.external_metric_means.find(name);
      line.push_back(it == r.external_metric_means.end() ? "--"
                                                         : fmt::format("{:.3f}", it->second));
    }
    cells.push_back(std::move(line));
  }

  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  }
  std::string out;
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c == 0) {
        out += fmt::format("{:<{}}", line[c], width[c]);
      } else {
        out += fmt::format("  {:>{}}", line[c], width[c]);
      }
    }
    out += '\n';
  }
  return out;
}

GroupStats group_stats(std::vector<int> values) {
  GroupStats g;
  g.n = static_cast<int>(values.size());
  if (values.empty()) return g;
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (int v : values) sum += v;
  g.mean = sum / static_cast<double>(values.size());
  const auto mid = values.size() / 2;
  g.median = values.size() % 2 ? values[mid] : (values[mid - 1] + values[mid]) / 2.0;
  return g;
}

RankSplit rank_split(std::span<const RankedReport> reports, int k) {
  if (k < 0 || static_cast<std::size_t>(k) > reports.size()) {
    throw ConfigError(fmt::format("cannot flag top {} of {} reports", k, reports.size()));
  }
  std::vector<const RankedReport*> order;
  for (const auto& r : reports) order.push_back(&r);
  std::sort(order.begin(), order.end(), [](const RankedReport* a, const RankedReport* b) {
    if (a->score != b->score) return a->score > b->score;
    return a->study_id < b->study_id;
  });
  RankSplit split;
  split.k = k;
  std::vector<int> flagged, accepted;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i < static_cast<std::size_t>(k)) {
      flagged.push_back(order[i]->true_hallucinations);
      split.flagged_ids.push_back(order[i]->study_id);
    } else {
      accepted.push_back(order[i]->true_hallucinations);
    }
  }
  split.flagged = group_stats(std::move(flagged));
  split.accepted = group_stats(std::move(accepted));
  return split;
}

int top_k_for_fraction(double fraction, std::size_t count) {
  const auto k = std::llround(fraction * static_cast<double>(count));
  return static_cast<int>(std::clamp<long long>(k, 0, static_cast<long long>(count)));
}

}  // namespace cxrflag
