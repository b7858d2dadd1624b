// Rule-based entailment used as a deterministic stand-in for an LLM judge.
//
// A sentence is reduced to its core finding terms plus modifiers (severity,
// laterality, location, measurements). Positive findings need a positive
// report sentence containing every core term: CE when the modifiers agree,
// PE when they differ. Negative findings hold unless a positive report
// sentence asserts the same finding (NE, or PE if that sentence only refers
// to a prior exam).

#include <algorithm>
#include <cctype>
#include <set>
#include <string>
#include <unordered_set>

#include "cxrflag/entailment.hpp"
#include "cxrflag/tokenizer.hpp"

namespace cxrflag {

namespace {

using WordSet = std::set<std::string>;

const std::unordered_set<std::string> kStopwords = {
    "the", "a", "an", "is", "are", "was", "were", "be", "been", "being", "there", "of",
    "in", "on", "at", "to", "with", "and", "or", "as", "by", "for", "from", "this",
    "that", "these", "those", "it", "its", "has", "have", "had", "seen", "noted",
    "identified", "present", "also", "which", "within", "into", "evidence", "appears",
    "appear", "appearing", "demonstrated", "visualized", "suggest", "suggests",
    "suggesting", "likely", "possibly", "possible", "may", "might", "could", "can",
    "represent", "represents", "representing", "compatible", "consistent", "now", "size",
    "place", "position", "seen", "again", "but", "than", "their", "his", "her", "patient",
    "acute", "focal", "definite", "overt", "significant", "abnormality", "abnormalities",
    "process", "finding", "findings", "any", "other", "additional", "otherwise", "evident",
    "apparent", "obvious", "change", "changes", "is", "s"};

const std::unordered_set<std::string> kNegation = {"no", "not", "without", "negative", "free",
                                                   "absent", "resolved", "none", "neither",
                                                   "nor"};
const std::unordered_set<std::string> kNormal = {"clear", "normal", "unremarkable", "intact"};
const std::unordered_set<std::string> kPrior = {"unchanged", "stable", "prior", "previous",
                                                "previously", "persistent", "similar",
                                                "compared", "comparison", "interval"};
const std::unordered_set<std::string> kSeverity = {
    "mild", "minimal", "moderate", "severe", "small", "large", "tiny", "trace", "slight",
    "marked", "extensive", "subtle", "few", "multiple", "several"};
const std::unordered_set<std::string> kLaterality = {"left", "right", "bilateral", "both",
                                                     "unilateral", "bibasilar"};
const std::unordered_set<std::string> kLocation = {
    "upper", "lower", "middle", "mid", "lobe", "base", "basilar", "basal", "apex",
    "apice", "apical", "lung", "zone", "field", "hemithorax", "side", "sided",
    "retrocardiac", "lingula", "lingular", "anterior", "posterior", "lateral", "medial",
    "inferior", "superior"};
const std::unordered_set<std::string> kGenericLocation = {"lung", "side", "sided", "lobe",
                                                          "zone", "field", "hemithorax"};
const std::unordered_set<std::string> kUnits = {"cm", "mm", "inch", "inche", "inches"};
const std::unordered_set<std::string> kLungAbnormality = {
    "atelectasis", "consolidation", "opacity", "opacification", "pneumonia", "edema",
    "nodule", "mass", "infiltrate", "fibrosis", "scarring"};

bool has_digit(const std::string& w) {
  return std::any_of(w.begin(), w.end(), [](unsigned char c) { return std::isdigit(c); });
}

std::string stem(std::string w) {
  if (has_digit(w)) return w;
  for (const char* suffix : {"ly"}) {
    const std::string s(suffix);
    if (w.size() > 5 && w.ends_with(s)) {
      std::string base = w.substr(0, w.size() - 2);
      if (kSeverity.count(base)) return base;
      if (base == "bilateral") return base;
    }
  }
  if (w.size() > 4 && w.ends_with("ies")) return w.substr(0, w.size() - 3) + "y";
  if (w.size() > 3 && w.back() == 's' && !w.ends_with("ss") && !w.ends_with("us") &&
      !w.ends_with("is")) {
    return w.substr(0, w.size() - 1);
  }
  return w;
}

std::vector<std::string> words_of(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(stem(std::move(cur)));
    cur.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (c == '.' && !cur.empty() && std::isdigit(static_cast<unsigned char>(cur.back())) &&
               i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
      cur.push_back('.');
    } else {
      flush();
    }
  }
  flush();
  return out;
}

struct Analysis {
  bool negative = false;
  bool prior = false;
  WordSet words;
  WordSet core;
  WordSet severity;
  WordSet laterality;
  WordSet location;
  WordSet numbers;
};

Analysis analyze(std::string_view sentence) {
  Analysis a;
  for (auto& w : words_of(sentence)) {
    a.words.insert(w);
    if (kNegation.count(w) || kNormal.count(w)) {
      a.negative = true;
    } else if (kPrior.count(w)) {
      a.prior = true;
    } else if (kSeverity.count(w)) {
      a.severity.insert(w);
    } else if (kLaterality.count(w)) {
      if (w == "both" || w == "bibasilar") {
        a.laterality.insert("bilateral");
        if (w == "bibasilar") a.location.insert("basilar");
      } else {
        a.laterality.insert(w);
      }
    } else if (kLocation.count(w)) {
      a.location.insert(w);
    } else if (has_digit(w)) {
      a.numbers.insert(w);
    } else if (kUnits.count(w) || kStopwords.count(w)) {
    } else {
      a.core.insert(w);
    }
  }
  return a;
}

bool disjoint(const WordSet& x, const WordSet& y) {
  return std::none_of(x.begin(), x.end(), [&](const std::string& w) { return y.count(w) > 0; });
}

bool laterality_agrees(const WordSet& finding, const WordSet& report) {
  if (finding.empty() || report.empty()) return true;
  if (report.count("bilateral")) return true;
  return !disjoint(finding, report);
}

bool modifiers_agree(const Analysis& finding, const Analysis& report) {
  if (!finding.severity.empty() && !report.severity.empty() &&
      disjoint(finding.severity, report.severity)) {
    return false;
  }
  if (!laterality_agrees(finding.laterality, report.laterality)) return false;
  if (!finding.numbers.empty() && !report.numbers.empty() &&
      disjoint(finding.numbers, report.numbers)) {
    return false;
  }
  WordSet f_loc, r_loc;
  for (const auto& w : finding.location) {
    if (!kGenericLocation.count(w)) f_loc.insert(w);
  }
  for (const auto& w : report.location) {
    if (!kGenericLocation.count(w)) r_loc.insert(w);
  }
  return f_loc.empty() || r_loc.empty() || !disjoint(f_loc, r_loc);
}

bool contains_all(const WordSet& haystack, const WordSet& needles) {
  return std::all_of(needles.begin(), needles.end(),
                     [&](const std::string& w) { return haystack.count(w) > 0; });
}

Verdict judge_one(const Analysis& finding, const std::vector<Analysis>& report) {
  if (!finding.negative) {
    if (finding.core.empty()) return Verdict::kCompletelyEntailed;
    std::optional<Verdict> best;
    for (const auto& t : report) {
      if (t.negative || !contains_all(t.words, finding.core)) continue;
      const bool exact = modifiers_agree(finding, t) && !(finding.prior && !t.prior);
      if (exact) return Verdict::kCompletelyEntailed;
      best = Verdict::kPartiallyEntailed;
    }
    return best.value_or(Verdict::kNotEntailed);
  }

  bool contradicted = false;
  bool only_priors = true;
  for (const auto& t : report) {
    if (t.negative) continue;
    bool hit;
    if (!finding.core.empty()) {
      hit = contains_all(t.words, finding.core);
    } else {
      // "The lungs are clear": any positive statement about the same organ.
      hit = !disjoint(t.words, finding.location);
      if (!hit && finding.location.count("lung")) {
        hit = std::any_of(t.words.begin(), t.words.end(),
                          [](const std::string& w) { return kLungAbnormality.count(w) > 0; });
      }
    }
    if (hit) {
      contradicted = true;
      only_priors = only_priors && t.prior;
    }
  }
  if (!contradicted) return Verdict::kCompletelyEntailed;
  return only_priors ? Verdict::kPartiallyEntailed : Verdict::kNotEntailed;
}

std::vector<Analysis> analyze_report(std::string_view text) {
  std::vector<Analysis> out;
  for (const auto& s : split_sentences(text)) out.push_back(analyze(s));
  return out;
}

class ReferenceBackend : public JudgeBackend {
 public:
  std::string judge_corpus(const CorpusJudgeRequest& request) override {
    const Analysis finding = analyze(request.sentence);
    std::vector<Verdict> verdicts;
    verdicts.reserve(request.reports.size());
    for (const auto& r : request.reports) verdicts.push_back(judge_one(finding, analyze_report(r)));
    return format_corpus_response(verdicts);
  }

  std::string judge_ground_truth(const GroundTruthJudgeRequest& request) override {
    return format_ground_truth_response(
        judge_one(analyze(request.sentence), analyze_report(request.report)));
  }

  std::string name() const override { return "reference"; }
};

}  // namespace

std::shared_ptr<JudgeBackend> reference_backend() { return std::make_shared<ReferenceBackend>(); }

}  // namespace cxrflag
