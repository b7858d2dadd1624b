// Builds the replay fixtures under data/fixtures.
//
// Each corpus is planned from count tables (sentence kinds per category,
// score histograms, flagged-sentence counts per report) and then rendered
// into report texts. Every candidate sentence is checked against the
// reference judge before anything is written, so the shipped scores and
// labels are exactly what `cxrflag entail` recomputes.
//
// usage: make_fixtures <output-dir>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "cxrflag/categories.hpp"
#include "cxrflag/corpus.hpp"
#include "cxrflag/entailment.hpp"
#include "cxrflag/errors.hpp"
#include "cxrflag/pipeline.hpp"
#include "json.hpp"

namespace {

namespace fs = std::filesystem;
using cxrflag::Category;
using nlohmann::json;

constexpr int kN = 10;
constexpr int kStudies = 508;
constexpr int kCalibrationStudies = 300;
constexpr int kCalibrationSentences = 2061;
constexpr const char* kFiller = "No acute cardiopulmonary process.";

// A finding with a plain statement, a variant that differs only in a
// modifier (partial entailment) and a negated form.
struct Topic {
  Category category;
  const char* positive;
  const char* variant;
  const char* negative;
};

const std::vector<Topic>& topics() {
  static const std::vector<Topic> t = {
      {Category::kDevices, "Right chest tube is in place.", "Left chest tube is in place.",
       "No chest tube is seen."},
      {Category::kDevices, "Right internal jugular catheter terminates in the mid SVC.",
       "Left internal jugular catheter terminates in the mid SVC.",
       "No internal jugular catheter."},
      {Category::kDevices, "Left PICC line tip is in the lower SVC.",
       "Left PICC line tip is in the upper SVC.", "No PICC line."},
      {Category::kDevices, "Endotracheal tube terminates 4.5 cm above the carina.",
       "Endotracheal tube terminates 2.5 cm above the carina.", "No endotracheal tube."},
      {Category::kDevices, "Nasogastric tube tip is in the lower stomach.",
       "Nasogastric tube tip is in the upper stomach.", "No nasogastric tube."},
      {Category::kDevices, "Left chest wall pacemaker is present.",
       "Right chest wall pacemaker is present.", "No pacemaker."},
      {Category::kDevices, "Surgical clip in the left axilla.", "Surgical clip in the right axilla.",
       "No surgical clip."},
      {Category::kDevices, "Right pigtail catheter overlies the lower hemithorax.",
       "Left pigtail catheter overlies the lower hemithorax.", "No pigtail catheter."},
      {Category::kDevices, "Tracheostomy tube tip is 5 cm above the carina.",
       "Tracheostomy tube tip is 3 cm above the carina.", "No tracheostomy tube."},
      {Category::kDevices, "Right subclavian line tip projects over the cavoatrial junction.",
       "Left subclavian line tip projects over the cavoatrial junction.", "No subclavian line."},

      {Category::kCardiomediastinal, "Mild cardiomegaly.", "Severe cardiomegaly.",
       "No cardiomegaly."},
      {Category::kCardiomediastinal, "The aorta is mildly tortuous.",
       "The aorta is markedly tortuous.", "The aorta is not tortuous."},
      {Category::kCardiomediastinal, "Right hilar enlargement.", "Left hilar enlargement.",
       "No hilar enlargement."},
      {Category::kCardiomediastinal, "Small hiatal hernia.", "Large hiatal hernia.",
       "No hiatal hernia."},
      {Category::kCardiomediastinal, "Mild pulmonary vascular congestion.",
       "Moderate pulmonary vascular congestion.", "No pulmonary vascular congestion."},
      {Category::kCardiomediastinal, "The upper mediastinum is widened.",
       "The lower mediastinum is widened.", "The mediastinum is not widened."},
      {Category::kCardiomediastinal, "Small pericardial effusion.", "Moderate pericardial effusion.",
       "No pericardial effusion."},
      {Category::kCardiomediastinal, "Mild calcification of the aortic knob.",
       "Extensive calcification of the aortic knob.", "No calcification of the aortic knob."},
      {Category::kCardiomediastinal, "Enlarged right paratracheal lymph node.",
       "Enlarged left paratracheal lymph node.", "No enlarged lymph node."},
      {Category::kCardiomediastinal, "The cardiac silhouette is moderately enlarged.",
       "The cardiac silhouette is mildly enlarged.", "The cardiac silhouette is not enlarged."},

      {Category::kLungs, "Mild left basilar atelectasis.", "Mild right basilar atelectasis.",
       "No atelectasis."},
      {Category::kLungs, "Right upper lobe opacity.", "Right lower lobe opacity.",
       "No focal opacity."},
      {Category::kLungs, "Left lower lobe consolidation.", "Right lower lobe consolidation.",
       "No focal consolidation."},
      {Category::kLungs, "Mild pulmonary edema.", "Severe pulmonary edema.",
       "No pulmonary edema."},
      {Category::kLungs, "Small nodule in the right upper lobe.",
       "Large nodule in the right upper lobe.", "No nodule."},
      {Category::kLungs, "The lungs are mildly hyperinflated.",
       "The lungs are markedly hyperinflated.", "The lungs are not hyperinflated."},
      {Category::kLungs, "Mild emphysema.", "Severe emphysema.", "No emphysema."},
      {Category::kLungs, "Apical scarring in the left lung.", "Apical scarring in the right lung.",
       "No scarring."},
      {Category::kLungs, "Mild interstitial thickening.", "Moderate interstitial thickening.",
       "No interstitial thickening."},
      {Category::kLungs, "Right lower lobe pneumonia.", "Left lower lobe pneumonia.",
       "No pneumonia."},
      {Category::kLungs, "Large mass in the left upper lobe.", "Small mass in the left upper lobe.",
       "No mass."},

      {Category::kMusculoskeletal, "Old fracture of the left sixth rib.",
       "Old fracture of the right sixth rib.", "No rib fracture."},
      {Category::kMusculoskeletal, "Mild thoracic scoliosis.", "Severe thoracic scoliosis.",
       "No scoliosis."},
      {Category::kMusculoskeletal, "Moderate kyphosis.", "Mild kyphosis.", "No kyphosis."},
      {Category::kMusculoskeletal, "Mild diffuse osteopenia.", "Marked diffuse osteopenia.",
       "No osteopenia."},
      {Category::kMusculoskeletal, "Fracture of the right clavicle.",
       "Fracture of the left clavicle.", "No clavicle fracture."},
      {Category::kMusculoskeletal, "Mild degenerative changes of the thoracic spine.",
       "Severe degenerative changes of the thoracic spine.",
       "No degenerative changes of the spine."},
      {Category::kMusculoskeletal, "Right shoulder dislocation.", "Left shoulder dislocation.",
       "No shoulder dislocation."},
      {Category::kMusculoskeletal, "Mild compression deformity of a thoracic vertebral body.",
       "Severe compression deformity of a thoracic vertebral body.",
       "No compression deformity."},

      {Category::kPleural, "Small left pleural effusion.", "Large left pleural effusion.",
       "No pleural effusion."},
      {Category::kPleural, "Small right apical pneumothorax.", "Large right apical pneumothorax.",
       "No pneumothorax."},
      {Category::kPleural, "Right pleural thickening.", "Left pleural thickening.",
       "No pleural thickening."},
      {Category::kPleural, "Calcified pleural plaque on the left.",
       "Calcified pleural plaque on the right.", "No pleural plaque."},
      {Category::kPleural, "Blunting of the left costophrenic angle.",
       "Blunting of the right costophrenic angle.", "No blunting of the costophrenic angles."},
      {Category::kPleural, "Left apical pleural cap.", "Right apical pleural cap.",
       "No pleural cap."},
      {Category::kPleural, "Small loculated effusion in the right hemithorax.",
       "Large loculated effusion in the right hemithorax.", "No loculated effusion."},

      {Category::kOther, "Mildly enlarged thyroid gland.", "Markedly enlarged thyroid gland.",
       "The thyroid gland is not enlarged."},
      {Category::kOther, "Right nipple shadow.", "Left nipple shadow.", "No nipple shadow."},
      {Category::kOther, "Small calcified granuloma in the left upper lobe.",
       "Large calcified granuloma in the left upper lobe.", "No calcified granuloma."},
      {Category::kOther, "Mild gaseous distension of the colon.",
       "Marked gaseous distension of the colon.", "No gaseous distension of the colon."},
      {Category::kOther, "Right axillary skin fold.", "Left axillary skin fold.",
       "No axillary skin fold."},
      {Category::kOther, "Multiple gallstones in the right upper quadrant.",
       "Few gallstones in the right upper quadrant.", "No gallstones."},
      {Category::kOther, "Mild splenomegaly.", "Marked splenomegaly.", "No splenomegaly."},
      {Category::kOther, "Dense breast tissue on the left.", "Dense breast tissue on the right.",
       "No dense breast tissue."},
  };
  return t;
}

std::vector<int> topics_in(Category c) {
  std::vector<int> out;
  for (std::size_t i = 0; i < topics().size(); ++i) {
    if (topics()[i].category == c) out.push_back(static_cast<int>(i));
  }
  return out;
}

// Seeded generator with its own bounded integers so fixtures do not depend on
// the standard library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

enum Kind { kFlagHalluc, kFlagFactual, kAcceptFactual, kAcceptHalluc };
constexpr std::array<Kind, 4> kKinds = {kFlagHalluc, kFlagFactual, kAcceptFactual, kAcceptHalluc};

bool is_factual(Kind k) { return k == kFlagFactual || k == kAcceptFactual; }

using Histogram = std::map<int, int>;  // score -> count

std::vector<int> expand(const Histogram& h) {
  std::vector<int> out;
  for (const auto& [score, count] : h) out.insert(out.end(), count, score);
  return out;
}

struct SentencePlan {
  int topic = 0;
  bool negative = false;
  int score = 0;
  int label = 0;
  bool ground_truth_variant = false;
  int offset = 0;  // rotation of the supporting samples
};

struct StudyPlan {
  std::string study_id;
  std::vector<SentencePlan> sentences;
  std::optional<int> failed_sample;
  std::map<std::string, double> metrics;
};

// Flagged-sentence counts for a block of reports and their total number of
// hallucinated sentences.
struct ReportGroup {
  std::vector<int> flag_counts;
  int hallucinations = 0;
};

// One Table-1 block: flagged-set means for lambda2 = 4, 3, 2 and the
// original mean, per external metric.
struct MetricRow {
  const char* name;
  double flagged4, flagged3, flagged2, original;
};

struct CorpusSpec {
  std::string name;
  std::string prefix;
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  // Sentence counts per kind and category.
  std::array<std::map<Category, int>, 4> kinds;
  std::array<Histogram, 4> scores;
  std::vector<ReportGroup> groups;  // ordered from most to least flagged
  Histogram calibration_factual;
  Histogram calibration_halluc;
  std::vector<MetricRow> metrics;
};

std::vector<int> repeat(int value, int count) { return std::vector<int>(count, value); }

std::vector<int> concat(std::initializer_list<std::vector<int>> parts) {
  std::vector<int> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

// Splits total over weights, largest remainder first, ties to the earlier index.
std::vector<int> apportion(int total, const std::vector<double>& weights) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<int> out(weights.size());
  std::vector<std::pair<double, std::size_t>> rest;
  int used = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = total * weights[i] / sum;
    out[i] = static_cast<int>(std::floor(exact));
    used += out[i];
    rest.push_back({exact - out[i], i});
  }
  std::stable_sort(rest.begin(), rest.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int k = 0; k < total - used; ++k) ++out[rest[static_cast<std::size_t>(k)].second];
  return out;
}

struct ReportShape {
  int flag_count = 0;
  int hallucinations = 0;
  std::array<int, 4> kinds{};
};

std::vector<ReportShape> plan_test_shapes(const CorpusSpec& spec, Rng& rng) {
  std::vector<ReportShape> shapes;
  for (const auto& group : spec.groups) {
    std::vector<double> w;
    for (int h : group.flag_counts) w.push_back(1.0 + h);
    const auto halluc = apportion(group.hallucinations, w);
    const auto first = shapes.size();
    for (std::size_t i = 0; i < group.flag_counts.size(); ++i) {
      shapes.push_back({group.flag_counts[i], halluc[i], {}});
    }
    // Move one hallucination between neighbours so reports in a block differ.
    for (std::size_t i = first; i + 1 < shapes.size(); i += 2) {
      if (shapes[i].hallucinations - 1 >= std::max(1, shapes[i].flag_count)) {
        --shapes[i].hallucinations;
        ++shapes[i + 1].hallucinations;
      }
    }
  }

  const auto total_of = [&](Kind k) {
    int t = 0;
    for (const auto& [c, n] : spec.kinds[k]) t += n;
    return t;
  };

  // Flagged hallucinations, proportional to each report's flag count.
  std::vector<double> w;
  for (const auto& s : shapes) w.push_back(std::min(s.flag_count, s.hallucinations));
  auto fh = apportion(total_of(kFlagHalluc), w);
  int overflow = 0;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const int cap = std::min(shapes[i].flag_count, shapes[i].hallucinations);
    if (fh[i] > cap) {
      overflow += fh[i] - cap;
      fh[i] = cap;
    }
  }
  for (std::size_t i = 0; overflow > 0 && i < shapes.size(); ++i) {
    const int cap = std::min(shapes[i].flag_count, shapes[i].hallucinations);
    const int add = std::min(overflow, cap - fh[i]);
    fh[i] += add;
    overflow -= add;
  }
  if (overflow > 0) throw std::runtime_error(spec.name + ": cannot place flagged hallucinations");

  int accepted_factual = total_of(kAcceptFactual);
  const int reports = static_cast<int>(shapes.size());
  for (int i = 0; i < reports; ++i) {
    auto& s = shapes[static_cast<std::size_t>(i)];
    s.kinds[kFlagHalluc] = fh[static_cast<std::size_t>(i)];
    s.kinds[kFlagFactual] = s.flag_count - s.kinds[kFlagHalluc];
    s.kinds[kAcceptHalluc] = s.hallucinations - s.kinds[kFlagHalluc];
  }
  // Accepted factual sentences: an even share with jitter, then exact totals.
  const int base = accepted_factual / reports;
  int placed = 0;
  for (auto& s : shapes) {
    s.kinds[kAcceptFactual] = std::max(0, base + static_cast<int>(rng.below(5)) - 2);
    placed += s.kinds[kAcceptFactual];
  }
  for (std::size_t i = 0; placed != accepted_factual; i = (i + 1) % shapes.size()) {
    auto& s = shapes[i];
    if (placed < accepted_factual) {
      ++s.kinds[kAcceptFactual];
      ++placed;
    } else if (s.kinds[kAcceptFactual] > 1) {
      --s.kinds[kAcceptFactual];
      --placed;
    }
  }
  for (const auto& s : shapes) {
    if (s.kinds[0] + s.kinds[1] + s.kinds[2] + s.kinds[3] == 0) {
      throw std::runtime_error(spec.name + ": empty report planned");
    }
  }
  return shapes;
}

struct Slot {
  std::size_t study = 0;
  std::size_t sentence = 0;
};

// Gives every sentence a category from the per-kind pools such that no topic
// repeats within a study.
void assign_categories(const std::vector<std::vector<Kind>>& kinds_by_study,
                       const std::array<std::map<Category, int>, 4>& pools, Rng& rng,
                       std::vector<std::vector<Category>>& out) {
  std::map<Category, int> capacity;
  for (auto c : cxrflag::kAllCategories) capacity[c] = static_cast<int>(topics_in(c).size());

  out.assign(kinds_by_study.size(), {});
  std::vector<std::map<Category, int>> used(kinds_by_study.size());
  for (std::size_t s = 0; s < kinds_by_study.size(); ++s) {
    out[s].assign(kinds_by_study[s].size(), Category::kOther);
  }
  for (Kind kind : kKinds) {
    std::vector<Category> pool;
    for (const auto& [c, n] : pools[kind]) pool.insert(pool.end(), n, c);
    rng.shuffle(pool);
    std::vector<Slot> slots;
    for (std::size_t s = 0; s < kinds_by_study.size(); ++s) {
      for (std::size_t i = 0; i < kinds_by_study[s].size(); ++i) {
        if (kinds_by_study[s][i] == kind) slots.push_back({s, i});
      }
    }
    if (slots.size() != pool.size()) throw std::runtime_error("category pool size mismatch");
    for (std::size_t k = 0; k < slots.size(); ++k) {
      const auto study = slots[k].study;
      auto fits = [&](Category c) { return used[study][c] < capacity[c]; };
      if (!fits(pool[k])) {
        std::size_t j = k + 1;
        while (j < pool.size() && !fits(pool[j])) ++j;
        if (j == pool.size()) throw std::runtime_error("no room for a category in a study");
        std::swap(pool[k], pool[j]);
      }
      ++used[study][pool[k]];
      out[study][slots[k].sentence] = pool[k];
    }
  }
}

StudyPlan plan_study(const std::string& id, const std::vector<Kind>& kinds,
                     const std::vector<Category>& categories, const std::vector<int>& scores,
                     Rng& rng) {
  StudyPlan plan;
  plan.study_id = id;
  std::map<Category, std::vector<int>> free;
  for (auto c : cxrflag::kAllCategories) {
    auto t = topics_in(c);
    std::rotate(t.begin(), t.begin() + static_cast<long>(rng.below(t.size())), t.end());
    free[c] = t;
  }
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    SentencePlan s;
    auto& avail = free[categories[i]];
    s.topic = avail.front();
    avail.erase(avail.begin());
    const int negative_percent = kinds[i] == kAcceptFactual ? 30 : 10;
    s.negative = static_cast<int>(rng.below(100)) < negative_percent;
    s.score = scores[i];
    s.label = is_factual(kinds[i]) ? 1 : 0;
    s.ground_truth_variant = rng.below(2) == 0;
    s.offset = static_cast<int>(rng.below(kN));
    plan.sentences.push_back(s);
  }
  const int max_score =
      std::accumulate(plan.sentences.begin(), plan.sentences.end(), 0,
                      [](int m, const SentencePlan& s) { return std::max(m, s.score); });
  if (max_score < kN && rng.below(25) == 0) plan.failed_sample = static_cast<int>(rng.below(kN));
  return plan;
}

cxrflag::Study realize(const StudyPlan& plan) {
  cxrflag::Study study;
  study.study_id = plan.study_id;
  study.image_ref = plan.study_id;
  study.external_metrics = plan.metrics;

  std::vector<int> usable;
  for (int j = 0; j < kN; ++j) {
    if (!plan.failed_sample || *plan.failed_sample != j) usable.push_back(j);
  }
  const int m = static_cast<int>(usable.size());
  std::vector<std::vector<std::string>> sample_lines(kN);
  std::vector<std::string> candidate, truth;
  for (const auto& s : plan.sentences) {
    const auto& topic = topics()[static_cast<std::size_t>(s.topic)];
    candidate.push_back(s.negative ? topic.negative : topic.positive);
    // Samples that assert the finding: the supporting ones for a positive
    // sentence, the contradicting ones for a negated sentence.
    const int asserting = s.negative ? m - s.score : s.score;
    for (int t = 0; t < asserting; ++t) {
      const int j = usable[static_cast<std::size_t>((s.offset + t) % m)];
      const bool variant = !s.negative && t % 4 == 3;
      sample_lines[static_cast<std::size_t>(j)].push_back(variant ? topic.variant : topic.positive);
    }
    if (s.negative) {
      if (s.label == 0) truth.push_back(topic.positive);
      else if (s.ground_truth_variant) truth.push_back(topic.negative);
    } else if (s.label == 1) {
      truth.push_back(topic.positive);
    } else if (s.ground_truth_variant) {
      truth.push_back(topic.variant);
    }
  }
  auto join = [](const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& l : lines) out += (out.empty() ? "" : " ") + l;
    return out;
  };
  truth.push_back(kFiller);
  study.candidate = {plan.study_id, join(candidate), 0.1, cxrflag::ReportKind::kCandidate, {}, {}};
  for (int j = 0; j < kN; ++j) {
    auto lines = sample_lines[static_cast<std::size_t>(j)];
    lines.push_back(kFiller);
    const bool failed = plan.failed_sample && *plan.failed_sample == j;
    study.samples.push_back({plan.study_id, failed ? "" : join(lines), 1.0,
                             cxrflag::ReportKind::kSample, {}, {}});
  }
  study.ground_truth =
      cxrflag::Report{plan.study_id, join(truth), 0.0, cxrflag::ReportKind::kGroundTruth, {}, {}};
  return study;
}

void verify(const cxrflag::Study& study, const StudyPlan& plan, cxrflag::Judge& judge) {
  const auto scored = cxrflag::score_study(study, cxrflag::SplitKind::kTest, judge);
  if (scored.sentences.size() != plan.sentences.size()) {
    throw std::runtime_error(study.study_id + ": sentence count differs after tokenizing");
  }
  for (std::size_t i = 0; i < plan.sentences.size(); ++i) {
    const auto& want = plan.sentences[i];
    const auto& got = scored.sentences[i];
    const auto& topic = topics()[static_cast<std::size_t>(want.topic)];
    if (got.category != topic.category || got.score != want.score || got.label != want.label) {
      throw std::runtime_error(fmt::format(
          "{} sentence {} '{}': planned ({}, score {}, label {}) got ({}, score {}, label {})",
          study.study_id, i, got.text, cxrflag::to_string(topic.category), want.score, want.label,
          cxrflag::to_string(got.category), got.score, got.label.value_or(-1)));
    }
  }
}

std::vector<std::vector<Kind>> calibration_kinds(const CorpusSpec& spec, Rng& rng,
                                                 std::vector<std::vector<int>>& scores) {
  std::vector<std::pair<Kind, int>> pool;
  for (int s : expand(spec.calibration_factual)) pool.push_back({kAcceptFactual, s});
  for (int s : expand(spec.calibration_halluc)) pool.push_back({kAcceptHalluc, s});
  if (static_cast<int>(pool.size()) != kCalibrationSentences) {
    throw std::runtime_error(spec.name + ": calibration histogram size mismatch");
  }
  rng.shuffle(pool);
  std::vector<double> w;
  for (int i = 0; i < kCalibrationStudies; ++i) w.push_back(4.0 + static_cast<double>(rng.below(7)));
  const auto lengths = apportion(kCalibrationSentences, w);
  std::vector<std::vector<Kind>> out;
  scores.clear();
  std::size_t next = 0;
  for (int len : lengths) {
    out.emplace_back();
    scores.emplace_back();
    for (int k = 0; k < len; ++k, ++next) {
      out.back().push_back(pool[next].first);
      scores.back().push_back(pool[next].second);
    }
  }
  return out;
}

std::array<std::map<Category, int>, 4> calibration_pools(const std::vector<std::vector<Kind>>& kinds,
                                                         Rng& rng) {
  // Category mix of the test tables, spread over both label values.
  const std::vector<std::pair<Category, int>> weights = {
      {Category::kLungs, 325},          {Category::kPleural, 406},
      {Category::kCardiomediastinal, 364}, {Category::kMusculoskeletal, 61},
      {Category::kDevices, 183},        {Category::kOther, 89}};
  std::array<std::map<Category, int>, 4> pools;
  for (Kind kind : {kAcceptFactual, kAcceptHalluc}) {
    int total = 0;
    for (const auto& k : kinds) total += static_cast<int>(std::count(k.begin(), k.end(), kind));
    std::vector<double> w;
    for (const auto& [c, n] : weights) w.push_back(n + static_cast<double>(rng.below(40)));
    const auto counts = apportion(total, w);
    for (std::size_t i = 0; i < weights.size(); ++i) pools[kind][weights[i].first] = counts[i];
  }
  return pools;
}

void write_lines(const fs::path& path, const std::vector<cxrflag::Study>& studies) {
  cxrflag::write_dataset(path, studies);
}

// Per-report external metrics from the Table-1 block: one mean per stratum of
// flag counts (>=4, 3, 2, <=1), solved so the flagged and original means
// reproduce, with a small zero-sum perturbation inside each stratum.
void attach_metrics(const CorpusSpec& spec, std::vector<StudyPlan>& test_plans,
                    const std::vector<ReportShape>& shapes) {
  std::array<std::vector<std::size_t>, 4> strata;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const int h = shapes[i].flag_count;
    strata[h >= 4 ? 0 : h == 3 ? 1 : h == 2 ? 2 : 3].push_back(i);
  }
  const double n4 = static_cast<double>(strata[0].size());
  const double n3 = n4 + static_cast<double>(strata[1].size());
  const double n2 = n3 + static_cast<double>(strata[2].size());
  const double n = static_cast<double>(shapes.size());
  for (const auto& row : spec.metrics) {
    const std::array<double, 4> mean = {
        row.flagged4, (n3 * row.flagged3 - n4 * row.flagged4) / (n3 - n4),
        (n2 * row.flagged2 - n3 * row.flagged3) / (n2 - n3),
        (n * row.original - n2 * row.flagged2) / (n - n2)};
    for (std::size_t s = 0; s < 4; ++s) {
      const auto& members = strata[s];
      for (std::size_t k = 0; k < members.size(); ++k) {
        double delta = 0.0;
        if (k + 1 < members.size() || members.size() % 2 == 0) delta = (k % 2 ? -1 : 1) * 0.01;
        test_plans[members[k]].metrics[row.name] = std::round((mean[s] + delta) * 1e6) / 1e6;
      }
    }
  }
}

void build_corpus(const CorpusSpec& spec, const fs::path& dir) {
  Rng rng(spec.seed);
  const auto cal_index = cxrflag::calibration_indices(kStudies, kCalibrationStudies, spec.split_seed);
  std::vector<bool> is_cal(kStudies, false);
  for (auto i : cal_index) is_cal[i] = true;

  // Test reports.
  const auto shapes = plan_test_shapes(spec, rng);
  std::vector<std::vector<Kind>> test_kinds;
  for (const auto& s : shapes) {
    std::vector<Kind> k;
    for (Kind kind : kKinds) k.insert(k.end(), s.kinds[kind], kind);
    rng.shuffle(k);
    test_kinds.push_back(std::move(k));
  }
  std::array<std::vector<int>, 4> score_pool;
  for (Kind kind : kKinds) {
    score_pool[kind] = expand(spec.scores[kind]);
    rng.shuffle(score_pool[kind]);
  }
  std::vector<std::vector<Category>> test_categories;
  assign_categories(test_kinds, spec.kinds, rng, test_categories);

  // Calibration reports.
  std::vector<std::vector<int>> cal_scores;
  const auto cal_kinds = calibration_kinds(spec, rng, cal_scores);
  std::vector<std::vector<Category>> cal_categories;
  assign_categories(cal_kinds, calibration_pools(cal_kinds, rng), rng, cal_categories);

  // Test reports are dealt to the test ids in a shuffled order so flag
  // counts are not sorted by id.
  std::vector<std::size_t> test_order(shapes.size());
  std::iota(test_order.begin(), test_order.end(), 0);
  rng.shuffle(test_order);

  std::vector<StudyPlan> test_plans(shapes.size());
  std::array<std::size_t, 4> next_score{};
  for (std::size_t r = 0; r < shapes.size(); ++r) {
    std::vector<int> scores;
    for (Kind kind : test_kinds[r]) scores.push_back(score_pool[kind][next_score[kind]++]);
    test_plans[r] = plan_study("", test_kinds[r], test_categories[r], scores, rng);
  }
  attach_metrics(spec, test_plans, shapes);

  std::vector<cxrflag::Study> studies;
  std::size_t next_test = 0, next_cal = 0;
  cxrflag::Judge judge(cxrflag::reference_backend());
  for (int i = 0; i < kStudies; ++i) {
    const auto id = fmt::format("{}-{:04d}", spec.prefix, i + 1);
    StudyPlan plan;
    if (is_cal[static_cast<std::size_t>(i)]) {
      plan = plan_study(id, cal_kinds[next_cal], cal_categories[next_cal], cal_scores[next_cal], rng);
      ++next_cal;
    } else {
      plan = std::move(test_plans[test_order[next_test++]]);
      plan.study_id = id;
    }
    auto study = realize(plan);
    verify(study, plan, judge);
    studies.push_back(std::move(study));
  }

  fs::create_directories(dir);
  write_lines(dir / "dataset.jsonl", studies);
  const json config = {{"dataset_path", "dataset.jsonl"},
                       {"cache_dir", "cache"},
                       {"output_dir", "out"},
                       {"agreement_path", "../agreement.csv"},
                       {"alpha", 0.05},
                       {"n", kN},
                       {"calibration_size", kCalibrationStudies},
                       {"seed", spec.split_seed},
                       {"lambda2_fractions", {0.05, 0.10, 0.25}},
                       {"evaluate_lambda2", {2, 3, 4}}};
  std::ofstream(dir / "config.json") << config.dump(2) << "\n";
  std::cout << fmt::format("{}: {} studies written to {}\n", spec.name, studies.size(),
                           dir.string());
}

CorpusSpec medversa() {
  CorpusSpec s;
  s.name = "medversa";
  s.prefix = "mv";
  s.seed = 20240601;
  s.split_seed = 17;
  // Lungs, Pleural, Cardiomediastinal, Musculoskeletal, Devices, Other.
  const auto table = [](int lu, int pl, int cm, int ms, int de, int ot) {
    return std::map<Category, int>{{Category::kLungs, lu},          {Category::kPleural, pl},
                                   {Category::kCardiomediastinal, cm}, {Category::kMusculoskeletal, ms},
                                   {Category::kDevices, de},        {Category::kOther, ot}};
  };
  s.kinds[kFlagHalluc] = table(24, 9, 34, 7, 54, 19);
  s.kinds[kFlagFactual] = table(15, 7, 14, 0, 9, 9);
  s.kinds[kAcceptFactual] = table(187, 327, 216, 50, 33, 39);
  s.kinds[kAcceptHalluc] = table(99, 63, 100, 4, 87, 22);
  // Flagged at lambda1 = 6; the split at 4 gives the alpha = 0.02 row.
  s.scores[kFlagHalluc] = {{0, 15}, {1, 20}, {2, 22}, {3, 27}, {4, 30}, {5, 33}};
  s.scores[kFlagFactual] = {{0, 2}, {1, 4}, {2, 5}, {3, 8}, {4, 15}, {5, 20}};
  s.scores[kAcceptFactual] = {{6, 60}, {7, 110}, {8, 170}, {9, 230}, {10, 282}};
  s.scores[kAcceptHalluc] = {{6, 60}, {7, 80}, {8, 85}, {9, 80}, {10, 70}};
  s.groups = {{concat({repeat(6, 1), repeat(5, 3), repeat(4, 7)}), 86},
              {repeat(3, 13), 44},
              {repeat(2, 33), 109},
              {concat({repeat(1, 47), repeat(0, 104)}), 283}};
  s.calibration_factual = {{0, 5},   {1, 8},   {2, 10},  {3, 15},  {4, 8},  {5, 49},
                           {6, 35},  {7, 150}, {8, 250}, {9, 350}, {10, 360}};
  s.calibration_halluc = {{0, 60}, {1, 70}, {2, 80}, {3, 90}, {4, 90}, {5, 90},
                          {6, 80}, {7, 80}, {8, 70}, {9, 60}, {10, 51}};
  s.metrics = {{"RadCliQ-v1", 1.630, 1.376, 1.290, 1.085},
               {"RadGraph entity precision", 0.192, 0.249, 0.279, 0.379},
               {"RadGraph entity recall", 0.195, 0.244, 0.241, 0.275},
               {"RadGraph relation precision", 0.020, 0.103, 0.137, 0.206},
               {"RadGraph relation recall", 0.034, 0.101, 0.110, 0.130}};
  return s;
}

CorpusSpec radialog() {
  CorpusSpec s;
  s.name = "radialog";
  s.prefix = "rd";
  s.seed = 20240602;
  s.split_seed = 29;
  const auto table = [](int lu, int pl, int cm, int ms, int de, int ot) {
    return std::map<Category, int>{{Category::kLungs, lu},          {Category::kPleural, pl},
                                   {Category::kCardiomediastinal, cm}, {Category::kMusculoskeletal, ms},
                                   {Category::kDevices, de},        {Category::kOther, ot}};
  };
  s.kinds[kFlagHalluc] = table(41, 10, 31, 14, 26, 31);
  s.kinds[kFlagFactual] = table(19, 9, 16, 5, 5, 7);
  s.kinds[kAcceptFactual] = table(158, 251, 134, 32, 39, 36);
  s.kinds[kAcceptHalluc] = table(160, 60, 103, 16, 79, 73);
  // Flagged at lambda1 = 4; the split at 2 gives the alpha = 0.02 row.
  s.scores[kFlagHalluc] = {{0, 40}, {1, 44}, {2, 33}, {3, 36}};
  s.scores[kFlagFactual] = {{0, 10}, {1, 14}, {2, 17}, {3, 20}};
  s.scores[kAcceptFactual] = {{4, 60}, {5, 80}, {6, 100}, {7, 110}, {8, 110}, {9, 100}, {10, 90}};
  s.scores[kAcceptHalluc] = {{4, 80}, {5, 80}, {6, 80}, {7, 70}, {8, 65}, {9, 60}, {10, 56}};
  s.groups = {{concat({repeat(6, 1), repeat(5, 3), repeat(4, 9)}), 60},
              {repeat(3, 12), 40},
              {repeat(2, 36), 120},
              {concat({repeat(1, 49), repeat(0, 98)}), 424}};
  s.calibration_factual = {{0, 16},  {1, 20},  {2, 16},  {3, 46},  {4, 42},  {5, 150},
                           {6, 180}, {7, 200}, {8, 200}, {9, 190}, {10, 180}};
  s.calibration_halluc = {{0, 60}, {1, 70}, {2, 80}, {3, 90}, {4, 90}, {5, 90},
                          {6, 80}, {7, 80}, {8, 70}, {9, 60}, {10, 51}};
  s.metrics = {{"RadCliQ-v1", 1.290, 1.233, 1.213, 1.222},
               {"RadGraph entity precision", 0.269, 0.275, 0.299, 0.308},
               {"RadGraph entity recall", 0.099, 0.271, 0.262, 0.241},
               {"RadGraph relation precision", 0.107, 0.119, 0.135, 0.140},
               {"RadGraph relation recall", 0.336, 0.118, 0.120, 0.103}};
  return s;
}

// Entropy of a two-way split.
double h2(double p) { return -(p * std::log(p) + (1 - p) * std::log(1 - p)); }

// Reports ranked by both baselines. Rank r (0 = highest score) gets target
// values; each candidate has one two-token sentence whose realized
// probabilities and distributions hit both targets.
void build_entropy(const fs::path& dir) {
  constexpr int kReports = 197;
  // True hallucination counts per entropy-rank block: top 10, next 13, next
  // 31, remaining 143.
  const auto block = [](std::initializer_list<std::pair<int, int>> h) {
    std::vector<int> out;
    for (auto [value, count] : h) out.insert(out.end(), count, value);
    return out;
  };
  std::vector<int> e1 = block({{1, 2}, {2, 3}, {3, 1}, {4, 1}, {5, 1}, {7, 1}, {8, 1}});
  std::vector<int> e2 = block({{1, 3}, {3, 4}, {4, 4}, {5, 2}});
  std::vector<int> e3 = block({{3, 29}, {5, 2}});
  std::vector<int> e4 = block({{0, 10}, {1, 34}, {2, 48}, {3, 1}, {4, 40}, {6, 10}});

  Rng rng(20240603);
  for (auto* b : {&e1, &e2, &e3, &e4}) rng.shuffle(*b);
  std::vector<int> by_entropy_rank;
  for (auto* b : {&e1, &e2, &e3, &e4}) {
    by_entropy_rank.insert(by_entropy_rank.end(), b->begin(), b->end());
  }

  // Log-probability ranking: the top 23 are the same reports, reordered so
  // the top 10 hold five 1s, three 2s and two 5s; one 3 in the next block
  // trades places with a 4 from the tail.
  std::vector<int> top23(23);
  std::iota(top23.begin(), top23.end(), 0);
  std::vector<int> first10, next13;
  std::map<int, int> wanted = {{1, 5}, {2, 3}, {5, 2}};
  for (int r : top23) {
    auto& left = wanted[by_entropy_rank[static_cast<std::size_t>(r)]];
    if (left > 0) {
      --left;
      first10.push_back(r);
    } else {
      next13.push_back(r);
    }
  }
  std::vector<int> mid(31), tail(143);
  std::iota(mid.begin(), mid.end(), 23);
  std::iota(tail.begin(), tail.end(), 54);
  const auto three = std::find_if(mid.begin(), mid.end(), [&](int r) {
    return by_entropy_rank[static_cast<std::size_t>(r)] == 3;
  });
  const auto four = std::find_if(tail.begin(), tail.end(), [&](int r) {
    return by_entropy_rank[static_cast<std::size_t>(r)] == 4;
  });
  std::iter_swap(three, four);
  rng.shuffle(first10);
  rng.shuffle(next13);
  rng.shuffle(mid);
  rng.shuffle(tail);
  std::vector<int> logprob_order = concat({first10, next13, mid, tail});
  std::vector<int> logprob_rank(kReports);
  for (int k = 0; k < kReports; ++k) logprob_rank[static_cast<std::size_t>(logprob_order[static_cast<std::size_t>(k)])] = k;

  // Reports are listed in a shuffled order under sequential ids.
  std::vector<int> placement(kReports);
  std::iota(placement.begin(), placement.end(), 0);
  rng.shuffle(placement);

  std::vector<cxrflag::Study> studies;
  for (int i = 0; i < kReports; ++i) {
    const int r = placement[static_cast<std::size_t>(i)];  // entropy rank
    const double target_nlp = 1.5 + 0.5 * (kReports - 1 - logprob_rank[static_cast<std::size_t>(r)]) /
                                        static_cast<double>(kReports - 1);
    const double target_h = 0.15 + 0.23 * (kReports - 1 - r) / static_cast<double>(kReports - 1);
    // Token 1 realizes the major outcome u of [u, 1-u]; token 2 realizes the
    // minor outcome w of [1-w, w] with u * w = exp(-2 * target_nlp).
    const double product = std::exp(-2.0 * target_nlp);
    double lo = 0.5, hi = 1.0 - 1e-12;
    for (int it = 0; it < 200; ++it) {
      const double u = 0.5 * (lo + hi);
      const double f = 0.5 * (h2(u) + h2(product / u));
      (f > target_h ? lo : hi) = u;
    }
    const double u = 0.5 * (lo + hi);
    const double w = product / u;
    if (!(w < 0.5)) throw std::runtime_error("entropy target out of reach");

    cxrflag::Study s;
    s.study_id = fmt::format("ent-{:04d}", i + 1);
    s.image_ref = s.study_id;
    s.candidate = {s.study_id, kFiller, 0.1, cxrflag::ReportKind::kCandidate, {}, {}};
    s.candidate.token_probs = cxrflag::TokenProbabilities{{u, w}};
    s.candidate.token_distributions = cxrflag::TokenDistributions{{{u, 1.0 - u}, {1.0 - w, w}}};
    for (int j = 0; j < kN; ++j) {
      s.samples.push_back({s.study_id, kFiller, 1.0, cxrflag::ReportKind::kSample, {}, {}});
    }
    s.external_metrics["true_hallucinations"] = by_entropy_rank[static_cast<std::size_t>(r)];
    studies.push_back(std::move(s));
  }
  fs::create_directories(dir);
  write_lines(dir / "dataset.jsonl", studies);
  std::cout << fmt::format("entropy: {} studies written to {}\n", studies.size(), dir.string());
}

// Judge-vs-clinician labels: 279 both entailed, 47 judge only, 42 clinician
// only, 179 neither.
void build_agreement(const fs::path& path) {
  std::vector<std::pair<int, int>> rows;
  rows.insert(rows.end(), 279, {1, 1});
  rows.insert(rows.end(), 47, {1, 0});
  rows.insert(rows.end(), 42, {0, 1});
  rows.insert(rows.end(), 179, {0, 0});
  Rng rng(20240604);
  rng.shuffle(rows);
  std::ofstream out(path);
  out << "sentence_ref,judge_label,reference_label\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << fmt::format("agr-{:04d}#{},{},{}\n", i / 4 + 1, i % 4, rows[i].first, rows[i].second);
  }
  std::cout << fmt::format("agreement: {} rows written to {}\n", rows.size(), path.string());
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixtures <output-dir>\n";
    return 2;
  }
  const fs::path out = argv[1];
  try {
    build_corpus(medversa(), out / "medversa");
    build_corpus(radialog(), out / "radialog");
    build_entropy(out / "entropy");
    build_agreement(out / "agreement.csv");
  } catch (const std::exception& e) {
    std::cerr << "make_fixtures: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
