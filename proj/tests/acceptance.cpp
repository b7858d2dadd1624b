// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "cxrflag/calibration.hpp"
#include "cxrflag/categories.hpp"
#include "cxrflag/config.hpp"
#include "cxrflag/corpus.hpp"
#include "cxrflag/entropy.hpp"
#include "cxrflag/errors.hpp"
#include "cxrflag/evaluation.hpp"
#include "cxrflag/flagging.hpp"
#include "cxrflag/pipeline.hpp"

namespace fs = std::filesystem;
using namespace cxrflag;
using nlohmann::json;

namespace {

// Pinned tolerances.
constexpr double kRateTol = 1e-3;
constexpr double kSummaryAvgTol = 0.05;
constexpr double kAccuracyTol = 1e-3;
constexpr double kEntropyExactTol = 1e-12;
constexpr double kEntropyGroupTol = 0.01;
constexpr double kCalibrateSeconds = 1.0;
constexpr double kSimulationSeconds = 60.0;
constexpr int kSimulationTrials = 1000;
constexpr int kOracleSets = 500;
constexpr int kMonotoneCases = 1000;

const fs::path kFixtures = CXRFLAG_FIXTURE_DIR;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Scratch root removed on exit.
struct Scratch {
  fs::path root;
  Scratch() {
    root = fs::temp_directory_path() /
           ("cxrflag-acceptance-" + std::to_string(std::random_device{}()));
    fs::create_directories(root);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(root, ec);
  }
};

// Copies a fixture corpus into `dir` and returns its config. The agreement
// CSV is resolved against the shipped fixture tree.
PipelineConfig stage_fixture(const std::string& name, const fs::path& dir) {
  fs::create_directories(dir);
  fs::copy_file(kFixtures / name / "dataset.jsonl", dir / "dataset.jsonl");
  fs::copy_file(kFixtures / name / "config.json", dir / "config.json");
  auto config = load_config(dir / "config.json");
  config.agreement_path = kFixtures / "agreement.csv";
  return config;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// --- Criterion 1 -----------------------------------------------------------

Outcome thresholds(const fs::path& scratch) {
  const std::map<std::string, std::map<double, int>> want = {
      {"medversa", {{0.05, 6}, {0.02, 4}}}, {"radialog", {{0.05, 4}, {0.02, 2}}}};
  Outcome o{true, ""};
  double slowest = 0;
  for (const auto& [name, by_alpha] : want) {
    auto config = stage_fixture(name, scratch / ("thresholds-" + name));
    cmd_entail(config);
    for (const auto& [alpha, lambda1] : by_alpha) {
      config.alpha = alpha;
      const auto t0 = std::chrono::steady_clock::now();
      const auto t = cmd_calibrate(config);
      slowest = std::max(slowest, seconds_since(t0));
      o.detail += fmt::format("{} a={} l1={} (want {}); ", name, alpha, t.lambda1, lambda1);
      o.pass = o.pass && t.lambda1 == lambda1;
    }
  }
  o.detail += fmt::format("slowest calibrate {:.3f}s", slowest);
  o.pass = o.pass && slowest < kCalibrateSeconds;
  return o;
}

// --- Criterion 2 -----------------------------------------------------------

std::vector<SentenceDecision> g_decisions;
std::vector<CalibrationLabel> g_labels;

ConfusionCounts confusion_from_counts(long fh, long ff, long af, long ah) {
  g_decisions.clear();
  g_labels.clear();
  int i = 0;
  auto add = [&](long count, bool flagged, int entailed) {
    for (long k = 0; k < count; ++k, ++i) {
      g_decisions.push_back({{"a2", i}, flagged ? 0 : 10, flagged});
      g_labels.push_back({{"a2", i}, entailed});
    }
  };
  add(fh, true, 0);
  add(ff, true, 1);
  add(af, false, 1);
  add(ah, false, 0);
  return confusion(g_decisions, g_labels);
}

Outcome rates() {
  struct Case {
    const char* name;
    long fh, ff, af, ah;
    double precision, recall;
  };
  const std::array<Case, 2> cases = {Case{"medversa", 147, 54, 852, 375, 0.731, 0.282},
                                     Case{"radialog", 153, 61, 650, 491, 0.715, 0.238}};
  Outcome o{true, ""};
  for (const auto& c : cases) {
    const auto counts = confusion_from_counts(c.fh, c.ff, c.af, c.ah);
    const double p = counts.precision().value_or(-1);
    const double r = counts.recall().value_or(-1);
    o.pass = o.pass && std::abs(p - c.precision) <= kRateTol && std::abs(r - c.recall) <= kRateTol;
    o.detail += fmt::format("{} precision {:.4f} recall {:.4f}; ", c.name, p, r);
  }
  return o;
}

// --- Criterion 3 -----------------------------------------------------------

Outcome summary_table_repro(const fs::path& scratch) {
  auto config = stage_fixture("medversa", scratch / "summary");
  config.evaluate_lambda2 = {2, 3, 4};
  cmd_run_all(config);
  const auto summary = json::parse(read_file(config.resolve(config.output_dir) / kSummaryJsonFile));
  // (lambda2, split) -> (n, average true hallucinations)
  const std::map<std::pair<int, std::string>, std::pair<int, double>> want = {
      {{2, "accepted"}, {151, 1.9}}, {{2, "flagged"}, {57, 4.2}},
      {{3, "accepted"}, {184, 2.1}}, {{3, "flagged"}, {24, 5.4}},
      {{4, "accepted"}, {197, 2.2}}, {{4, "flagged"}, {11, 7.8}}};
  Outcome o{true, ""};
  int matched = 0;
  for (const auto& row : summary.at("summary")) {
    if (row.at("lambda2").is_null()) continue;
    const auto key = std::make_pair(row.at("lambda2").get<int>(), row.at("split").get<std::string>());
    const auto it = want.find(key);
    if (it == want.end()) continue;
    ++matched;
    const int n = row.at("n_reports");
    const double avg = row.at("avg_true_hallucinations");
    o.pass = o.pass && n == it->second.first &&
             std::abs(avg - it->second.second) <= kSummaryAvgTol;
    o.detail += fmt::format("l2={} {} ({},{:.2f}); ", key.first, key.second, n, avg);
  }
  o.pass = o.pass && matched == static_cast<int>(want.size());
  return o;
}

// --- Criterion 4 -----------------------------------------------------------

Outcome agreement_metric() {
  // Judge/reference label vectors realizing the reference 2x2 table.
  std::vector<int> judge, reference;
  auto add = [&](int count, int j, int r) {
    for (int i = 0; i < count; ++i) {
      judge.push_back(j);
      reference.push_back(r);
    }
  };
  add(279, 1, 1);
  add(47, 1, 0);
  add(42, 0, 1);
  add(179, 0, 0);
  const auto direct = agreement(judge, reference);

  std::vector<int> fj, fr;
  for (const auto& row : load_agreement_csv(kFixtures / "agreement.csv")) {
    fj.push_back(row.judge_label);
    fr.push_back(row.reference_label);
  }
  const auto fixture = agreement(fj, fr);
  const bool same_table = fixture.matrix[1][1] == 279 && fixture.matrix[1][0] == 47 &&
                          fixture.matrix[0][1] == 42 && fixture.matrix[0][0] == 179;
  return {std::abs(direct.accuracy - 0.837) <= kAccuracyTol &&
              std::abs(fixture.accuracy - 0.837) <= kAccuracyTol && same_table,
          fmt::format("accuracy {:.4f} (fixture CSV {:.4f}, {} rows)", direct.accuracy,
                      fixture.accuracy, fixture.total())};
}

// --- Criterion 5 -----------------------------------------------------------

Outcome crc_guarantee() {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o{true, ""};
  for (double alpha : {0.02, 0.05, 0.1}) {
    CrcSimulationSpec spec;
    spec.trials = kSimulationTrials;
    spec.calibration_size = 300;
    spec.alpha = alpha;
    spec.seed = 7;
    const auto r = simulate_crc(spec);
    // Binomial standard error of the pooled held-out flag rate.
    const double se = std::sqrt(alpha * (1 - alpha) / (double(spec.trials) * spec.test_size));
    o.pass = o.pass && r.mean_test_risk <= alpha + 2 * se;
    o.detail += fmt::format("a={} risk {:.4f} bound {:.4f}; ", alpha, r.mean_test_risk,
                            alpha + 2 * se);
  }
  const double secs = seconds_since(t0);
  o.pass = o.pass && secs < kSimulationSeconds;
  o.detail += fmt::format("{:.2f}s", secs);
  return o;
}

// --- Criterion 6 -----------------------------------------------------------

// Exhaustive search over every integer threshold, computed directly from the
// points rather than through cumulative counts.
std::optional<int> brute_force_lambda1(const std::vector<CalibrationPoint>& points, double alpha,
                                       int n) {
  std::optional<int> best;
  for (int lambda = 0; lambda <= n + 1; ++lambda) {
    long loss = 0;
    for (const auto& p : points) loss += (p.score < lambda && p.entailed == 1) ? 1 : 0;
    const double c = static_cast<double>(points.size());
    if ((loss + 1.0) / (c + 1.0) <= alpha + 1e-12) best = lambda;
  }
  return best;
}

Outcome oracle() {
  std::mt19937_64 rng(606);
  int disagreements = 0, nonmonotone = 0, infeasible = 0;
  for (int set = 0; set < kOracleSets; ++set) {
    const int n = std::uniform_int_distribution<int>(1, 15)(rng);
    const int c = std::uniform_int_distribution<int>(1, 400)(rng);
    const double alpha = std::uniform_real_distribution<double>(0.005, 0.4)(rng);
    const double p_entailed = std::uniform_real_distribution<double>(0.1, 0.9)(rng);
    std::vector<CalibrationPoint> points;
    for (int i = 0; i < c; ++i) {
      points.push_back({std::uniform_int_distribution<int>(0, n)(rng),
                        std::bernoulli_distribution(p_entailed)(rng) ? 1 : 0});
    }
    const auto want = brute_force_lambda1(points, alpha, n);
    std::optional<int> got;
    try {
      got = calibrate_lambda1(points, alpha, n).lambda1;
    } catch (const CalibrationError&) {
      ++infeasible;
    }
    if (got != want) ++disagreements;
    double prev = -1;
    for (int lambda = 0; lambda <= n + 1; ++lambda) {
      const double r = empirical_risk(points, lambda);
      if (r < prev) ++nonmonotone;
      prev = r;
    }
  }
  return {disagreements == 0 && nonmonotone == 0,
          fmt::format("{} sets, {} disagreements, {} nonmonotone risks, {} infeasible", kOracleSets,
                      disagreements, nonmonotone, infeasible)};
}

// --- Criterion 7 -----------------------------------------------------------

Outcome monotonicity() {
  std::mt19937_64 rng(707);
  int sentence_violations = 0, report_violations = 0;
  for (int t = 0; t < kMonotoneCases; ++t) {
    const int n = std::uniform_int_distribution<int>(1, 12)(rng);
    const int lo = std::uniform_int_distribution<int>(0, n + 1)(rng);
    const int hi = std::uniform_int_distribution<int>(lo, n + 1)(rng);
    const int count = std::uniform_int_distribution<int>(1, 30)(rng);
    for (int i = 0; i < count; ++i) {
      const EntailmentScore s{{"m", i}, std::uniform_int_distribution<int>(0, n)(rng), n};
      if (flag_sentence(s, lo).flagged && !flag_sentence(s, hi).flagged) ++sentence_violations;
    }
  }
  for (int t = 0; t < kMonotoneCases; ++t) {
    const int reports = std::uniform_int_distribution<int>(1, 20)(rng);
    const int lo = std::uniform_int_distribution<int>(1, 8)(rng);
    const int hi = std::uniform_int_distribution<int>(lo, 9)(rng);
    for (int r = 0; r < reports; ++r) {
      std::vector<SentenceDecision> d;
      const int sentences = std::uniform_int_distribution<int>(0, 10)(rng);
      for (int i = 0; i < sentences; ++i) {
        d.push_back({{"r", i}, 0, std::bernoulli_distribution(0.4)(rng)});
      }
      for (auto rule : {ReportRule::kAtLeast, ReportRule::kMoreThan}) {
        if (flag_report("r", d, hi, rule).flagged && !flag_report("r", d, lo, rule).flagged) {
          ++report_violations;
        }
      }
    }
  }
  return {sentence_violations == 0 && report_violations == 0,
          fmt::format("{} lambda1 cases, {} lambda2 cases; violations {} / {}", kMonotoneCases,
                      kMonotoneCases, sentence_violations, report_violations)};
}

// --- Criterion 8 -----------------------------------------------------------

Outcome entropy_formulas() {
  Report certain;
  certain.study_id = "certain";
  certain.text = "x";
  certain.token_probs = TokenProbabilities{{1.0, 1.0}};
  certain.token_distributions = TokenDistributions{{{1.0, 0.0}, {0.0, 1.0}}};
  Report pair = certain;
  pair.study_id = "pair";
  pair.token_probs = TokenProbabilities{{0.5, 0.5}};
  pair.token_distributions = TokenDistributions{{{0.5, 0.5}, {0.5, 0.5}}};
  const auto a = entropy_baselines(certain);
  const auto b = entropy_baselines(pair);
  const double ln2 = std::log(2.0);
  bool pass = std::abs(a.avg_neg_logprob) <= kEntropyExactTol &&
              std::abs(*a.avg_entropy) <= kEntropyExactTol &&
              std::abs(b.avg_neg_logprob - ln2) <= kEntropyExactTol &&
              std::abs(*b.avg_entropy - ln2) <= kEntropyExactTol;

  const auto studies = load_dataset(kFixtures / "entropy" / "dataset.jsonl", 10);
  std::vector<Report> candidates;
  for (const auto& s : studies) candidates.push_back(s.candidate);
  const auto scores = omp::entropy_baselines(candidates);
  struct Row {
    int k;
    double accepted, flagged;
  };
  const std::map<std::string, std::vector<Row>> want = {
      {"avg_entropy", {{10, 2.63, 3.50}, {23, 2.59, 3.30}, {54, 2.46, 3.20}}},
      {"avg_neg_logprob", {{10, 2.70, 2.10}, {23, 2.59, 3.30}, {54, 2.46, 3.22}}}};
  std::string detail = fmt::format("exact cases {}; ", pass ? "ok" : "off");
  for (const auto& [method, rows] : want) {
    std::vector<RankedReport> ranked;
    for (std::size_t i = 0; i < studies.size(); ++i) {
      ranked.push_back({studies[i].study_id,
                        method == "avg_entropy" ? *scores[i].avg_entropy
                                                : scores[i].avg_neg_logprob,
                        static_cast<int>(studies[i].external_metrics.at("true_hallucinations"))});
    }
    for (const auto& row : rows) {
      const auto split = rank_split(ranked, row.k);
      const double acc = split.accepted.mean.value_or(-1);
      const double flg = split.flagged.mean.value_or(-1);
      pass = pass && split.accepted.n == 197 - row.k && split.flagged.n == row.k &&
             std::abs(acc - row.accepted) <= kEntropyGroupTol &&
             std::abs(flg - row.flagged) <= kEntropyGroupTol;
      detail += fmt::format("{} {}/{} {:.3f}/{:.3f}; ", method, split.accepted.n, split.flagged.n,
                            acc, flg);
    }
  }
  return {pass, detail};
}

// --- Criterion 9 -----------------------------------------------------------

Outcome categories(const fs::path& scratch) {
  std::ifstream in(kFixtures / "categories.tsv");
  std::string line;
  std::getline(in, line);  // header
  int total = 0, agree = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    const auto want = category_from_string(line.substr(tab + 1));
    ++total;
    if (want && categorize(line.substr(0, tab)) == *want) ++agree;
  }
  bool pass = total == 30 && agree == total;
  std::string detail = fmt::format("classifier {}/{}; ", agree, total);

  // Reference tables list (flag halluc, flag factual, accept, accept); the
  // last two columns follow the sentence-level totals in reverse order.
  using Table = std::map<std::string, std::array<long, 4>>;
  const std::map<std::string, Table> want = {
      {"medversa",
       {{"Lungs", {24, 15, 187, 99}},
        {"Pleural", {9, 7, 327, 63}},
        {"Cardiomediastinal", {34, 14, 216, 100}},
        {"Musculoskeletal", {7, 0, 50, 4}},
        {"Devices", {54, 9, 33, 87}},
        {"Other", {19, 9, 39, 22}}}},
      {"radialog",
       {{"Lungs", {41, 19, 158, 160}},
        {"Pleural", {10, 9, 251, 60}},
        {"Cardiomediastinal", {31, 16, 134, 103}},
        {"Musculoskeletal", {14, 5, 32, 16}},
        {"Devices", {26, 5, 39, 79}},
        {"Other", {31, 7, 36, 73}}}}};
  for (const auto& [name, table] : want) {
    auto config = stage_fixture(name, scratch / ("categories-" + name));
    config.agreement_path.clear();
    cmd_run_all(config);
    const auto summary =
        json::parse(read_file(config.resolve(config.output_dir) / kSummaryJsonFile));
    int rows_ok = 0;
    for (const auto& [cat, cells] : table) {
      const auto& got = summary.at("categories").at(cat);
      const std::array<long, 4> have = {got.at("flag_halluc"), got.at("flag_factual"),
                                        got.at("accept_factual"), got.at("accept_halluc")};
      if (have == cells) ++rows_ok;
    }
    pass = pass && rows_ok == 6 && summary.at("categories").size() == 6;
    detail += fmt::format("{} rows {}/6; ", name, rows_ok);
  }
  return {pass, detail};
}

// --- Criterion 10 ----------------------------------------------------------

Outcome replay_determinism(const fs::path& scratch) {
  bool pass = true;
  int files = 0;
  for (const std::string name : {"medversa", "radialog"}) {
    auto record = stage_fixture(name, scratch / ("record-" + name));
    record.judge.backend = "reference";
    cmd_entail(record);
    std::vector<fs::path> outs;
    for (const std::string run : {"a", "b"}) {
      const auto dir = scratch / ("replay-" + name + "-" + run);
      auto config = stage_fixture(name, dir);
      fs::copy(record.resolve(record.cache_dir), dir / "cache", fs::copy_options::recursive);
      config.offline = true;
      cmd_run_all(config);
      outs.push_back(config.resolve(config.output_dir));
    }
    for (const auto& e : fs::recursive_directory_iterator(outs[0])) {
      if (!e.is_regular_file()) continue;
      const auto rel = fs::relative(e.path(), outs[0]);
      ++files;
      if (read_file(e.path()) != read_file(outs[1] / rel)) pass = false;
    }
    if (read_file(outs[0] / kScoresFile) != read_file(record.resolve(record.output_dir) / kScoresFile)) {
      pass = false;
    }
  }
  return {pass && files > 0, fmt::format("{} output files compared across two offline runs", files)};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  Scratch scratch;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"sentence thresholds on fixtures", [&] { return thresholds(scratch.root); }},
      {"precision and recall from confusion counts", rates},
      {"summary table on the MedVersa-style fixture",
       [&] { return summary_table_repro(scratch.root); }},
      {"judge agreement accuracy", agreement_metric},
      {"risk guarantee by simulation", crc_guarantee},
      {"calibration matches brute force", oracle},
      {"nested flag sets", monotonicity},
      {"entropy baselines", entropy_formulas},
      {"category classifier and per-category tables", [&] { return categories(scratch.root); }},
      {"offline replay determinism", [&] { return replay_determinism(scratch.root); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << ": "
              << criteria[i].first << " | " << o.detail << "\n";
  }
  std::cout << (failures == 0 ? "all criteria passed" : fmt::format("{} criteria failed", failures))
            << "\n";
  return failures == 0 ? 0 : 1;
}
