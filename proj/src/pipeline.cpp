#include "cxrflag/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "cxrflag/categories.hpp"
#include "cxrflag/entropy.hpp"
#include "cxrflag/errors.hpp"
#include "cxrflag/evaluation.hpp"
#include "cxrflag/flagging.hpp"
#include "cxrflag/genclient.hpp"
#include "cxrflag/http.hpp"
#include "cxrflag/parallel.hpp"
#include "cxrflag/tokenizer.hpp"

namespace cxrflag {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string split_name(SplitKind s) { return s == SplitKind::kCalibration ? "calibration" : "test"; }

SplitKind split_from_name(const std::string& s) {
  if (s == "calibration") return SplitKind::kCalibration;
  if (s == "test") return SplitKind::kTest;
  throw DataError("unknown split '" + s + "'");
}

fs::path output_path(const PipelineConfig& config, const char* name) {
  return config.resolve(config.output_dir) / name;
}

Thresholds load_thresholds(const PipelineConfig& config) {
  const auto path = output_path(config, kThresholdsFile);
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string() + " (run `calibrate` first)");
  try {
    return Thresholds::from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<SentenceDecision> decisions_for(const ScoredStudy& s, int lambda1) {
  std::vector<SentenceDecision> out;
  for (const auto& sent : s.sentences) {
    out.push_back(flag_sentence({{s.study_id, sent.index}, sent.score, s.effective_n}, lambda1));
  }
  return out;
}

std::vector<const ScoredStudy*> test_studies(const std::vector<ScoredStudy>& scores) {
  std::vector<const ScoredStudy*> out;
  for (const auto& s : scores) {
    if (s.split == SplitKind::kTest) out.push_back(&s);
  }
  return out;
}

int require_label(const ScoredStudy& s, const ScoredSentence& sent) {
  if (!sent.label) {
    throw DataError(fmt::format("{} study '{}' sentence {} has no ground-truth label",
                                split_name(s.split), s.study_id, sent.index));
  }
  return *sent.label;
}

std::string safe_file_name(const std::string& id) {
  std::string out = id;
  for (auto& c : out) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-';
    if (!ok) c = '_';
  }
  if (out.empty() || out[0] == '.') out.insert(out.begin(), '_');
  return out;
}

std::string optional_number(std::optional<double> v, const char* format) {
  return v ? fmt::format(fmt::runtime(format), *v) : std::string("--");
}

json group_json(const GroupStats& g) {
  return {{"n", g.n},
          {"mean", g.mean ? json(*g.mean) : json(nullptr)},
          {"median", g.median ? json(*g.median) : json(nullptr)}};
}

}  // namespace

void write_text_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const auto tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out) throw Error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

json ScoredStudy::to_json() const {
  json sents = json::array();
  for (const auto& s : sentences) {
    json j = {{"index", s.index},
              {"text", s.text},
              {"category", std::string(cxrflag::to_string(s.category))},
              {"verdicts", s.verdicts},
              {"score", s.score}};
    j["gt_verdict"] =
        s.ground_truth_verdict ? json(std::string(1, verdict_code(*s.ground_truth_verdict)))
                               : json(nullptr);
    j["label"] = s.label ? json(*s.label) : json(nullptr);
    sents.push_back(std::move(j));
  }
  return {{"study_id", study_id},
          {"split", split_name(split)},
          {"effective_n", effective_n},
          {"sentences", std::move(sents)}};
}

ScoredStudy ScoredStudy::from_json(const json& j) {
  ScoredStudy s;
  s.study_id = j.at("study_id").get<std::string>();
  s.split = split_from_name(j.at("split").get<std::string>());
  s.effective_n = j.at("effective_n").get<int>();
  for (const auto& js : j.at("sentences")) {
    ScoredSentence sent;
    sent.index = js.at("index").get<int>();
    sent.text = js.at("text").get<std::string>();
    const auto cat = category_from_string(js.at("category").get<std::string>());
    if (!cat) throw DataError("unknown category in scores for '" + s.study_id + "'");
    sent.category = *cat;
    sent.verdicts = js.at("verdicts").get<std::string>();
    sent.score = js.at("score").get<int>();
    if (!js.at("gt_verdict").is_null()) {
      const auto code = js.at("gt_verdict").get<std::string>();
      if (code.size() != 1) throw DataError("bad gt_verdict in scores for '" + s.study_id + "'");
      sent.ground_truth_verdict = verdict_from_code(code[0]);
    }
    if (!js.at("label").is_null()) sent.label = js.at("label").get<int>();
    if (sent.score < 0 || sent.score > s.effective_n) {
      throw DataError(fmt::format("score {} outside [0, {}] for '{}'", sent.score, s.effective_n,
                                  s.study_id));
    }
    s.sentences.push_back(std::move(sent));
  }
  return s;
}

std::vector<ScoredStudy> load_scores(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string() + " (run `entail` first)");
  std::vector<ScoredStudy> out;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    try {
      out.push_back(ScoredStudy::from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw DataError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    } catch (const DataError& e) {
      throw DataError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
  }
  return out;
}

void write_scores(const fs::path& path, const std::vector<ScoredStudy>& studies) {
  std::string content;
  for (const auto& s : studies) content += s.to_json().dump() + "\n";
  write_text_file(path, content);
}

ScoredStudy score_study(const Study& study, SplitKind split, Judge& judge) {
  ScoredStudy out;
  out.study_id = study.study_id;
  out.split = split;
  const auto samples = study.usable_samples();
  out.effective_n = static_cast<int>(samples.size());
  const auto& classifier = CategoryClassifier::builtin();
  for (const auto& sentence : tokenize(study.candidate)) {
    ScoredSentence s;
    s.index = sentence.index;
    s.text = sentence.text;
    s.category = classifier.classify(sentence.text);
    if (!samples.empty()) {
      const auto batch = judge_against_corpus(sentence, samples, judge);
      for (auto v : batch.verdicts) s.verdicts += verdict_code(v);
      s.score = score_from_verdicts(sentence.ref(), batch.verdicts).value;
    }
    if (study.ground_truth) {
      const auto v = judge.verdict_for(sentence.text, study.ground_truth->text);
      s.ground_truth_verdict = v;
      s.label = label_from_verdict(v);
    }
    out.sentences.push_back(std::move(s));
  }
  return out;
}

std::unique_ptr<Judge> make_judge(const PipelineConfig& config,
                                  std::shared_ptr<JudgeBackend> backend_override) {
  std::shared_ptr<JudgeBackend> backend = std::move(backend_override);
  if (!backend) {
    if (config.judge.backend == "reference") {
      backend = reference_backend();
    } else {
      if (config.judge.endpoint.empty() && !config.offline) {
        throw ConfigError("judge.backend is 'llm' but judge.endpoint is not set");
      }
      const char* key = std::getenv(kJudgeApiKeyEnv);
      backend = llm_backend({config.judge.endpoint, config.judge.model_name, key ? key : ""});
    }
  }
  JudgeOptions options;
  options.prompt_version = config.judge.prompt_version;
  options.cache_dir = config.resolve(config.cache_dir) / "judge";
  options.replay_only = config.offline;
  return std::make_unique<Judge>(std::move(backend), options);
}

SampleStats cmd_sample(const PipelineConfig& config, std::shared_ptr<JsonPoster> transport) {
  config.validate();
  if (config.manifest_path.empty()) throw ConfigError("manifest_path is not set");
  auto studies = load_manifest(config.resolve(config.manifest_path));
  const auto& gen = config.generation;
  const auto cache = config.resolve(config.cache_dir) / "generations";
  const bool no_endpoint = gen.endpoint.empty();
  if (!transport && !config.offline && !no_endpoint) {
    transport = std::make_shared<HttpJsonPoster>(gen.endpoint);
  }
  if (config.offline || no_endpoint) transport = nullptr;
  GenerationService service(cache, gen.endpoint, transport, gen.retry_limit, gen.retry_backoff);

  for (auto& study : studies) {
    GenerationRequest base{study.study_id, study.image_ref, 0.0, std::nullopt};
    Study generated;
    try {
      generated = generate_study(base, gen, service);
    } catch (const CacheMissError& e) {
      if (no_endpoint) {
        throw ConfigError(fmt::format(
            "study '{}': no cached generation and no endpoint configured; set "
            "generation.endpoint in the config (or pass --endpoint): {}",
            study.study_id, e.what()));
      }
      throw CacheMissError(fmt::format("study '{}': {} (drop --offline to call the service)",
                                       study.study_id, e.what()));
    } catch (const BackendError& e) {
      throw BackendError(fmt::format("study '{}': {}", study.study_id, e.what()));
    }
    study.candidate = std::move(generated.candidate);
    study.samples = std::move(generated.samples);
  }
  write_dataset(config.resolve(config.dataset_path), studies);
  spdlog::info("sampled {} studies ({} network calls)", studies.size(), service.network_calls());
  return {studies.size(), service.network_calls()};
}

std::vector<ScoredStudy> cmd_entail(const PipelineConfig& config,
                                    std::shared_ptr<JudgeBackend> backend_override) {
  config.validate();
  const auto studies = load_dataset(config.resolve(config.dataset_path), config.n);
  const auto cal = calibration_indices(studies.size(), config.calibration_size, config.seed);
  std::vector<bool> is_cal(studies.size(), false);
  for (auto i : cal) is_cal[i] = true;

  auto judge = make_judge(config, std::move(backend_override));
  std::vector<ScoredStudy> scored(studies.size());
  bounded_parallel_for(studies.size(), config.judge.max_parallel, [&](std::size_t i) {
    const auto split = is_cal[i] ? SplitKind::kCalibration : SplitKind::kTest;
    if (split == SplitKind::kCalibration && !studies[i].ground_truth) {
      throw DataError("calibration study '" + studies[i].study_id + "' has no ground-truth report");
    }
    try {
      scored[i] = score_study(studies[i], split, *judge);
    } catch (const Error& e) {
      spdlog::error("study '{}': {}", studies[i].study_id, e.what());
      throw;
    }
  });
  write_scores(output_path(config, kScoresFile), scored);
  spdlog::info("scored {} studies ({} judge calls, {} cache hits)", scored.size(),
               judge->backend_calls(), judge->cache_hits());
  return scored;
}

Thresholds cmd_calibrate(const PipelineConfig& config) {
  config.validate();
  const auto scores = load_scores(output_path(config, kScoresFile));
  std::vector<CalibrationPoint> points;
  for (const auto& s : scores) {
    if (s.split != SplitKind::kCalibration) continue;
    for (const auto& sent : s.sentences) points.push_back({sent.score, require_label(s, sent)});
  }
  if (points.empty()) throw DataError("scores contain no calibration sentences");
  auto thresholds = calibrate_lambda1(points, config.alpha, config.n, config.formula_variant);

  std::vector<int> counts;
  for (const auto* s : test_studies(scores)) {
    counts.push_back(flag_report(s->study_id, decisions_for(*s, thresholds.lambda1), 1).flag_count);
  }
  if (counts.empty()) {
    spdlog::warn("no test studies; lambda2 sweep skipped");
  } else {
    thresholds.lambda2_by_fraction =
        sweep_lambda2(counts, config.lambda2_fractions, config.lambda2_selection);
    thresholds.lambda2 = thresholds.lambda2_by_fraction.at(config.lambda2_fractions.front());
  }
  if (config.lambda2) thresholds.lambda2 = config.lambda2;
  write_text_file(output_path(config, kThresholdsFile), thresholds.to_json().dump(2) + "\n");
  spdlog::info("lambda1 = {} over {} calibration sentences", thresholds.lambda1, points.size());
  return thresholds;
}

void cmd_flag(const PipelineConfig& config) {
  config.validate();
  const auto scores = load_scores(output_path(config, kScoresFile));
  const auto thresholds = load_thresholds(config);
  const auto lambda2 = config.lambda2 ? config.lambda2 : thresholds.lambda2;
  if (!lambda2) throw ConfigError("no report threshold available; pass --lambda2");

  std::map<std::string, Study> candidates;
  if (config.emit_filtered) {
    for (auto& s : load_dataset(config.resolve(config.dataset_path), config.n)) {
      candidates.emplace(s.study_id, std::move(s));
    }
  }

  std::string lines;
  int emptied = 0;
  for (const auto* s : test_studies(scores)) {
    const auto decisions = decisions_for(*s, thresholds.lambda1);
    const auto report = flag_report(s->study_id, decisions, *lambda2, config.report_rule);
    json sentences = json::array();
    for (std::size_t i = 0; i < decisions.size(); ++i) {
      const auto& sent = s->sentences[i];
      sentences.push_back({{"index", sent.index},
                           {"text", sent.text},
                           {"score", sent.score},
                           {"flagged", decisions[i].flagged},
                           {"category", std::string(to_string(sent.category))}});
    }
    json line = {{"study_id", s->study_id},       {"lambda1", thresholds.lambda1},
                 {"lambda2", *lambda2},           {"sentences", std::move(sentences)},
                 {"flag_count", report.flag_count}, {"report_flagged", report.flagged}};
    lines += line.dump() + "\n";

    if (config.emit_filtered) {
      const auto it = candidates.find(s->study_id);
      if (it == candidates.end()) {
        throw DataError("study '" + s->study_id + "' is in the scores but not in the dataset");
      }
      const auto filtered = remove_flagged(it->second.candidate, decisions);
      if (filtered.emptied) ++emptied;
      const auto dir = config.resolve(config.output_dir) / "filtered";
      write_text_file(dir / (safe_file_name(s->study_id) + ".txt"),
                      filtered.report.text.empty() ? "" : filtered.report.text + "\n");
    }
  }
  write_text_file(output_path(config, kFlagsFile), lines);
  if (emptied > 0) spdlog::warn("{} filtered reports are empty (every sentence flagged)", emptied);
}

json cmd_evaluate(const PipelineConfig& config) {
  config.validate();
  const auto scores = load_scores(output_path(config, kScoresFile));
  const auto thresholds = load_thresholds(config);
  const auto dataset = load_dataset(config.resolve(config.dataset_path), config.n);
  std::map<std::string, const Study*> by_id;
  for (const auto& s : dataset) by_id[s.study_id] = &s;

  std::vector<int> lambda2_values = config.evaluate_lambda2;
  if (lambda2_values.empty()) {
    std::set<int> swept;
    for (const auto& [f, l] : thresholds.lambda2_by_fraction) swept.insert(l);
    if (swept.empty() && thresholds.lambda2) swept.insert(*thresholds.lambda2);
    lambda2_values.assign(swept.begin(), swept.end());
  }

  std::vector<SentenceDecision> decisions;
  std::vector<CalibrationLabel> labels;
  std::vector<Category> categories;
  std::vector<StudyOutcome> outcomes;
  std::vector<Report> candidates;
  for (const auto* s : test_studies(scores)) {
    const auto it = by_id.find(s->study_id);
    if (it == by_id.end()) {
      throw DataError("study '" + s->study_id + "' is in the scores but not in the dataset");
    }
    StudyOutcome outcome{s->study_id, 0, 0, it->second->external_metrics};
    const auto study_decisions = decisions_for(*s, thresholds.lambda1);
    for (std::size_t i = 0; i < study_decisions.size(); ++i) {
      const auto& sent = s->sentences[i];
      const int label = require_label(*s, sent);
      decisions.push_back(study_decisions[i]);
      labels.push_back({{s->study_id, sent.index}, label});
      categories.push_back(sent.category);
      if (study_decisions[i].flagged) ++outcome.flag_count;
      if (label == 0) ++outcome.true_hallucinations;
    }
    outcomes.push_back(std::move(outcome));
    candidates.push_back(it->second->candidate);
  }
  if (outcomes.empty()) throw DataError("scores contain no test studies");

  const auto counts = confusion(decisions, labels);
  const auto by_category = category_breakdown(decisions, labels, categories);
  const auto rows = summary_table(std::span<const StudyOutcome>(outcomes), lambda2_values,
                                  config.report_rule);

  json out;
  out["alpha"] = thresholds.alpha;
  out["lambda1"] = thresholds.lambda1;
  out["lambda2_values"] = lambda2_values;
  out["report_rule"] = to_string(config.report_rule);
  out["test_reports"] = outcomes.size();
  out["test_sentences"] = decisions.size();
  out["confusion"] = counts.to_json();
  json cats = json::object();
  for (const auto& [c, cc] : by_category) cats[std::string(to_string(c))] = cc.to_json();
  out["categories"] = cats;
  json jrows = json::array();
  for (const auto& r : rows) jrows.push_back(r.to_json());
  out["summary"] = jrows;

  std::string text = fmt::format("alpha = {}  lambda1 = {}  test reports = {}  sentences = {}\n\n",
                                 thresholds.alpha, thresholds.lambda1, outcomes.size(),
                                 decisions.size());
  text += format_summary_table(rows);
  text += fmt::format("\nSentence confusion: flag_halluc {}  flag_factual {}  accept_factual {}  "
                      "accept_halluc {}  precision {}  recall {}\n",
                      counts.flag_halluc, counts.flag_factual, counts.accept_factual,
                      counts.accept_halluc, optional_number(counts.precision(), "{:.3f}"),
                      optional_number(counts.recall(), "{:.3f}"));
  text += "\nCategory          FlagHalluc  FlagFactual  AcceptFactual  AcceptHalluc\n";
  for (const auto& [c, cc] : by_category) {
    text += fmt::format("{:<17} {:>10}  {:>11}  {:>13}  {:>12}\n", to_string(c), cc.flag_halluc,
                        cc.flag_factual, cc.accept_factual, cc.accept_halluc);
  }

  // Entropy baselines over candidates that carry token probabilities.
  const bool have_probs = std::all_of(candidates.begin(), candidates.end(),
                                      [](const Report& r) { return r.token_probs.has_value(); });
  if (have_probs) {
    const auto entropy = omp::entropy_baselines(candidates);
    const bool have_dists = std::all_of(entropy.begin(), entropy.end(),
                                        [](const EntropyScores& e) { return e.avg_entropy; });
    json methods = json::array();
    text += "\nRanking baseline          lambda2  k    accepted n/mean/median  flagged n/mean/median\n";
    for (const std::string method : {"avg_entropy", "avg_neg_logprob"}) {
      if (method == "avg_entropy" && !have_dists) continue;
      std::vector<RankedReport> ranked;
      for (std::size_t i = 0; i < entropy.size(); ++i) {
        const double score = method == "avg_entropy" ? *entropy[i].avg_entropy
                                                     : entropy[i].avg_neg_logprob;
        ranked.push_back({outcomes[i].study_id, score, outcomes[i].true_hallucinations});
      }
      for (const auto& row : rows) {
        if (row.split != SplitLabel::kFlagged) continue;
        const double fraction = static_cast<double>(row.n_reports) / outcomes.size();
        const auto split = rank_split(ranked, top_k_for_fraction(fraction, ranked.size()));
        methods.push_back({{"method", method},
                           {"lambda2", *row.lambda2},
                           {"k", split.k},
                           {"accepted", group_json(split.accepted)},
                           {"flagged", group_json(split.flagged)}});
        const auto g = [](const GroupStats& s) {
          return fmt::format("{}/{}/{}", s.n, optional_number(s.mean, "{:.2f}"),
                             optional_number(s.median, "{:.1f}"));
        };
        text += fmt::format("{:<25} {:>7}  {:<3}  {:<22}  {}\n", method, *row.lambda2, split.k,
                            g(split.accepted), g(split.flagged));
      }
    }
    out["entropy_baselines"] = methods;
  } else {
    out["entropy_baselines"] = nullptr;
  }

  if (!config.agreement_path.empty()) {
    const auto csv = load_agreement_csv(config.resolve(config.agreement_path));
    std::vector<int> judge_labels, reference_labels;
    for (const auto& r : csv) {
      judge_labels.push_back(r.judge_label);
      reference_labels.push_back(r.reference_label);
    }
    const auto a = agreement(judge_labels, reference_labels);
    out["agreement"] = {{"accuracy", a.accuracy},
                        {"judge_entailed_reference_entailed", a.matrix[1][1]},
                        {"judge_entailed_reference_not", a.matrix[1][0]},
                        {"judge_not_reference_entailed", a.matrix[0][1]},
                        {"judge_not_reference_not", a.matrix[0][0]}};
    text += fmt::format("\nJudge vs reference labels: accuracy {:.3f} over {} sentences "
                        "(EE {}, EN {}, NE {}, NN {})\n",
                        a.accuracy, a.total(), a.matrix[1][1], a.matrix[1][0], a.matrix[0][1],
                        a.matrix[0][0]);
  } else {
    out["agreement"] = nullptr;
  }

  write_text_file(output_path(config, kSummaryJsonFile), out.dump(2) + "\n");
  write_text_file(output_path(config, kSummaryTextFile), text);
  return out;
}

void cmd_run_all(const PipelineConfig& config, std::shared_ptr<JudgeBackend> backend_override) {
  config.validate();
  write_text_file(output_path(config, kResolvedConfigFile), config.to_json().dump(2) + "\n");
  cmd_entail(config, std::move(backend_override));
  cmd_calibrate(config);
  cmd_flag(config);
  cmd_evaluate(config);
}

}  // namespace cxrflag
