#include "cxrflag/entailment.hpp"

#include <algorithm>
#include <set>

#include "cxrflag/assets.hpp"
#include "cxrflag/errors.hpp"
#include "json.hpp"

namespace cxrflag {

using nlohmann::json;

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kCompletelyEntailed: return "completely entailed";
    case Verdict::kPartiallyEntailed: return "partially entailed";
    case Verdict::kNotEntailed: return "not entailed";
  }
  return "not entailed";
}

char verdict_code(Verdict v) {
  switch (v) {
    case Verdict::kCompletelyEntailed: return 'E';
    case Verdict::kPartiallyEntailed: return 'P';
    case Verdict::kNotEntailed: return 'N';
  }
  return 'N';
}

Verdict verdict_from_code(char code) {
  switch (code) {
    case 'E': return Verdict::kCompletelyEntailed;
    case 'P': return Verdict::kPartiallyEntailed;
    case 'N': return Verdict::kNotEntailed;
    default: throw DataError(std::string("unknown verdict code '") + code + "'");
  }
}

namespace {

// Models often wrap JSON in prose or code fences; take the outermost object.
json extract_object(std::string_view raw) {
  const auto open = raw.find('{');
  const auto close = raw.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    throw JudgeResponseError("judge response contains no JSON object", std::string(raw));
  }
  try {
    return json::parse(raw.substr(open, close - open + 1));
  } catch (const json::exception& e) {
    throw JudgeResponseError(std::string("judge response is not valid JSON: ") + e.what(),
                             std::string(raw));
  }
}

int report_number(const json& v, std::string_view raw) {
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (!s.empty() && (s[0] == 'R' || s[0] == 'r')) s.erase(0, 1);
    try {
      std::size_t used = 0;
      int n = std::stoi(s, &used);
      if (used == s.size()) return n;
    } catch (const std::exception&) {
    }
  }
  throw JudgeResponseError("report number " + v.dump() + " is not an integer", std::string(raw));
}

std::string replace_all(std::string text, std::string_view needle, std::string_view value) {
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    text.replace(pos, needle.size(), value);
    pos += value.size();
  }
  return text;
}

std::string load_asset(const std::string& name) {
  auto text = assets::find(name);
  if (!text) throw ConfigError("unknown prompt asset " + name);
  return std::string(*text);
}

}  // namespace

std::vector<Verdict> parse_corpus_response(std::string_view raw, int n) {
  const json obj = extract_object(raw);
  if (!obj.is_object()) throw JudgeResponseError("judge response is not an object", std::string(raw));
  std::vector<std::optional<Verdict>> slots(static_cast<std::size_t>(n));
  const std::pair<const char*, Verdict> groups[] = {
      {"E", Verdict::kCompletelyEntailed},
      {"P", Verdict::kPartiallyEntailed},
      {"N", Verdict::kNotEntailed},
  };
  for (const auto& [key, verdict] : groups) {
    if (!obj.contains(key)) continue;
    const auto& list = obj.at(key);
    if (!list.is_array()) {
      throw JudgeResponseError(std::string("member ") + key + " is not a list", std::string(raw));
    }
    for (const auto& v : list) {
      const int number = report_number(v, raw);
      if (number < 1 || number > n) {
        throw JudgeResponseError("report number " + std::to_string(number) + " outside 1.." +
                                     std::to_string(n),
                                 std::string(raw));
      }
      auto& slot = slots[static_cast<std::size_t>(number - 1)];
      if (slot) {
        throw JudgeResponseError("report " + std::to_string(number) + " listed more than once",
                                 std::string(raw));
      }
      slot = verdict;
    }
  }
  std::vector<Verdict> out;
  out.reserve(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i]) {
      throw JudgeResponseError("report " + std::to_string(i + 1) + " has no verdict; lists must add up to " +
                                   std::to_string(n),
                               std::string(raw));
    }
    out.push_back(*slots[i]);
  }
  return out;
}

Verdict parse_ground_truth_response(std::string_view raw) {
  const json obj = extract_object(raw);
  if (!obj.is_object() || !obj.contains("status") || !obj.at("status").is_string()) {
    throw JudgeResponseError("judge response lacks a string 'status'", std::string(raw));
  }
  std::string status = obj.at("status").get<std::string>();
  std::transform(status.begin(), status.end(), status.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  status.erase(0, status.find_first_not_of(" \t"));
  status.erase(status.find_last_not_of(" \t.") + 1);
  if (status == "entailed" || status == "completely entailed") return Verdict::kCompletelyEntailed;
  if (status == "partially entailed") return Verdict::kPartiallyEntailed;
  if (status == "not entailed") return Verdict::kNotEntailed;
  throw JudgeResponseError("unknown status '" + status + "'", std::string(raw));
}

std::string format_corpus_response(std::span<const Verdict> verdicts) {
  json obj = {{"E", json::array()}, {"P", json::array()}, {"N", json::array()}};
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    const char* key = verdicts[i] == Verdict::kCompletelyEntailed ? "E"
                      : verdicts[i] == Verdict::kPartiallyEntailed ? "P"
                                                                   : "N";
    obj[key].push_back(static_cast<int>(i + 1));
  }
  return obj.dump();
}

std::string format_ground_truth_response(Verdict verdict) {
  const char* status = verdict == Verdict::kCompletelyEntailed ? "entailed"
                       : verdict == Verdict::kPartiallyEntailed ? "partially entailed"
                                                                : "not entailed";
  return json{{"status", status}}.dump();
}

PromptTemplates PromptTemplates::builtin(const std::string& version) {
  PromptTemplates t;
  t.version = version;
  t.corpus = load_asset("prompt_corpus_" + version);
  t.ground_truth = load_asset("prompt_ground_truth_" + version);
  t.repair = load_asset("prompt_repair_" + version);
  return t;
}

std::string PromptTemplates::render_corpus(std::string_view sentence,
                                           std::span<const std::string> reports) const {
  std::string listing;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (i) listing += "\n\n";
    listing += "R" + std::to_string(i + 1) + ": " + reports[i];
  }
  std::string out = replace_all(corpus, "{{n}}", std::to_string(reports.size()));
  out = replace_all(std::move(out), "{{finding}}", sentence);
  return replace_all(std::move(out), "{{reports}}", listing);
}

std::string PromptTemplates::render_ground_truth(std::string_view sentence,
                                                 std::string_view report) const {
  std::string out = replace_all(ground_truth, "{{finding}}", sentence);
  return replace_all(std::move(out), "{{report}}", report);
}

std::string PromptTemplates::render_repair(std::string_view error, std::string_view response) const {
  std::string out = replace_all(repair, "{{error}}", error);
  return replace_all(std::move(out), "{{response}}", response);
}

Judge::Judge(std::shared_ptr<JudgeBackend> backend, JudgeOptions options)
    : backend_(std::move(backend)),
      options_(std::move(options)),
      templates_(PromptTemplates::builtin(options_.prompt_version)) {
  if (!options_.cache_dir.empty()) store_.emplace(options_.cache_dir);
  if (options_.replay_only && !store_) throw ConfigError("replay-only judge needs a cache directory");
  if (!options_.replay_only && !backend_) throw ConfigError("judge has no backend");
}

std::string Judge::corpus_key(std::string_view sentence, std::span<const std::string> reports) const {
  json k = {{"prompt_version", templates_.version},
            {"kind", "corpus"},
            {"sentence", sentence},
            {"reports", std::vector<std::string>(reports.begin(), reports.end())}};
  return sha256_hex(k.dump());
}

std::string Judge::ground_truth_key(std::string_view sentence, std::string_view report) const {
  json k = {{"prompt_version", templates_.version},
            {"kind", "ground_truth"},
            {"sentence", sentence},
            {"report", report}};
  return sha256_hex(k.dump());
}

std::vector<Verdict> Judge::verdicts_for(std::string_view sentence,
                                         std::span<const std::string> reports) {
  if (reports.empty()) throw DataError("cannot judge against an empty sample corpus");
  const int n = static_cast<int>(reports.size());
  const std::string key = corpus_key(sentence, reports);
  if (store_) {
    if (auto hit = store_->get(key)) {
      cache_hits_.fetch_add(1);
      return parse_corpus_response(hit->at("response").get<std::string>(), n);
    }
  }
  if (options_.replay_only) {
    throw CacheMissError("judge cache miss for sentence \"" + std::string(sentence) + "\"");
  }
  CorpusJudgeRequest request{std::string(sentence),
                             std::vector<std::string>(reports.begin(), reports.end()),
                             templates_.render_corpus(sentence, reports), std::nullopt};
  backend_calls_.fetch_add(1);
  std::string raw = backend_->judge_corpus(request);
  std::vector<Verdict> verdicts;
  try {
    verdicts = parse_corpus_response(raw, n);
  } catch (const JudgeResponseError& first) {
    request.repair_note = templates_.render_repair(first.what(), raw);
    backend_calls_.fetch_add(1);
    raw = backend_->judge_corpus(request);
    try {
      verdicts = parse_corpus_response(raw, n);
    } catch (const JudgeResponseError& second) {
      throw JudgeResponseError(std::string("judge response invalid after repair: ") + second.what(),
                               raw);
    }
  }
  if (store_) {
    store_->put(key, json{{"kind", "corpus"},
                          {"prompt_version", templates_.version},
                          {"sentence", sentence},
                          {"n", n},
                          {"response", raw}});
  }
  return verdicts;
}

Verdict Judge::verdict_for(std::string_view sentence, std::string_view report) {
  const std::string key = ground_truth_key(sentence, report);
  if (store_) {
    if (auto hit = store_->get(key)) {
      cache_hits_.fetch_add(1);
      return parse_ground_truth_response(hit->at("response").get<std::string>());
    }
  }
  if (options_.replay_only) {
    throw CacheMissError("judge cache miss for ground-truth sentence \"" + std::string(sentence) +
                         "\"");
  }
  GroundTruthJudgeRequest request{std::string(sentence), std::string(report),
                                  templates_.render_ground_truth(sentence, report), std::nullopt};
  backend_calls_.fetch_add(1);
  std::string raw = backend_->judge_ground_truth(request);
  Verdict verdict;
  try {
    verdict = parse_ground_truth_response(raw);
  } catch (const JudgeResponseError& first) {
    request.repair_note = templates_.render_repair(first.what(), raw);
    backend_calls_.fetch_add(1);
    raw = backend_->judge_ground_truth(request);
    try {
      verdict = parse_ground_truth_response(raw);
    } catch (const JudgeResponseError& second) {
      throw JudgeResponseError(std::string("judge response invalid after repair: ") + second.what(),
                               raw);
    }
  }
  if (store_) {
    store_->put(key, json{{"kind", "ground_truth"},
                          {"prompt_version", templates_.version},
                          {"sentence", sentence},
                          {"response", raw}});
  }
  return verdict;
}

BatchVerdicts judge_against_corpus(const Sentence& sentence, std::span<const Report> samples,
                                   Judge& judge) {
  std::vector<std::string> texts;
  texts.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.failed()) throw DataError("failed samples must be removed before judging");
    texts.push_back(s.text);
  }
  return {sentence.ref(), judge.verdicts_for(sentence.text, texts)};
}

EntailmentScore score_from_verdicts(const SentenceRef& ref, std::span<const Verdict> verdicts) {
  const auto support = std::count_if(verdicts.begin(), verdicts.end(), [](Verdict v) {
    return v != Verdict::kNotEntailed;
  });
  return {ref, static_cast<int>(support), static_cast<int>(verdicts.size())};
}

EntailmentScore score(const Sentence& sentence, std::span<const Report> samples, Judge& judge) {
  const auto batch = judge_against_corpus(sentence, samples, judge);
  return score_from_verdicts(batch.sentence_ref, batch.verdicts);
}

int label_from_verdict(Verdict v) { return v == Verdict::kCompletelyEntailed ? 1 : 0; }

CalibrationLabel label_against_ground_truth(const Sentence& sentence, const Report& ground_truth,
                                            Judge& judge) {
  if (ground_truth.text.empty()) throw DataError("ground truth report is empty");
  return {sentence.ref(), label_from_verdict(judge.verdict_for(sentence.text, ground_truth.text))};
}

}  // namespace cxrflag
