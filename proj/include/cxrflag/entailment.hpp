#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cxrflag/content_store.hpp"
#include "cxrflag/corpus.hpp"

namespace cxrflag {

enum class Verdict { kCompletelyEntailed, kPartiallyEntailed, kNotEntailed };

std::string_view to_string(Verdict v);
// Single-letter code used in score files: 'E', 'P' or 'N'.
char verdict_code(Verdict v);
Verdict verdict_from_code(char code);

struct BatchVerdicts {
  SentenceRef sentence_ref;
  std::vector<Verdict> verdicts;  // one per usable sample, positionally aligned
};

struct EntailmentScore {
  SentenceRef sentence_ref;
  int value = 0;
  int effective_n = 0;
};

struct CalibrationLabel {
  SentenceRef sentence_ref;
  int entailed = 0;
};

// Inputs handed to a judge backend. `prompt` is the fully rendered prompt;
// `repair_note` is set on the single re-prompt after a malformed answer.
struct CorpusJudgeRequest {
  std::string sentence;
  std::vector<std::string> reports;
  std::string prompt;
  std::optional<std::string> repair_note;
};

struct GroundTruthJudgeRequest {
  std::string sentence;
  std::string report;
  std::string prompt;
  std::optional<std::string> repair_note;
};

// Anything that answers the entailment wire contract. Responses are raw text:
// {"E":[...],"P":[...],"N":[...]} for corpus requests (1-based report
// numbers) and {"status": "..."} for ground-truth requests.
class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;
  virtual std::string judge_corpus(const CorpusJudgeRequest& request) = 0;
  virtual std::string judge_ground_truth(const GroundTruthJudgeRequest& request) = 0;
  virtual std::string name() const = 0;
};

// Parses and validates a corpus response for n reports. Throws
// JudgeResponseError on malformed JSON or a partition violation.
std::vector<Verdict> parse_corpus_response(std::string_view raw, int n);
Verdict parse_ground_truth_response(std::string_view raw);
// Inverse of parse_corpus_response.
std::string format_corpus_response(std::span<const Verdict> verdicts);
std::string format_ground_truth_response(Verdict verdict);

struct PromptTemplates {
  std::string version;
  std::string corpus;
  std::string ground_truth;
  std::string repair;

  static PromptTemplates builtin(const std::string& version = "v1");

  std::string render_corpus(std::string_view sentence,
                            std::span<const std::string> reports) const;
  std::string render_ground_truth(std::string_view sentence, std::string_view report) const;
  std::string render_repair(std::string_view error, std::string_view response) const;
};

struct JudgeOptions {
  std::string prompt_version = "v1";
  // Verdict cache directory; empty disables caching.
  std::filesystem::path cache_dir;
  // Never call the backend; cache misses raise CacheMissError.
  bool replay_only = false;
};

// Validating, caching front end over a backend. Cache keys hash the prompt
// version, request kind, sentence text and ordered report texts. Only
// validated responses are cached. Safe to share across threads.
class Judge {
 public:
  Judge(std::shared_ptr<JudgeBackend> backend, JudgeOptions options = {});

  std::vector<Verdict> verdicts_for(std::string_view sentence,
                                    std::span<const std::string> reports);
  Verdict verdict_for(std::string_view sentence, std::string_view report);

  std::size_t backend_calls() const { return backend_calls_.load(); }
  std::size_t cache_hits() const { return cache_hits_.load(); }
  const PromptTemplates& templates() const { return templates_; }

 private:
  std::string corpus_key(std::string_view sentence, std::span<const std::string> reports) const;
  std::string ground_truth_key(std::string_view sentence, std::string_view report) const;

  std::shared_ptr<JudgeBackend> backend_;
  JudgeOptions options_;
  PromptTemplates templates_;
  std::optional<ContentStore> store_;
  std::atomic<std::size_t> backend_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

// One verdict per sample. Failed (empty) samples must already be removed.
BatchVerdicts judge_against_corpus(const Sentence& sentence, std::span<const Report> samples,
                                   Judge& judge);

// Number of CE or PE verdicts among the usable samples.
EntailmentScore score(const Sentence& sentence, std::span<const Report> samples, Judge& judge);
EntailmentScore score_from_verdicts(const SentenceRef& ref, std::span<const Verdict> verdicts);

// entailed = 1 only for a CE verdict against the ground truth.
CalibrationLabel label_against_ground_truth(const Sentence& sentence, const Report& ground_truth,
                                            Judge& judge);
int label_from_verdict(Verdict v);

// Deterministic, offline rule-based judge used as a test oracle.
std::shared_ptr<JudgeBackend> reference_backend();

struct LlmJudgeConfig {
  std::string endpoint;    // OpenAI-compatible chat completions URL
  std::string model_name;
  std::string api_key;     // sent as a bearer token when non-empty
};
class JsonPoster;
// Chat-completions backend. `transport` overrides the HTTP client (tests).
std::shared_ptr<JudgeBackend> llm_backend(const LlmJudgeConfig& config,
                                          std::shared_ptr<JsonPoster> transport = nullptr);

}  // namespace cxrflag
