#pragma once

// End-to-end commands. Each command reads its inputs from files and writes
// its outputs to config.output_dir, so any stage can be rerun alone.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cxrflag/calibration.hpp"
#include "cxrflag/config.hpp"
#include "cxrflag/entailment.hpp"
#include "json.hpp"

namespace cxrflag {

inline constexpr const char* kScoresFile = "scores.jsonl";
inline constexpr const char* kThresholdsFile = "thresholds.json";
inline constexpr const char* kFlagsFile = "flags.jsonl";
inline constexpr const char* kSummaryJsonFile = "summary.json";
inline constexpr const char* kSummaryTextFile = "summary.txt";
inline constexpr const char* kResolvedConfigFile = "config.resolved.json";

enum class SplitKind { kCalibration, kTest };

struct ScoredSentence {
  int index = 0;
  std::string text;
  Category category = Category::kOther;
  std::string verdicts;  // one 'E'/'P'/'N' per usable sample
  int score = 0;
  std::optional<Verdict> ground_truth_verdict;
  std::optional<int> label;

  bool operator==(const ScoredSentence&) const = default;
};

struct ScoredStudy {
  std::string study_id;
  SplitKind split = SplitKind::kTest;
  int effective_n = 0;
  std::vector<ScoredSentence> sentences;

  nlohmann::json to_json() const;
  static ScoredStudy from_json(const nlohmann::json& j);
  bool operator==(const ScoredStudy&) const = default;
};

std::vector<ScoredStudy> load_scores(const std::filesystem::path& path);
void write_scores(const std::filesystem::path& path, const std::vector<ScoredStudy>& studies);

// Tokenizes, categorizes, scores against the usable samples and labels
// against the ground truth when one is present.
ScoredStudy score_study(const Study& study, SplitKind split, Judge& judge);

// Judge wired from the config: backend choice, verdict cache under
// cache_dir/judge, replay-only when offline.
std::unique_ptr<Judge> make_judge(const PipelineConfig& config,
                                  std::shared_ptr<JudgeBackend> backend_override = nullptr);

struct SampleStats {
  std::size_t studies = 0;
  std::size_t network_calls = 0;
};

// Reads manifest_path, generates a candidate plus n samples per study and
// writes dataset_path. `transport` overrides the HTTP client (tests).
SampleStats cmd_sample(const PipelineConfig& config,
                       std::shared_ptr<JsonPoster> transport = nullptr);

// dataset_path -> output_dir/scores.jsonl
std::vector<ScoredStudy> cmd_entail(const PipelineConfig& config,
                                    std::shared_ptr<JudgeBackend> backend_override = nullptr);

// scores.jsonl -> thresholds.json
Thresholds cmd_calibrate(const PipelineConfig& config);

// scores.jsonl + thresholds.json -> flags.jsonl (and filtered/*.txt)
void cmd_flag(const PipelineConfig& config);

// scores.jsonl + thresholds.json + dataset -> summary.json, summary.txt
nlohmann::json cmd_evaluate(const PipelineConfig& config);

// entail, calibrate, flag, evaluate; also writes config.resolved.json.
void cmd_run_all(const PipelineConfig& config,
                 std::shared_ptr<JudgeBackend> backend_override = nullptr);

// Writes via a temporary file and rename.
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace cxrflag
