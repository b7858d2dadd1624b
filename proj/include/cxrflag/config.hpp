#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cxrflag/calibration.hpp"
#include "cxrflag/flagging.hpp"
#include "cxrflag/genclient.hpp"
#include "json.hpp"

namespace cxrflag {

// Environment variable holding the judge service credential.
inline constexpr const char* kJudgeApiKeyEnv = "CXRFLAG_JUDGE_API_KEY";

struct JudgeConfig {
  // "reference" (offline rule-based judge) or "llm" (chat-completions service).
  std::string backend = "reference";
  std::string endpoint;
  std::string model_name;
  std::string prompt_version = "v1";
  int max_parallel = 4;

  bool operator==(const JudgeConfig&) const = default;
};

struct PipelineConfig {
  // Relative paths are resolved against base_dir (the config file's directory).
  std::filesystem::path manifest_path;
  std::filesystem::path dataset_path = "dataset.jsonl";
  std::filesystem::path cache_dir = "cache";
  std::filesystem::path output_dir = "out";
  std::filesystem::path agreement_path;  // optional clinician-label CSV
  GenerationConfig generation;
  JudgeConfig judge;
  double alpha = 0.05;
  int n = 10;
  int calibration_size = 300;
  std::vector<double> lambda2_fractions{0.05, 0.10, 0.25};
  Lambda2Selection lambda2_selection = Lambda2Selection::kAtMost;
  // Report threshold used by `flag`; defaults to the first fraction's lambda2.
  std::optional<int> lambda2;
  // Report thresholds tabulated by `evaluate`; defaults to the swept values.
  std::vector<int> evaluate_lambda2;
  ReportRule report_rule = ReportRule::kAtLeast;
  RiskBound formula_variant = RiskBound::kStandard;
  std::uint64_t seed = 0;
  bool offline = false;
  bool emit_filtered = false;

  std::filesystem::path base_dir;  // not serialized

  void validate() const;
  std::filesystem::path resolve(const std::filesystem::path& p) const;

  // Every field, defaults included.
  nlohmann::json to_json() const;
  // Missing keys take defaults; unknown keys are a ConfigError.
  static PipelineConfig from_json(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir = {});

  bool operator==(const PipelineConfig&) const = default;
};

PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace cxrflag
