#include "cxrflag/config.hpp"

#include <fstream>
#include <set>

#include "cxrflag/errors.hpp"

namespace cxrflag {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_path(const json& j, const char* key, std::filesystem::path& out) {
  if (j.contains(key)) out = j.at(key).get<std::string>();
}

json generation_to_json(const GenerationConfig& g) {
  json j = {{"low_temperature", g.low_temperature},
            {"high_temperature", g.high_temperature},
            {"n_samples", g.n_samples},
            {"endpoint", g.endpoint},
            {"max_parallel", g.max_parallel},
            {"retry_limit", g.retry_limit},
            {"retry_backoff_ms", g.retry_backoff.count()}};
  j["seed"] = g.seed ? json(*g.seed) : json(nullptr);
  return j;
}

GenerationConfig generation_from_json(const json& j) {
  reject_unknown(j,
                 {"low_temperature", "high_temperature", "n_samples", "endpoint", "max_parallel",
                  "retry_limit", "retry_backoff_ms", "seed"},
                 "generation");
  GenerationConfig g;
  read(j, "low_temperature", g.low_temperature);
  read(j, "high_temperature", g.high_temperature);
  read(j, "n_samples", g.n_samples);
  read(j, "endpoint", g.endpoint);
  read(j, "max_parallel", g.max_parallel);
  read(j, "retry_limit", g.retry_limit);
  if (j.contains("retry_backoff_ms")) {
    g.retry_backoff = std::chrono::milliseconds(j.at("retry_backoff_ms").get<std::int64_t>());
  }
  if (j.contains("seed") && !j.at("seed").is_null()) g.seed = j.at("seed").get<std::int64_t>();
  return g;
}

}  // namespace

void PipelineConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (n <= 0) throw ConfigError("n must be positive");
  if (calibration_size <= 0) throw ConfigError("calibration_size must be positive");
  if (lambda2_fractions.empty()) throw ConfigError("lambda2_fractions must not be empty");
  for (double f : lambda2_fractions) {
    if (!(f > 0.0 && f < 1.0)) throw ConfigError("lambda2_fractions must lie in (0, 1)");
  }
  if (lambda2 && *lambda2 < 1) throw ConfigError("lambda2 must be a positive integer");
  for (int l : evaluate_lambda2) {
    if (l < 1) throw ConfigError("evaluate_lambda2 values must be positive integers");
  }
  if (judge.backend != "reference" && judge.backend != "llm") {
    throw ConfigError("judge.backend must be 'reference' or 'llm'");
  }
  if (judge.max_parallel <= 0) throw ConfigError("judge.max_parallel must be positive");
  generation.validate();
  if (generation.n_samples != n) {
    throw ConfigError("generation.n_samples (" + std::to_string(generation.n_samples) +
                      ") must equal n (" + std::to_string(n) + ")");
  }
}

std::filesystem::path PipelineConfig::resolve(const std::filesystem::path& p) const {
  if (p.empty() || p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

json PipelineConfig::to_json() const {
  json j = {{"manifest_path", manifest_path.generic_string()},
            {"dataset_path", dataset_path.generic_string()},
            {"cache_dir", cache_dir.generic_string()},
            {"output_dir", output_dir.generic_string()},
            {"agreement_path", agreement_path.generic_string()},
            {"generation", generation_to_json(generation)},
            {"judge",
             {{"backend", judge.backend},
              {"endpoint", judge.endpoint},
              {"model_name", judge.model_name},
              {"prompt_version", judge.prompt_version},
              {"max_parallel", judge.max_parallel}}},
            {"alpha", alpha},
            {"n", n},
            {"calibration_size", calibration_size},
            {"lambda2_fractions", lambda2_fractions},
            {"lambda2_selection", to_string(lambda2_selection)},
            {"evaluate_lambda2", evaluate_lambda2},
            {"report_rule", to_string(report_rule)},
            {"formula_variant", to_string(formula_variant)},
            {"seed", seed},
            {"offline", offline},
            {"emit_filtered", emit_filtered}};
  j["lambda2"] = lambda2 ? json(*lambda2) : json(nullptr);
  return j;
}

PipelineConfig PipelineConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  PipelineConfig c;
  c.base_dir = base_dir;
  try {
    reject_unknown(j,
                   {"manifest_path", "dataset_path", "cache_dir", "output_dir", "agreement_path",
                    "generation", "judge", "alpha", "n", "calibration_size", "lambda2_fractions",
                    "lambda2_selection", "lambda2", "evaluate_lambda2", "report_rule",
                    "formula_variant", "seed", "offline", "emit_filtered"},
                   "config");
    read_path(j, "manifest_path", c.manifest_path);
    read_path(j, "dataset_path", c.dataset_path);
    read_path(j, "cache_dir", c.cache_dir);
    read_path(j, "output_dir", c.output_dir);
    read_path(j, "agreement_path", c.agreement_path);
    read(j, "alpha", c.alpha);
    read(j, "n", c.n);
    // n_samples follows n unless given explicitly.
    c.generation.n_samples = c.n;
    if (j.contains("generation")) {
      auto g = j.at("generation");
      if (!g.contains("n_samples")) g["n_samples"] = c.n;
      c.generation = generation_from_json(g);
    }
    if (j.contains("judge")) {
      const auto& jj = j.at("judge");
      reject_unknown(jj, {"backend", "endpoint", "model_name", "prompt_version", "max_parallel"},
                     "judge");
      read(jj, "backend", c.judge.backend);
      read(jj, "endpoint", c.judge.endpoint);
      read(jj, "model_name", c.judge.model_name);
      read(jj, "prompt_version", c.judge.prompt_version);
      read(jj, "max_parallel", c.judge.max_parallel);
    }
    read(j, "calibration_size", c.calibration_size);
    read(j, "lambda2_fractions", c.lambda2_fractions);
    if (j.contains("lambda2_selection")) {
      c.lambda2_selection = lambda2_selection_from_string(j.at("lambda2_selection"));
    }
    if (j.contains("lambda2") && !j.at("lambda2").is_null()) c.lambda2 = j.at("lambda2").get<int>();
    read(j, "evaluate_lambda2", c.evaluate_lambda2);
    if (j.contains("report_rule")) c.report_rule = report_rule_from_string(j.at("report_rule"));
    if (j.contains("formula_variant")) {
      c.formula_variant = risk_bound_from_string(j.at("formula_variant"));
    }
    read(j, "seed", c.seed);
    read(j, "offline", c.offline);
    read(j, "emit_filtered", c.emit_filtered);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return PipelineConfig::from_json(j, base);
}

}  // namespace cxrflag
