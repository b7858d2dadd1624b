// cxrflag command-line entry point.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "cxrflag/config.hpp"
#include "cxrflag/errors.hpp"
#include "cxrflag/pipeline.hpp"

namespace {

using cxrflag::ExitCode;

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || v < 1) {
      throw cxrflag::ConfigError("--lambda2 expects positive integers, got '" + item + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw cxrflag::ConfigError("--lambda2 needs at least one value");
  return out;
}

int code(ExitCode c) { return static_cast<int>(c); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flags likely hallucinated sentences and reports in generated radiology reports"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path = "cxrflag.json";
  std::string fixtures_dir;
  bool offline = false;
  std::optional<double> alpha;
  std::optional<int> n_samples;
  std::string lambda2_text;
  bool emit_filtered = false;
  std::string endpoint;
  std::string output_dir;
  std::string cache_dir;
  bool verbose = false;

  app.add_option("-c,--config", config_path, "Pipeline config file (JSON)");
  app.add_option("--fixtures", fixtures_dir, "Fixture directory; uses <dir>/config.json");
  app.add_flag("--offline", offline, "Replay caches only; never call a service");
  app.add_option("--alpha", alpha, "Risk level for the sentence threshold, in (0, 1)");
  app.add_option("--n", n_samples, "Samples per study (the score range is 0..n)");
  app.add_option("--lambda2", lambda2_text,
                 "Report threshold; `evaluate` and `run-all` accept a list such as 2,3,4");
  app.add_flag("--emit-filtered", emit_filtered,
               "Write each report with its flagged sentences removed");
  app.add_option("--endpoint", endpoint, "Generation service URL (overrides the config)");
  app.add_option("-o,--output", output_dir, "Output directory (overrides the config)");
  app.add_option("--cache-dir", cache_dir,
                 "Generation and judge cache directory (overrides the config)");
  app.add_flag("-v,--verbose", verbose, "Log progress to stderr");

  auto* sample = app.add_subcommand("sample", "Generate a candidate and n samples per study");
  auto* entail = app.add_subcommand("entail", "Score candidate sentences against the samples");
  auto* calibrate = app.add_subcommand("calibrate", "Calibrate the sentence threshold");
  auto* flag = app.add_subcommand("flag", "Flag sentences and reports");
  auto* evaluate = app.add_subcommand("evaluate", "Summarize flags against ground-truth labels");
  auto* run_all = app.add_subcommand("run-all", "entail, calibrate, flag and evaluate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return code(ExitCode::kConfig);
  }

  spdlog::set_pattern("%l: %v");
  spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);

  try {
    if (!fixtures_dir.empty()) config_path = fixtures_dir + "/config.json";
    auto config = cxrflag::load_config(config_path);
    if (offline) config.offline = true;
    if (alpha) config.alpha = *alpha;
    if (n_samples) {
      config.n = *n_samples;
      config.generation.n_samples = *n_samples;
    }
    if (emit_filtered) config.emit_filtered = true;
    if (!endpoint.empty()) config.generation.endpoint = endpoint;
    if (!output_dir.empty()) config.output_dir = std::filesystem::absolute(output_dir);
    if (!cache_dir.empty()) config.cache_dir = std::filesystem::absolute(cache_dir);
    if (!lambda2_text.empty()) {
      const auto values = parse_int_list(lambda2_text);
      if (values.size() > 1 && (flag->parsed() || calibrate->parsed())) {
        throw cxrflag::ConfigError("--lambda2 takes a single value for this command");
      }
      config.lambda2 = values.front();
      config.evaluate_lambda2 = values;
    }
    config.validate();

    if (sample->parsed()) {
      cxrflag::cmd_sample(config);
    } else if (entail->parsed()) {
      cxrflag::cmd_entail(config);
    } else if (calibrate->parsed()) {
      const auto t = cxrflag::cmd_calibrate(config);
      std::cout << "lambda1 = " << t.lambda1 << "\n";
    } else if (flag->parsed()) {
      cxrflag::cmd_flag(config);
    } else if (evaluate->parsed()) {
      cxrflag::cmd_evaluate(config);
      std::ifstream in(config.resolve(config.output_dir) / cxrflag::kSummaryTextFile);
      std::cout << in.rdbuf();
    } else if (run_all->parsed()) {
      cxrflag::cmd_run_all(config);
      std::ifstream in(config.resolve(config.output_dir) / cxrflag::kSummaryTextFile);
      std::cout << in.rdbuf();
    }
  } catch (const cxrflag::ConfigError& e) {
    std::cerr << "cxrflag: config error: " << e.what() << "\n";
    return code(ExitCode::kConfig);
  } catch (const cxrflag::DataError& e) {
    std::cerr << "cxrflag: data error: " << e.what() << "\n";
    return code(ExitCode::kData);
  } catch (const cxrflag::BackendError& e) {
    std::cerr << "cxrflag: backend error: " << e.what() << "\n";
    return code(ExitCode::kBackend);
  } catch (const cxrflag::CalibrationError& e) {
    std::cerr << "cxrflag: calibration error: " << e.what() << "\n";
    return code(ExitCode::kCalibration);
  } catch (const std::exception& e) {
    std::cerr << "cxrflag: error: " << e.what() << "\n";
    return code(ExitCode::kInternal);
  }
  return code(ExitCode::kOk);
}
