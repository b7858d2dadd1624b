#include <gtest/gtest.h>

#include "cxrflag/config.hpp"
#include "cxrflag/errors.hpp"
#include "test_util.hpp"

namespace cxrflag {
namespace {

using nlohmann::json;

TEST(Config, DefaultsRoundTrip) {
  PipelineConfig c;
  const auto j = c.to_json();
  EXPECT_EQ(PipelineConfig::from_json(j), c);
  EXPECT_EQ(j.at("alpha"), 0.05);
  EXPECT_EQ(j.at("n"), 10);
  EXPECT_EQ(j.at("lambda2_fractions"), json({0.05, 0.10, 0.25}));
}

TEST(Config, ModifiedRoundTrip) {
  PipelineConfig c;
  c.alpha = 0.02;
  c.n = 5;
  c.generation.n_samples = 5;
  c.generation.endpoint = "http://localhost:9/generate";
  c.generation.seed = 40;
  c.judge.backend = "llm";
  c.judge.model_name = "judge-model";
  c.lambda2 = 3;
  c.evaluate_lambda2 = {2, 3, 4};
  c.report_rule = ReportRule::kMoreThan;
  c.formula_variant = RiskBound::kScaledInfimum;
  c.lambda2_selection = Lambda2Selection::kNearest;
  c.seed = 17;
  c.offline = true;
  const auto back = PipelineConfig::from_json(json::parse(c.to_json().dump()));
  EXPECT_EQ(back, c);
}

TEST(Config, NSamplesFollowsN) {
  const auto c = PipelineConfig::from_json({{"n", 6}});
  EXPECT_EQ(c.generation.n_samples, 6);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, Rejections) {
  EXPECT_THROW(PipelineConfig::from_json({{"alhpa", 0.1}}), ConfigError);
  EXPECT_THROW(PipelineConfig::from_json({{"judge", {{"backnd", "x"}}}}), ConfigError);
  EXPECT_THROW(PipelineConfig::from_json({{"alpha", "high"}}), ConfigError);
  EXPECT_THROW(PipelineConfig::from_json({{"alpha", 1.5}}).validate(), ConfigError);
  EXPECT_THROW(PipelineConfig::from_json({{"lambda2_fractions", {0.0}}}).validate(), ConfigError);
  EXPECT_THROW(PipelineConfig::from_json({{"judge", {{"backend", "oracle"}}}}).validate(),
               ConfigError);
  auto c = PipelineConfig::from_json({{"n", 10}});
  c.generation.n_samples = 9;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, PathsResolveAgainstConfigDir) {
  testing::TempDir dir("config");
  testing::write_file(dir / "sub" / "c.json", R"({"dataset_path": "d.jsonl"})");
  const auto c = load_config(dir / "sub" / "c.json");
  EXPECT_EQ(c.resolve(c.dataset_path), dir / "sub" / "d.jsonl");
  EXPECT_EQ(c.resolve("/abs/x"), std::filesystem::path("/abs/x"));
  EXPECT_THROW(load_config(dir / "missing.json"), ConfigError);
}

}  // namespace
}  // namespace cxrflag
