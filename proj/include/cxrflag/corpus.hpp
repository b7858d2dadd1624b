#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace cxrflag {

enum class ReportKind { kCandidate, kSample, kGroundTruth };

// Realized probability of each generated token, grouped by sentence.
using TokenProbabilities = std::vector<std::vector<double>>;
// Next-token distribution slice for each token position, grouped by sentence.
using TokenDistributions = std::vector<std::vector<std::vector<double>>>;

struct Report {
  std::string study_id;
  std::string text;
  double temperature = 0.0;
  ReportKind kind = ReportKind::kCandidate;
  std::optional<TokenProbabilities> token_probs;
  std::optional<TokenDistributions> token_distributions;

  // A sample with empty text is a failed generation.
  bool failed() const { return text.empty(); }

  bool operator==(const Report&) const = default;
};

struct Study {
  std::string study_id;
  // Service-side identifier of the imaging exam; defaults to study_id.
  std::string image_ref;
  Report candidate;
  std::vector<Report> samples;
  std::optional<Report> ground_truth;
  std::map<std::string, double> external_metrics;

  // Number of non-failed samples.
  int effective_n() const;
  // Samples with non-empty text, in dataset order.
  std::vector<Report> usable_samples() const;

  bool operator==(const Study&) const = default;
};

enum class Category {
  kDevices,
  kCardiomediastinal,
  kLungs,
  kMusculoskeletal,
  kPleural,
  kOther,
};

inline constexpr Category kAllCategories[] = {
    Category::kDevices,         Category::kCardiomediastinal, Category::kLungs,
    Category::kMusculoskeletal, Category::kPleural,           Category::kOther,
};

std::string_view to_string(Category category);
std::optional<Category> category_from_string(std::string_view name);

struct SentenceRef {
  std::string study_id;
  int index = 0;

  auto operator<=>(const SentenceRef&) const = default;
  bool operator==(const SentenceRef&) const = default;
};

struct Sentence {
  std::string study_id;
  int index = 0;
  std::string text;
  std::optional<int> score;
  std::optional<Category> category;
  std::optional<bool> flagged;

  SentenceRef ref() const { return {study_id, index}; }
};

// Dataset records -------------------------------------------------------

enum class RecordMode {
  // Full dataset record: candidate and samples required.
  kDataset,
  // Sampling manifest: only study_id (and optional image_ref, ground truth,
  // metrics) required.
  kManifest,
};

Study study_from_json(const nlohmann::json& record, RecordMode mode = RecordMode::kDataset);
nlohmann::json study_to_json(const Study& study);

// Reads a line-delimited dataset. Every study must carry exactly expected_n
// samples (failed samples included). Result is sorted by study_id.
std::vector<Study> load_dataset(const std::filesystem::path& path, int expected_n);

// Reads a sampling manifest (see RecordMode::kManifest), sorted by study_id.
std::vector<Study> load_manifest(const std::filesystem::path& path);

void write_dataset(const std::filesystem::path& path, const std::vector<Study>& studies);

struct DatasetSplit {
  std::vector<Study> calibration;
  std::vector<Study> test;
};

// Seeded permutation split. Both halves are returned sorted by study_id.
DatasetSplit split_dataset(std::vector<Study> studies, int calibration_count,
                           std::uint64_t seed);

// Indices (into the study_id-sorted input) that land in the calibration half.
std::vector<std::size_t> calibration_indices(std::size_t count, int calibration_count,
                                             std::uint64_t seed);

}  // namespace cxrflag
