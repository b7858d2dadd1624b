#include "cxrflag/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "cxrflag/errors.hpp"

namespace cxrflag {

using nlohmann::json;

int Study::effective_n() const {
  return static_cast<int>(std::count_if(samples.begin(), samples.end(),
                                        [](const Report& r) { return !r.failed(); }));
}

std::vector<Report> Study::usable_samples() const {
  std::vector<Report> out;
  for (const auto& s : samples) {
    if (!s.failed()) out.push_back(s);
  }
  return out;
}

std::string_view to_string(Category category) {
  switch (category) {
    case Category::kDevices: return "Devices";
    case Category::kCardiomediastinal: return "Cardiomediastinal";
    case Category::kLungs: return "Lungs";
    case Category::kMusculoskeletal: return "Musculoskeletal";
    case Category::kPleural: return "Pleural";
    case Category::kOther: return "Other";
  }
  return "Other";
}

std::optional<Category> category_from_string(std::string_view name) {
  for (Category c : kAllCategories) {
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

namespace {

TokenProbabilities parse_token_probs(const json& j) {
  TokenProbabilities out;
  if (!j.is_array()) throw DataError("token_logprobs must be an array of arrays");
  for (const auto& sentence : j) {
    if (!sentence.is_array()) throw DataError("token_logprobs must be an array of arrays");
    std::vector<double> probs;
    for (const auto& p : sentence) {
      if (!p.is_number()) throw DataError("token_logprobs entries must be numbers");
      double v = p.get<double>();
      if (!(v > 0.0 && v <= 1.0)) {
        throw DataError("token probability " + p.dump() + " outside (0, 1]");
      }
      probs.push_back(v);
    }
    out.push_back(std::move(probs));
  }
  return out;
}

TokenDistributions parse_token_distributions(const json& j) {
  TokenDistributions out;
  if (!j.is_array()) throw DataError("token_distributions must be nested arrays");
  for (const auto& sentence : j) {
    std::vector<std::vector<double>> positions;
    for (const auto& position : sentence) {
      std::vector<double> dist;
      for (const auto& p : position) {
        double v = p.get<double>();
        if (!(v >= 0.0 && v <= 1.0)) {
          throw DataError("distribution probability " + p.dump() + " outside [0, 1]");
        }
        dist.push_back(v);
      }
      positions.push_back(std::move(dist));
    }
    out.push_back(std::move(positions));
  }
  return out;
}

Report parse_report(const json& j, const std::string& study_id, ReportKind kind) {
  if (!j.is_object()) throw DataError("report must be an object");
  Report r;
  r.study_id = study_id;
  r.kind = kind;
  r.text = j.value("text", std::string{});
  r.temperature = j.value("temperature", 0.0);
  if (r.temperature < 0.0) throw DataError("negative temperature");
  if (j.contains("token_logprobs")) r.token_probs = parse_token_probs(j.at("token_logprobs"));
  if (j.contains("token_distributions")) {
    r.token_distributions = parse_token_distributions(j.at("token_distributions"));
  }
  return r;
}

json report_to_json(const Report& r, bool with_temperature) {
  json j = json::object();
  j["text"] = r.text;
  if (with_temperature) j["temperature"] = r.temperature;
  return j;
}

}  // namespace

Study study_from_json(const json& record, RecordMode mode) {
  if (!record.is_object()) throw DataError("record is not a JSON object");
  if (!record.contains("study_id") || !record.at("study_id").is_string()) {
    throw DataError("record lacks a string study_id");
  }
  Study s;
  s.study_id = record.at("study_id").get<std::string>();
  if (s.study_id.empty()) throw DataError("empty study_id");
  s.image_ref = record.value("image_ref", s.study_id);

  if (record.contains("candidate")) {
    s.candidate = parse_report(record.at("candidate"), s.study_id, ReportKind::kCandidate);
  } else if (mode == RecordMode::kDataset) {
    throw DataError("study " + s.study_id + " has no candidate report");
  }
  s.candidate.study_id = s.study_id;
  s.candidate.kind = ReportKind::kCandidate;
  if (mode == RecordMode::kDataset && s.candidate.text.empty()) {
    throw DataError("study " + s.study_id + " has an empty candidate report");
  }
  // Top-level token data belongs to the candidate.
  if (record.contains("token_logprobs")) {
    s.candidate.token_probs = parse_token_probs(record.at("token_logprobs"));
  }
  if (record.contains("token_distributions")) {
    s.candidate.token_distributions =
        parse_token_distributions(record.at("token_distributions"));
  }

  if (record.contains("samples")) {
    const auto& samples = record.at("samples");
    if (!samples.is_array()) throw DataError("samples must be an array");
    for (const auto& sj : samples) {
      s.samples.push_back(parse_report(sj, s.study_id, ReportKind::kSample));
    }
  } else if (mode == RecordMode::kDataset) {
    throw DataError("study " + s.study_id + " has no samples");
  }

  if (record.contains("ground_truth") && !record.at("ground_truth").is_null()) {
    Report gt = parse_report(record.at("ground_truth"), s.study_id, ReportKind::kGroundTruth);
    if (gt.text.empty()) throw DataError("study " + s.study_id + " has an empty ground truth");
    s.ground_truth = std::move(gt);
  }
  if (record.contains("external_metrics")) {
    const auto& m = record.at("external_metrics");
    if (!m.is_object()) throw DataError("external_metrics must be an object");
    for (const auto& [name, value] : m.items()) {
      if (!value.is_number()) throw DataError("external metric " + name + " is not a number");
      s.external_metrics[name] = value.get<double>();
    }
  }
  return s;
}

json study_to_json(const Study& s) {
  json j = json::object();
  j["study_id"] = s.study_id;
  if (s.image_ref != s.study_id) j["image_ref"] = s.image_ref;
  j["candidate"] = report_to_json(s.candidate, true);
  json samples = json::array();
  for (const auto& r : s.samples) samples.push_back(report_to_json(r, true));
  j["samples"] = std::move(samples);
  if (s.ground_truth) j["ground_truth"] = report_to_json(*s.ground_truth, false);
  if (!s.external_metrics.empty()) j["external_metrics"] = s.external_metrics;
  if (s.candidate.token_probs) j["token_logprobs"] = *s.candidate.token_probs;
  if (s.candidate.token_distributions) {
    j["token_distributions"] = *s.candidate.token_distributions;
  }
  return j;
}

namespace {

std::vector<Study> read_records(const std::filesystem::path& path, RecordMode mode) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string());
  std::vector<Study> studies;
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Study s;
    try {
      s = study_from_json(json::parse(line), mode);
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": malformed record: " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert(s.study_id).second) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": duplicate study_id " + s.study_id);
    }
    studies.push_back(std::move(s));
  }
  std::sort(studies.begin(), studies.end(),
            [](const Study& a, const Study& b) { return a.study_id < b.study_id; });
  return studies;
}

}  // namespace

std::vector<Study> load_dataset(const std::filesystem::path& path, int expected_n) {
  if (expected_n <= 0) throw ConfigError("expected sample count must be positive");
  auto studies = read_records(path, RecordMode::kDataset);
  for (const auto& s : studies) {
    if (static_cast<int>(s.samples.size()) != expected_n) {
      throw DataError("study " + s.study_id + " has " + std::to_string(s.samples.size()) +
                      " samples, expected " + std::to_string(expected_n));
    }
  }
  return studies;
}

std::vector<Study> load_manifest(const std::filesystem::path& path) {
  return read_records(path, RecordMode::kManifest);
}

void write_dataset(const std::filesystem::path& path, const std::vector<Study>& studies) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset " + path.string());
  for (const auto& s : studies) out << study_to_json(s).dump() << '\n';
}

namespace {

// Unbiased integer in [0, bound) from a 64-bit engine. std distributions are
// implementation-defined, which would make splits differ across toolchains.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

}  // namespace

std::vector<std::size_t> calibration_indices(std::size_t count, int calibration_count,
                                             std::uint64_t seed) {
  if (calibration_count <= 0 || static_cast<std::size_t>(calibration_count) >= count) {
    throw ConfigError("calibration_count " + std::to_string(calibration_count) +
                      " must lie in [1, " + std::to_string(count) + ")");
  }
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = count - 1; i > 0; --i) {
    std::swap(order[i], order[bounded(rng, i + 1)]);
  }
  order.resize(static_cast<std::size_t>(calibration_count));
  std::sort(order.begin(), order.end());
  return order;
}

DatasetSplit split_dataset(std::vector<Study> studies, int calibration_count,
                           std::uint64_t seed) {
  std::sort(studies.begin(), studies.end(),
            [](const Study& a, const Study& b) { return a.study_id < b.study_id; });
  const auto picked = calibration_indices(studies.size(), calibration_count, seed);
  std::vector<bool> in_cal(studies.size(), false);
  for (auto i : picked) in_cal[i] = true;
  DatasetSplit split;
  for (std::size_t i = 0; i < studies.size(); ++i) {
    (in_cal[i] ? split.calibration : split.test).push_back(std::move(studies[i]));
  }
  return split;
}

}  // namespace cxrflag
