#include "cxrflag/genclient.hpp"

#include <spdlog/spdlog.h>

#include <thread>

#include "cxrflag/errors.hpp"
#include "cxrflag/parallel.hpp"

namespace cxrflag {

using nlohmann::json;

void GenerationConfig::validate() const {
  if (low_temperature < 0.0) throw ConfigError("low_temperature must be >= 0");
  if (!(high_temperature > low_temperature)) {
    throw ConfigError("high_temperature must exceed low_temperature");
  }
  if (n_samples <= 0) throw ConfigError("n_samples must be positive");
  if (max_parallel <= 0) throw ConfigError("max_parallel must be positive");
  if (retry_limit < 0) throw ConfigError("retry_limit must be non-negative");
}

json GenerationKey::to_json() const {
  json j = json::object();
  j["endpoint"] = endpoint;
  j["image_ref"] = image_ref;
  j["temperature"] = temperature;
  j["sample_index"] = sample_index;
  j["seed"] = seed ? json(*seed) : json(nullptr);
  return j;
}

std::string GenerationKey::digest() const { return sha256_hex(to_json().dump()); }

std::string GenerationKey::describe() const {
  return "image_ref=" + image_ref + " temperature=" + json(temperature).dump() +
         " sample_index=" + std::to_string(sample_index) +
         " seed=" + (seed ? std::to_string(*seed) : std::string("none")) +
         " endpoint=" + endpoint;
}

GenerationService::GenerationService(std::filesystem::path cache_dir, std::string endpoint,
                                     std::shared_ptr<JsonPoster> transport, int retry_limit,
                                     std::chrono::milliseconds retry_backoff)
    : store_(std::move(cache_dir)),
      endpoint_(std::move(endpoint)),
      transport_(std::move(transport)),
      retry_limit_(retry_limit),
      retry_backoff_(retry_backoff) {}

namespace {

GenerationResult result_from_json(const json& j) {
  GenerationResult r;
  r.text = j.value("text", std::string{});
  r.failed = j.value("failed", false);
  if (j.contains("token_logprobs") && !j.at("token_logprobs").is_null()) {
    r.token_probs = j.at("token_logprobs").get<TokenProbabilities>();
  }
  return r;
}

json result_to_json(const GenerationResult& r, const GenerationKey& key) {
  json j = json::object();
  j["key"] = key.to_json();
  j["text"] = r.text;
  j["failed"] = r.failed;
  if (r.token_probs) j["token_logprobs"] = *r.token_probs;
  return j;
}

}  // namespace

GenerationResult GenerationService::call_with_retries(const GenerationRequest& request,
                                                      const GenerationKey& key) {
  json body = json::object();
  body["image_ref"] = request.image_ref;
  body["temperature"] = request.temperature;
  if (request.seed) body["seed"] = *request.seed;

  std::string last_error;
  bool transport_broken = false;
  for (int attempt = 0; attempt <= retry_limit_; ++attempt) {
    if (attempt > 0) {
      spdlog::info("retrying generation ({}) attempt {}", key.describe(), attempt);
      std::this_thread::sleep_for(retry_backoff_ * attempt);
    }
    network_calls_.fetch_add(1);
    try {
      json reply = transport_->post(body);
      if (!reply.is_object() || !reply.contains("text") || !reply.at("text").is_string()) {
        throw ServiceFailure("response lacks a string 'text' member");
      }
      GenerationResult r;
      r.text = reply.at("text").get<std::string>();
      if (reply.contains("token_logprobs") && !reply.at("token_logprobs").is_null()) {
        r.token_probs = reply.at("token_logprobs").get<TokenProbabilities>();
      }
      return r;
    } catch (const TransportFailure& e) {
      transport_broken = true;
      last_error = e.what();
    } catch (const ServiceFailure& e) {
      transport_broken = false;
      last_error = e.what();
    } catch (const json::exception& e) {
      transport_broken = false;
      last_error = std::string("malformed response: ") + e.what();
    }
  }
  if (transport_broken) {
    throw BackendError("generation failed after " + std::to_string(retry_limit_) +
                       " retries (" + key.describe() + "): " + last_error);
  }
  spdlog::warn("generation service failed for {}: {}", key.describe(), last_error);
  GenerationResult failed;
  failed.failed = true;
  return failed;
}

GenerationResult GenerationService::generate(const GenerationRequest& request, int sample_index) {
  if (request.temperature < 0.0) throw ConfigError("negative temperature");
  GenerationKey key{endpoint_, request.image_ref, request.temperature, sample_index, request.seed};
  const auto digest = key.digest();
  if (auto cached = store_.get(digest)) return result_from_json(*cached);
  if (!transport_) {
    throw CacheMissError("generation cache miss for sample_index " +
                         std::to_string(sample_index) + " (" + key.describe() + ")");
  }
  GenerationResult r = call_with_retries(request, key);
  store_.put(digest, result_to_json(r, key));
  return r;
}

std::shared_ptr<GenerationService> replay_only(const std::filesystem::path& cache_path,
                                               const std::string& endpoint) {
  if (!std::filesystem::is_directory(cache_path)) {
    throw ConfigError("generation cache " + cache_path.string() + " does not exist");
  }
  return std::make_shared<GenerationService>(cache_path, endpoint, nullptr, 0);
}

Study generate_study(const GenerationRequest& request_base, const GenerationConfig& config,
                     GenerationService& service) {
  config.validate();
  const int total = config.n_samples + 1;
  std::vector<GenerationResult> results(static_cast<std::size_t>(total));
  auto seed_for = [&](int index) -> std::optional<std::int64_t> {
    if (request_base.seed) return *request_base.seed + index;
    if (config.seed) return *config.seed + index;
    return std::nullopt;
  };
  bounded_parallel_for(static_cast<std::size_t>(total), config.max_parallel, [&](std::size_t i) {
    GenerationRequest req = request_base;
    const bool candidate = i == 0;
    const int index = candidate ? 0 : static_cast<int>(i) - 1;
    req.temperature = candidate ? config.low_temperature : config.high_temperature;
    req.seed = seed_for(index);
    results[i] = service.generate(req, index);
  });

  Study study;
  study.study_id = request_base.study_id;
  study.image_ref = request_base.image_ref.empty() ? request_base.study_id : request_base.image_ref;
  if (results[0].failed || results[0].text.empty()) {
    throw BackendError("candidate generation failed for study " + study.study_id);
  }
  study.candidate.study_id = study.study_id;
  study.candidate.kind = ReportKind::kCandidate;
  study.candidate.text = results[0].text;
  study.candidate.temperature = config.low_temperature;
  study.candidate.token_probs = results[0].token_probs;
  for (int i = 1; i < total; ++i) {
    Report r;
    r.study_id = study.study_id;
    r.kind = ReportKind::kSample;
    r.temperature = config.high_temperature;
    r.text = results[static_cast<std::size_t>(i)].text;
    if (r.text.empty()) {
      spdlog::warn("study {}: sample {} is empty and will be excluded from scoring",
                   study.study_id, i - 1);
    }
    study.samples.push_back(std::move(r));
  }
  return study;
}

}  // namespace cxrflag
