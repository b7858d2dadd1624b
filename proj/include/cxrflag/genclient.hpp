#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "cxrflag/content_store.hpp"
#include "cxrflag/corpus.hpp"
#include "cxrflag/http.hpp"

namespace cxrflag {

struct GenerationRequest {
  std::string study_id;
  std::string image_ref;
  double temperature = 0.0;
  std::optional<std::int64_t> seed;
};

struct GenerationConfig {
  double low_temperature = 0.1;
  double high_temperature = 1.0;
  int n_samples = 10;
  std::string endpoint;
  int max_parallel = 4;
  int retry_limit = 2;
  std::chrono::milliseconds retry_backoff{200};
  // Base seed; sample i is requested with seed + i when set.
  std::optional<std::int64_t> seed;

  void validate() const;
  bool operator==(const GenerationConfig&) const = default;
};

struct GenerationResult {
  std::string text;
  std::optional<TokenProbabilities> token_probs;
  // Service kept failing after retries; text is empty.
  bool failed = false;
};

// Identifies one generation in the cache.
struct GenerationKey {
  std::string endpoint;
  std::string image_ref;
  double temperature = 0.0;
  int sample_index = 0;
  std::optional<std::int64_t> seed;

  nlohmann::json to_json() const;
  std::string digest() const;
  std::string describe() const;
};

// Handle to the generation service. Every response is persisted in a
// content-addressed cache; a handle without a transport replays the cache
// only. Safe to share across threads.
class GenerationService {
 public:
  GenerationService(std::filesystem::path cache_dir, std::string endpoint,
                    std::shared_ptr<JsonPoster> transport, int retry_limit = 2,
                    std::chrono::milliseconds retry_backoff = std::chrono::milliseconds(200));

  GenerationResult generate(const GenerationRequest& request, int sample_index);

  bool offline() const { return transport_ == nullptr; }
  std::size_t network_calls() const { return network_calls_.load(); }
  const std::string& endpoint() const { return endpoint_; }

 private:
  GenerationResult call_with_retries(const GenerationRequest& request, const GenerationKey& key);

  ContentStore store_;
  std::string endpoint_;
  std::shared_ptr<JsonPoster> transport_;
  int retry_limit_;
  std::chrono::milliseconds retry_backoff_;
  std::atomic<std::size_t> network_calls_{0};
};

// Cache-only handle; a missing entry raises CacheMissError naming the key.
std::shared_ptr<GenerationService> replay_only(const std::filesystem::path& cache_path,
                                               const std::string& endpoint);

// One candidate at low_temperature plus n_samples at high_temperature.
// Samples the service fails on are kept as empty (failed) reports.
Study generate_study(const GenerationRequest& request_base, const GenerationConfig& config,
                     GenerationService& service);

}  // namespace cxrflag
