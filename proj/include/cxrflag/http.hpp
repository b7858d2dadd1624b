#pragma once

#include <chrono>
#include <map>
#include <string>

#include "json.hpp"

namespace cxrflag {

// Thrown by a JsonPoster when no HTTP response was obtained.
struct TransportFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when the service answered but reported an error (non-2xx status or
// an "error" member in the body).
struct ServiceFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One JSON-in, JSON-out request/response exchange.
class JsonPoster {
 public:
  virtual ~JsonPoster() = default;
  virtual nlohmann::json post(const nlohmann::json& body) = 0;
};

// POSTs to an http:// (or https:// when built with OpenSSL support) URL.
class HttpJsonPoster : public JsonPoster {
 public:
  explicit HttpJsonPoster(std::string url,
                          std::map<std::string, std::string> headers = {},
                          std::chrono::seconds timeout = std::chrono::seconds(120));
  nlohmann::json post(const nlohmann::json& body) override;

 private:
  std::string origin_;
  std::string path_;
  std::map<std::string, std::string> headers_;
  std::chrono::seconds timeout_;
};

}  // namespace cxrflag
