#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "cxrflag/http.hpp"

#include "cxrflag/errors.hpp"

namespace cxrflag {

HttpJsonPoster::HttpJsonPoster(std::string url, std::map<std::string, std::string> headers,
                               std::chrono::seconds timeout)
    : headers_(std::move(headers)), timeout_(timeout) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint URL lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    origin_ = url;
    path_ = "/";
  } else {
    origin_ = url.substr(0, path_start);
    path_ = url.substr(path_start);
  }
}

nlohmann::json HttpJsonPoster::post(const nlohmann::json& body) {
  httplib::Client client(origin_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  httplib::Headers headers;
  for (const auto& [k, v] : headers_) headers.emplace(k, v);
  auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res) {
    throw TransportFailure("POST " + origin_ + path_ + ": " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw ServiceFailure("POST " + origin_ + path_ + " returned HTTP " +
                         std::to_string(res->status) + ": " + res->body.substr(0, 200));
  }
  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw ServiceFailure("POST " + origin_ + path_ + " returned invalid JSON: " + e.what());
  }
  if (reply.is_object() && reply.contains("error") && !reply.at("error").is_null()) {
    throw ServiceFailure("service reported error: " + reply.at("error").dump());
  }
  return reply;
}

}  // namespace cxrflag
