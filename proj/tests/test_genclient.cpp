#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <gtest/gtest.h>

#include <atomic>
#include <map>
#include <mutex>
#include <thread>

#include "cxrflag/errors.hpp"
#include "cxrflag/genclient.hpp"
#include "cxrflag/http.hpp"
#include "test_util.hpp"

namespace cxrflag {
namespace {

using nlohmann::json;
using namespace std::chrono_literals;

// Fake generation service: text derived from the request, with optional
// scripted failures per (temperature, seed).
class FakeService : public JsonPoster {
 public:
  json post(const json& body) override {
    std::lock_guard lock(mu_);
    ++calls;
    const auto seed = body.value("seed", -1);
    const double t = body.at("temperature").get<double>();
    if (t > 0.5 && fail_seeds.count(seed)) {
      if (transport_down) throw TransportFailure("connection refused");
      throw ServiceFailure("HTTP 503");
    }
    json reply = {{"text", "Report for " + body.at("image_ref").get<std::string>() +
                               " at t=" + json(t).dump() + " seed " + std::to_string(seed) + "."}};
    if (t < 0.5) reply["token_logprobs"] = {{0.9, 0.8}};
    return reply;
  }
  std::map<std::int64_t, bool> fail_seeds;
  bool transport_down = false;
  int calls = 0;

 private:
  std::mutex mu_;
};

GenerationConfig fast_config() {
  GenerationConfig c;
  c.retry_backoff = 0ms;
  c.seed = 100;
  return c;
}

TEST(GenerateStudy, CandidateAndTenSamples) {
  testing::TempDir dir("gen");
  auto fake = std::make_shared<FakeService>();
  GenerationService svc(dir.path(), "fake://gen", fake, 2, 0ms);
  const auto s = generate_study({"s1", "img-1", 0.0, std::nullopt}, fast_config(), svc);
  EXPECT_EQ(s.samples.size(), 10u);
  EXPECT_EQ(s.candidate.temperature, 0.1);
  EXPECT_EQ(s.candidate.token_probs, (TokenProbabilities{{0.9, 0.8}}));
  EXPECT_EQ(s.samples[7].text, "Report for img-1 at t=1.0 seed 107.");
  EXPECT_EQ(fake->calls, 11);
}

TEST(GenerateStudy, WarmCacheMakesNoCalls) {
  testing::TempDir dir("gen");
  auto fake = std::make_shared<FakeService>();
  Study first;
  {
    GenerationService svc(dir.path(), "fake://gen", fake, 2, 0ms);
    first = generate_study({"s1", "img-1", 0.0, std::nullopt}, fast_config(), svc);
  }
  GenerationService again(dir.path(), "fake://gen", fake, 2, 0ms);
  EXPECT_EQ(generate_study({"s1", "img-1", 0.0, std::nullopt}, fast_config(), again), first);
  EXPECT_EQ(again.network_calls(), 0u);
  const auto replay = replay_only(dir.path(), "fake://gen");
  EXPECT_EQ(generate_study({"s1", "img-1", 0.0, std::nullopt}, fast_config(), *replay), first);
}

TEST(GenerateStudy, FailedSampleKeptEmpty) {
  testing::TempDir dir("gen");
  auto fake = std::make_shared<FakeService>();
  fake->fail_seeds[104] = true;
  GenerationService svc(dir.path(), "fake://gen", fake, 2, 0ms);
  const auto s = generate_study({"s1", "img-1", 0.0, std::nullopt}, fast_config(), svc);
  EXPECT_TRUE(s.samples[4].failed());
  EXPECT_EQ(s.effective_n(), 9);
  EXPECT_EQ(fake->calls, 10 + 3);  // one failing sample tried 1 + 2 times
  // The failure is cached, so replay reproduces it.
  const auto replay = replay_only(dir.path(), "fake://gen");
  EXPECT_EQ(generate_study({"s1", "img-1", 0.0, std::nullopt}, fast_config(), *replay), s);
}

TEST(GenerateStudy, TransportFailureIsBackendError) {
  testing::TempDir dir("gen");
  auto fake = std::make_shared<FakeService>();
  fake->fail_seeds[102] = true;
  fake->transport_down = true;
  GenerationService svc(dir.path(), "fake://gen", fake, 1, 0ms);
  EXPECT_THROW(generate_study({"s1", "img-1", 0.0, std::nullopt}, fast_config(), svc),
               BackendError);
}

TEST(Replay, MissNamesSampleIndex) {
  testing::TempDir dir("gen");
  auto fake = std::make_shared<FakeService>();
  {
    GenerationService svc(dir.path(), "fake://gen", fake, 2, 0ms);
    generate_study({"s1", "img-1", 0.0, std::nullopt}, fast_config(), svc);
  }
  const auto replay = replay_only(dir.path(), "fake://gen");
  GenerationKey key{"fake://gen", "img-1", 1.0, 7, 107};
  std::filesystem::remove(ContentStore(dir.path()).path_for(key.digest()));
  try {
    generate_study({"s1", "img-1", 0.0, std::nullopt}, fast_config(), *replay);
    FAIL();
  } catch (const CacheMissError& e) {
    EXPECT_NE(std::string(e.what()).find("sample_index 7"), std::string::npos) << e.what();
  }
  EXPECT_THROW(replay_only(dir / "absent", "fake://gen"), ConfigError);
}

TEST(GenerationConfig, Validation) {
  GenerationConfig c;
  c.high_temperature = 0.05;
  EXPECT_THROW(c.validate(), ConfigError);
  c = GenerationConfig{};
  c.n_samples = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ContentStore, PutGet) {
  testing::TempDir dir("store");
  ContentStore store(dir.path());
  const auto key = sha256_hex("abc");
  EXPECT_EQ(key, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_FALSE(store.get(key).has_value());
  store.put(key, {{"x", 1}});
  EXPECT_TRUE(store.contains(key));
  EXPECT_EQ(store.get(key)->at("x"), 1);
  EXPECT_EQ(store.path_for(key).parent_path().filename(), "ba");
}

// End to end over a real socket.
class LocalServer {
 public:
  LocalServer() {
    server_.Post("/generate", [this](const httplib::Request& req, httplib::Response& res) {
      const auto body = json::parse(req.body);
      last_auth = req.get_header_value("Authorization");
      if (++hits_ == 1) {
        res.status = 500;
        res.set_content(R"({"error": "warming up"})", "application/json");
        return;
      }
      res.set_content(json{{"text", "Echo " + body.at("image_ref").get<std::string>() + "."}}.dump(),
                      "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/generate"; }
  std::string last_auth;

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> hits_{0};
};

TEST(HttpJsonPoster, RetriesThroughRealServer) {
  LocalServer server;
  testing::TempDir dir("http");
  auto poster = std::make_shared<HttpJsonPoster>(
      server.url(), std::map<std::string, std::string>{{"Authorization", "Bearer k"}}, 5s);
  GenerationService svc(dir.path(), server.url(), poster, 2, 0ms);
  const auto r = svc.generate({"s1", "img-9", 0.1, std::nullopt}, 0);
  EXPECT_EQ(r.text, "Echo img-9.");
  EXPECT_FALSE(r.failed);
  EXPECT_EQ(svc.network_calls(), 2u);
  EXPECT_EQ(server.last_auth, "Bearer k");
}

TEST(HttpJsonPoster, UnreachableIsTransportFailure) {
  HttpJsonPoster poster("http://127.0.0.1:1/x", {}, 2s);
  EXPECT_THROW(poster.post({{"a", 1}}), TransportFailure);
  EXPECT_THROW(HttpJsonPoster("localhost/x"), ConfigError);
}

}  // namespace
}  // namespace cxrflag
