#include "cxrflag/entailment.hpp"
#include "cxrflag/errors.hpp"
#include "cxrflag/http.hpp"

namespace cxrflag {

namespace {

using nlohmann::json;

class LlmBackend : public JudgeBackend {
 public:
  LlmBackend(LlmJudgeConfig config, std::shared_ptr<JsonPoster> transport)
      : config_(std::move(config)), transport_(std::move(transport)) {}

  std::string judge_corpus(const CorpusJudgeRequest& request) override {
    return complete(request.prompt, request.repair_note);
  }

  std::string judge_ground_truth(const GroundTruthJudgeRequest& request) override {
    return complete(request.prompt, request.repair_note);
  }

  std::string name() const override { return "llm:" + config_.model_name; }

 private:
  std::string complete(const std::string& prompt, const std::optional<std::string>& repair) {
    json messages = json::array({{{"role", "user"}, {"content", prompt}}});
    if (repair) messages.push_back({{"role", "user"}, {"content", *repair}});
    json body = {{"model", config_.model_name}, {"temperature", 0}, {"messages", messages}};
    json reply;
    try {
      reply = transport_->post(body);
    } catch (const TransportFailure& e) {
      throw BackendError(std::string("judge transport failure: ") + e.what());
    } catch (const ServiceFailure& e) {
      throw BackendError(std::string("judge service failure: ") + e.what());
    }
    try {
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
      throw JudgeResponseError("chat completion lacks choices[0].message.content", reply.dump());
    }
  }

  LlmJudgeConfig config_;
  std::shared_ptr<JsonPoster> transport_;
};

}  // namespace

std::shared_ptr<JudgeBackend> llm_backend(const LlmJudgeConfig& config,
                                          std::shared_ptr<JsonPoster> transport) {
  if (!transport) {
    if (config.endpoint.empty()) throw ConfigError("judge.endpoint is required for the llm backend");
    std::map<std::string, std::string> headers;
    if (!config.api_key.empty()) headers["Authorization"] = "Bearer " + config.api_key;
    transport = std::make_shared<HttpJsonPoster>(config.endpoint, std::move(headers));
  }
  return std::make_shared<LlmBackend>(config, std::move(transport));
}

}  // namespace cxrflag
