#include <chrono>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "taxo/llm.hpp"
#include "taxo/util.hpp"

namespace taxo {

HttpProvider::HttpProvider(std::string base_url, std::string model, std::string api_key)
    : base_url_(std::move(base_url)), model_(std::move(model)), api_key_(std::move(api_key)) {
  if (base_url_.empty()) fail("remote provider: base URL is empty");
  if (model_.empty()) fail("remote provider: model name is empty");
  if (base_url_.rfind("https://", 0) == 0)
    fail("remote provider: this build speaks plain http only; point TAXO_LLM_BASE_URL "
         "at an http endpoint or a local gateway");
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

std::string HttpProvider::raw_complete(const LlmRequest& req, const std::string& prompt) {
  (void)req;
  // Split "http://host:port/prefix" into origin and path prefix.
  std::string origin = base_url_;
  std::string prefix;
  const std::size_t scheme = base_url_.find("://");
  if (scheme != std::string::npos) {
    const std::size_t slash = base_url_.find('/', scheme + 3);
    if (slash != std::string::npos) {
      origin = base_url_.substr(0, slash);
      prefix = base_url_.substr(slash);
    }
  }

  nlohmann::ordered_json body;
  body["model"] = model_;
  body["temperature"] = 0;
  body["messages"] = nlohmann::ordered_json::array(
      {nlohmann::ordered_json{{"role", "user"}, {"content", prompt}}});
  const std::string payload = body.dump();

  std::string last_error;
  for (int attempt = 0; attempt < 3; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(250 << attempt));
    httplib::Client cli(origin);
    cli.set_read_timeout(120, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto res = cli.Post((prefix + "/chat/completions").c_str(), headers, payload,
                        "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "http status " + std::to_string(res->status) + ": " + res->body;
      continue;
    }
    try {
      const nlohmann::json j = nlohmann::json::parse(res->body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      last_error = std::string("unparseable completion body: ") + e.what();
    }
  }
  fail("remote provider failed after 3 attempts: " + last_error);
}

}  // namespace taxo
