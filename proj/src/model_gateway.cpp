#include "nbsearch/model_gateway.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <json.hpp>
#include <stdexcept>
#include <thread>

#include "nbsearch/code_units.hpp"
#include "nbsearch/errors.hpp"
#include "nbsearch/tokens.hpp"

namespace nbsearch {

using nlohmann::json;

namespace {

constexpr std::size_t kSummaryNameLimit = 32;

bool retryable(int status) { return status == 0 || status == 429 || status >= 500; }

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n\v\f");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\v\f");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace

std::string offline_summary(std::string_view code) {
  std::string out = "summary:";
  for (const auto& name : definition_names(code, kSummaryNameLimit)) {
    out += ' ';
    out += name;
  }
  return out;
}

ModelGateway::ModelGateway(ModelConfig config, std::shared_ptr<HttpTransport> transport, SleepFn sleep)
    : config_(std::move(config)), transport_(std::move(transport)), sleep_(std::move(sleep)) {
  if (config_.completion_max_tokens < 1) throw ConfigError("completion_max_tokens must be at least 1");
  if (config_.retry.max_attempts < 1) throw ConfigError("retry.max_attempts must be at least 1");
  if (!transport_ && !config_.offline_mode) transport_ = make_http_transport();
  if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string ModelGateway::embedding_model_id() const {
  return config_.offline_mode ? offline_model_id(config_.offline_dim) : config_.embed_model;
}

std::string ModelGateway::summary_prompt(std::string_view code) {
  std::string prompt(kSummaryPromptPrefix);
  prompt += code;
  return prompt;
}

HttpHeaders ModelGateway::request_headers() const {
  HttpHeaders headers;
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw ConfigError("environment variable " + config_.api_key_env + " is not set");
    }
    headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }
  return headers;
}

HttpResponse ModelGateway::post_with_retry(const std::string& url, const std::string& body) const {
  const HttpHeaders headers = request_headers();
  HttpResponse last;
  for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
    last = transport_->post_json(url, headers, body);
    if (last.status >= 200 && last.status < 300) return last;
    if (!retryable(last.status)) break;
    if (attempt < config_.retry.max_attempts) {
      sleep_(std::chrono::milliseconds(static_cast<long long>(config_.retry.backoff_base_ms) << (attempt - 1)));
    }
  }
  std::string detail = last.status == 0 ? last.error : last.body.substr(0, 200);
  throw ProviderError("request to " + url + " failed: " + detail, last.status);
}

std::vector<EmbeddingVector> ModelGateway::embed_batch(const std::vector<std::string>& texts) const {
  if (texts.empty()) throw EmptyInput("embed_batch called with no texts");
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  if (config_.offline_mode) {
    for (const auto& t : texts) out.push_back(deterministic_embed(t, config_.offline_dim));
    return out;
  }

  const json request = {{"model", config_.embed_model}, {"input", texts}};
  const HttpResponse res = post_with_retry(config_.embed_endpoint, request.dump());
  json reply;
  try {
    reply = json::parse(res.body);
  } catch (const json::parse_error& e) {
    throw ProviderError(std::string("embedding reply is not JSON: ") + e.what(), res.status);
  }
  if (!reply.contains("data") || !reply["data"].is_array()) {
    throw ProviderError("embedding reply has no data array", res.status);
  }
  auto data = reply["data"];
  if (data.size() != texts.size()) {
    throw ProviderError("embedding reply has " + std::to_string(data.size()) + " items for " +
                            std::to_string(texts.size()) + " inputs",
                        res.status);
  }
  std::vector<const json*> items;
  for (const auto& item : data) items.push_back(&item);
  std::sort(items.begin(), items.end(),
            [](const json* a, const json* b) { return a->value("index", 0) < b->value("index", 0); });
  for (std::size_t i = 0; i < items.size(); ++i) {
    const json& item = *items[i];
    if (item.value("index", -1) != static_cast<int>(i) || !item.contains("embedding") ||
        !item["embedding"].is_array()) {
      throw ProviderError("embedding reply item " + std::to_string(i) + " is malformed", res.status);
    }
    EmbeddingVector v;
    v.model_id = config_.embed_model;
    try {
      v.values = item["embedding"].get<std::vector<double>>();
      normalize_in_place(v.values);
    } catch (const std::exception& e) {
      throw ProviderError(std::string("embedding ") + std::to_string(i) + " unusable: " + e.what(), res.status);
    }
    if (!out.empty() && v.dim() != out.front().dim()) {
      throw DimensionDrift("provider returned dimension " + std::to_string(v.dim()) + " after " +
                           std::to_string(out.front().dim()));
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::string ModelGateway::summarize_code(std::string_view code) const {
  if (count_tokens(code) > config_.completion_max_tokens) {
    throw OverCompletionBudget("code exceeds the completion budget of " +
                               std::to_string(config_.completion_max_tokens) + " tokens");
  }
  if (config_.offline_mode) return offline_summary(code);

  const json request = {
      {"model", config_.completion_model},
      {"messages", json::array({{{"role", "user"}, {"content", summary_prompt(code)}}})},
  };
  const HttpResponse res = post_with_retry(config_.completion_endpoint, request.dump());
  try {
    const json reply = json::parse(res.body);
    return trim(reply.at("choices").at(0).at("message").at("content").get<std::string>());
  } catch (const json::exception& e) {
    throw ProviderError(std::string("completion reply malformed: ") + e.what(), res.status);
  }
}

}  // namespace nbsearch
