#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "nbsearch/embedding.hpp"
#include "nbsearch/http_transport.hpp"

namespace nbsearch {

/// Prefix sent ahead of the code in every summarization request.
inline constexpr std::string_view kSummaryPromptPrefix = "Generate a summary for the following code: \n";

struct RetryPolicy {
  int max_attempts = 3;
  int backoff_base_ms = 500;
};

struct ModelConfig {
  std::string embed_endpoint = "https://api.openai.com/v1/embeddings";
  std::string embed_model = "text-embedding-ada-002";
  std::string completion_endpoint = "https://api.openai.com/v1/chat/completions";
  std::string completion_model = "gpt-4-32k";
  std::size_t completion_max_tokens = 32000;
  // Name of the environment variable holding the API key. Empty: send no
  // Authorization header.
  std::string api_key_env = "OPENAI_API_KEY";
  RetryPolicy retry;
  bool offline_mode = false;
  std::size_t offline_dim = kOfflineEmbeddingDim;
};

using SleepFn = std::function<void(std::chrono::milliseconds)>;

/// Embedding and completion access, either over HTTP or through the
/// deterministic offline implementations. Safe to share across threads.
class ModelGateway {
 public:
  explicit ModelGateway(ModelConfig config, std::shared_ptr<HttpTransport> transport = nullptr,
                        SleepFn sleep = nullptr);

  const ModelConfig& config() const noexcept { return config_; }

  /// Identity recorded alongside stored vectors.
  std::string embedding_model_id() const;

  /// One unit-norm vector per text, order preserved. Throws EmptyInput,
  /// ProviderError, DimensionDrift.
  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) const;

  /// Summary of code. Offline: "summary:" followed by the first 32 def/class
  /// names. Throws OverCompletionBudget, ProviderError.
  std::string summarize_code(std::string_view code) const;

  /// The exact prompt sent for code.
  static std::string summary_prompt(std::string_view code);

 private:
  HttpResponse post_with_retry(const std::string& url, const std::string& body) const;
  HttpHeaders request_headers() const;

  ModelConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  SleepFn sleep_;
};

/// Offline extractive summary used when no completion provider is configured.
std::string offline_summary(std::string_view code);

}  // namespace nbsearch
