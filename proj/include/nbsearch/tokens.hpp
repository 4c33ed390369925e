#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace nbsearch {

/// Byte range [begin, end) of one token within its source text.
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// heuristic-v1: a token is a maximal run of ASCII letters, digits and
/// underscores, or any single other non-whitespace code point. ASCII
/// whitespace separates tokens and is never counted.
std::vector<TokenSpan> heuristic_tokens(std::string_view text);

/// Token count under heuristic-v1.
std::size_t count_tokens(std::string_view text);

/// Longest prefix of text that holds at most max_tokens tokens under
/// heuristic-v1, ending right after the last kept token.
std::string truncate_to_tokens(std::string_view text, std::size_t max_tokens);

/// Pluggable token counter. The chunk planner only talks to this interface so
/// a provider-exact tokenizer can replace the heuristic.
class TokenEstimator {
 public:
  virtual ~TokenEstimator() = default;
  virtual std::string_view id() const noexcept = 0;
  virtual std::size_t count(std::string_view text) const = 0;
  virtual std::string truncate(std::string_view text, std::size_t max_tokens) const = 0;
};

inline constexpr std::string_view kHeuristicEstimatorId = "heuristic-v1";

class HeuristicEstimator final : public TokenEstimator {
 public:
  std::string_view id() const noexcept override { return kHeuristicEstimatorId; }
  std::size_t count(std::string_view text) const override { return count_tokens(text); }
  std::string truncate(std::string_view text, std::size_t max_tokens) const override {
    return truncate_to_tokens(text, max_tokens);
  }
};

/// Resolves an estimator id. Throws ConfigError for unknown ids.
std::shared_ptr<const TokenEstimator> estimator_for(std::string_view id);

}  // namespace nbsearch
