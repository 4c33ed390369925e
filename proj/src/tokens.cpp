#include "nbsearch/tokens.hpp"

#include "nbsearch/errors.hpp"

namespace nbsearch {

namespace {

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

bool is_space_byte(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

// Length of the UTF-8 sequence starting at text[i]; malformed input falls
// back to single bytes.
std::size_t code_point_length(std::string_view text, std::size_t i) {
  const auto lead = static_cast<unsigned char>(text[i]);
  std::size_t len = 1;
  if ((lead & 0xE0) == 0xC0) {
    len = 2;
  } else if ((lead & 0xF0) == 0xE0) {
    len = 3;
  } else if ((lead & 0xF8) == 0xF0) {
    len = 4;
  }
  if (i + len > text.size()) return 1;
  for (std::size_t k = 1; k < len; ++k) {
    if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) return 1;
  }
  return len;
}

}  // namespace

std::vector<TokenSpan> heuristic_tokens(std::string_view text) {
  std::vector<TokenSpan> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_space_byte(c)) {
      ++i;
    } else if (is_word_byte(c)) {
      const std::size_t begin = i;
      while (i < text.size() && is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
      out.push_back({begin, i});
    } else {
      const std::size_t len = code_point_length(text, i);
      out.push_back({i, i + len});
      i += len;
    }
  }
  return out;
}

std::size_t count_tokens(std::string_view text) {
  std::size_t n = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_space_byte(c)) {
      ++i;
    } else if (is_word_byte(c)) {
      while (i < text.size() && is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
      ++n;
    } else {
      i += code_point_length(text, i);
      ++n;
    }
  }
  return n;
}

std::string truncate_to_tokens(std::string_view text, std::size_t max_tokens) {
  if (max_tokens == 0) return {};
  const auto spans = heuristic_tokens(text);
  if (spans.size() <= max_tokens) return std::string(text);
  return std::string(text.substr(0, spans[max_tokens - 1].end));
}

std::shared_ptr<const TokenEstimator> estimator_for(std::string_view id) {
  if (id == kHeuristicEstimatorId) return std::make_shared<HeuristicEstimator>();
  throw ConfigError("unknown token estimator: " + std::string(id));
}

}  // namespace nbsearch
