#include "nbsearch/embedding.hpp"

#include <cmath>
#include <stdexcept>

#include "nbsearch/errors.hpp"
#include "nbsearch/hash.hpp"
#include "nbsearch/tokens.hpp"

namespace nbsearch {

namespace {

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

}  // namespace

double l2_norm(const std::vector<double>& values) noexcept {
  double sum = 0.0;
  for (double v : values) sum += v * v;
  return std::sqrt(sum);
}

void normalize_in_place(std::vector<double>& values) {
  const double norm = l2_norm(values);
  if (!(norm > 0.0) || !std::isfinite(norm)) throw std::domain_error("cannot normalize a zero or non-finite vector");
  for (double& v : values) v /= norm;
}

std::string offline_model_id(std::size_t dim) { return "offline-fnv1a-bow-" + std::to_string(dim); }

EmbeddingVector deterministic_embed(std::string_view text, std::size_t dim) {
  if (dim == 0) throw std::invalid_argument("embedding dimension must be positive");
  const auto spans = heuristic_tokens(text);
  if (spans.empty()) throw NoTokens("text has no tokens to embed");

  EmbeddingVector out;
  out.model_id = offline_model_id(dim);
  out.values.assign(dim, 0.0);
  for (const auto& span : spans) {
    const std::uint64_t h = fnv1a64(ascii_lower(text.substr(span.begin, span.end - span.begin)));
    const double sign = (h >> 63) == 0 ? 1.0 : -1.0;
    out.values[h % dim] += sign;
  }
  if (l2_norm(out.values) == 0.0) {
    out.values[fnv1a64(ascii_lower(text)) % dim] = 1.0;
    return out;
  }
  normalize_in_place(out.values);
  return out;
}

double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DimensionMismatch("cosine_distance: dimension mismatch");
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace nbsearch
