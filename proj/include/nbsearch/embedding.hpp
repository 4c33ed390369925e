#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace nbsearch {

inline constexpr std::size_t kOfflineEmbeddingDim = 256;

/// A unit-length embedding. Values stay in double precision until they are
/// written to an index.
struct EmbeddingVector {
  std::vector<double> values;
  std::string model_id;

  std::size_t dim() const noexcept { return values.size(); }

  bool operator==(const EmbeddingVector&) const = default;
};

/// Scales values to unit L2 norm. Throws std::domain_error for a zero or
/// non-finite vector.
void normalize_in_place(std::vector<double>& values);

double l2_norm(const std::vector<double>& values) noexcept;

/// Model id reported by deterministic_embed for a given dimension.
std::string offline_model_id(std::size_t dim);

/// Offline hashed bag of tokens. Each heuristic-v1 token is ASCII-lowercased
/// and hashed with FNV-1a-64; bucket h % dim receives +1 when bit 63 of h is
/// clear and -1 otherwise; the sum is L2-normalized. If the signed counts
/// cancel to zero, the vector is the +1 basis vector at
/// fnv1a64(lowercased text) % dim instead. Throws NoTokens.
EmbeddingVector deterministic_embed(std::string_view text, std::size_t dim = kOfflineEmbeddingDim);

/// 1 - cos(a, b), computed in double.
double cosine_distance(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace nbsearch
