#pragma once

#include <cstdint>
#include <string_view>

namespace nbsearch {

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

// FNV-1a, 64-bit. Used for notebook content hashes and embedding buckets.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

}  // namespace nbsearch
