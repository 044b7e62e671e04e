#pragma once

#include <cstdint>
#include <random>

namespace semfew {

using Rng = std::mt19937_64;

/// Engine whose state depends only on (seed, stream, salt).
inline Rng derive_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t salt = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32)};
    return Rng(seq);
}

// Salts keep independent consumers of one user seed from sharing a stream.
namespace salt {
inline constexpr std::uint64_t init = 0x1a17;
inline constexpr std::uint64_t shuffle = 0x5f1e;
inline constexpr std::uint64_t episode = 0xe915;
inline constexpr std::uint64_t kmeans = 0x3ea5;
inline constexpr std::uint64_t synthetic = 0x5c71;
inline constexpr std::uint64_t semantic_map = 0x7a9f;
inline constexpr std::uint64_t grad_check = 0x6c4c;
} // namespace salt

} // namespace semfew
