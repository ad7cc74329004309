#pragma once

#include <cstdint>
#include <random>

namespace csiadv {

using Rng = std::mt19937_64;

/// Independent, reproducible stream for (seed, index, tag). Used wherever
/// work is keyed by a sample index so that generation order does not matter.
inline Rng derive_stream(std::uint64_t seed, std::uint64_t index, std::uint64_t tag = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
  return Rng(seq);
}

}  // namespace csiadv
