#pragma once

#include <cstdint>
#include <random>

namespace attnflow {

using Rng = std::mt19937_64;

/// Purpose-specific stream indices. Every random draw in the library comes
/// from make_stream(seed, purpose, sub) so that results do not depend on the
/// order in which sweep cells or epochs are executed.
enum class Stream : std::uint32_t {
  Basis = 1,
  Background = 2,
  Samples = 3,
  Init = 4,
  Shuffle = 5,
};

inline Rng make_stream(std::uint64_t seed, Stream purpose, std::uint64_t sub = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(sub),
                    static_cast<std::uint32_t>(sub >> 32)};
  return Rng(seq);
}

}  // namespace attnflow
