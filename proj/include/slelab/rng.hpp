#pragma once

#include <cstdint>
#include <random>

namespace sle {

using Engine = std::mt19937_64;

/// Deterministic per-run stream: identical (seed, run_index) always yields the
/// same engine state, and distinct run indices give decorrelated streams.
inline Engine make_stream(std::uint64_t seed, std::uint64_t run_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(run_index),
                    static_cast<std::uint32_t>(run_index >> 32), 0x51e7ab5u};
  return Engine(seq);
}

}  // namespace sle
