#pragma once

#include <cstdint>
#include <random>

namespace brox {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

/// Replica seed derived from a master seed and a tuple of indices.
/// Depends only on its arguments, never on scheduling order.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

/// Generator for the (seed, stream) pair.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

}  // namespace brox
