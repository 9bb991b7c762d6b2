#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace nashverify {

using RandomEngine = std::mt19937_64;

/// Stable 64-bit FNV-1a hash. Used to turn names and ids into stream keys;
/// std::hash is not stable across standard libraries.
std::uint64_t stable_hash(std::string_view text) noexcept;

/// Independent, reproducible stream for a key such as
/// (seed, instance, step, candidate, judge). Streams never depend on
/// which policy consumes them.
RandomEngine keyed_engine(std::uint64_t seed, std::initializer_list<std::uint64_t> key);

/// Uniform index in [0, n).
std::size_t uniform_index(RandomEngine& rng, std::size_t n);

}  // namespace nashverify
