#include "nashverify/random.hpp"

#include "nashverify/errors.hpp"

namespace nashverify {
namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t stable_hash(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RandomEngine keyed_engine(std::uint64_t seed, std::initializer_list<std::uint64_t> key) {
  std::uint64_t state = splitmix64(seed);
  for (std::uint64_t part : key) state = splitmix64(splitmix64(state) ^ part);
  std::seed_seq seq{static_cast<std::uint32_t>(state), static_cast<std::uint32_t>(state >> 32)};
  return RandomEngine(seq);
}

std::size_t uniform_index(RandomEngine& rng, std::size_t n) {
  if (n == 0) throw InvalidArgument("cannot draw from an empty range");
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(rng);
}

}  // namespace nashverify
