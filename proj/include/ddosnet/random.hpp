#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ddosnet {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Seed for a named substream of `master`. Stages keyed by name never
/// perturb each other's draws.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view stream) {
  return mix64(master ^ mix64(fnv1a(stream)));
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
  return mix64(mix64(master ^ mix64(a + 0x632be59bd9b4e019ull)) ^ mix64(b + 0x85157af5ull));
}

}  // namespace ddosnet
