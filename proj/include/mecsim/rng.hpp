#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mecsim {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a; stable across platforms so stream seeds never depend on std::hash.
inline constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view name) {
  return splitmix64(master_seed ^ splitmix64(fnv1a(name)));
}

// Independent named sub-stream of a master seed. Toggling one stochastic
// source leaves every other stream's draws untouched.
inline Engine make_stream(std::uint64_t master_seed, std::string_view name) {
  return Engine(derive_seed(master_seed, name));
}

// Always consumes exactly one draw, so a degenerate range (lo == hi) keeps
// the stream aligned with runs that use a wider range.
inline double uniform(Engine& rng, double lo, double hi) {
  const double u = std::generate_canonical<double, 53>(rng);
  return lo + (hi - lo) * u;
}

}  // namespace mecsim
