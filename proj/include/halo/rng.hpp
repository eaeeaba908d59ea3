#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string_view>
#include <vector>

#include "halo/error.hpp"

namespace halo {

// Deterministic, platform-stable randomness. Everything seeded through here
// replays bit-identically regardless of standard-library distribution
// implementations, which is what the byte-identical rerun contract needs.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// FNV-1a over raw bytes, used to derive per-sample seeds from string ids.
inline std::uint64_t hash_bytes(const void* data, std::size_t n,
                                std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t hash_str(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
  return hash_bytes(s.data(), s.size(), h);
}

inline std::uint64_t hash_u64(std::uint64_t v, std::uint64_t h = 0xcbf29ce484222325ull) {
  return hash_bytes(&v, sizeof(v), h);
}

// Stable seed derivation: hash(master, id) so corpora can be sharded or
// resumed without changing per-sample results.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view id,
                                 std::string_view salt = "") {
  std::uint64_t h = hash_u64(master);
  h = hash_str(id, h);
  if (!salt.empty()) h = hash_str(salt, h);
  std::uint64_t s = h;
  return splitmix64(s);
}

class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; the spare variate is discarded to keep the stream
  // insensitive to interleaving with other draws.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Index in [0, n)
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  // Weighted pick; weights must be nonnegative with a positive sum.
  std::size_t weighted_index(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw InvalidParameter("weighted_index: nonpositive weight sum");
    double x = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (x < acc) return i;
    }
    return weights.size() - 1;
  }

private:
  std::uint64_t state_;
};

}  // namespace halo
