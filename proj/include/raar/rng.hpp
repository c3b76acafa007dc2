#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace raar {

// Deterministic RNG helpers. Everything downstream of a seed must be
// bit-reproducible across runs and platforms, so bounded draws and
// shuffles are pinned here instead of relying on standard-library
// distributions (whose outputs are implementation-defined).

inline uint64_t fnv1a64(std::string_view data) {
  uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

// splitmix64 finalizer; decorrelates nearby seeds.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for a named substream, e.g. one per item_id.
inline uint64_t substream_seed(uint64_t seed, std::string_view key) {
  return mix64(seed ^ fnv1a64(key));
}

class DeterministicRng {
 public:
  explicit DeterministicRng(uint64_t seed) : gen_(mix64(seed)) {}

  uint64_t next() { return gen_(); }

  // Unbiased draw in [0, n) via rejection sampling.
  uint64_t bounded(uint64_t n) {
    if (n == 0) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t value;
    do {
      value = gen_();
    } while (value >= limit);
    return value % n;
  }

 private:
  std::mt19937_64 gen_;
};

// Fisher-Yates with pinned draw order.
template <typename T>
void seeded_shuffle(std::vector<T>& values, DeterministicRng& rng) {
  for (size_t i = values.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng.bounded(i));
    std::swap(values[i - 1], values[j]);
  }
}

// Sample k distinct indices from [0, n), returned in ascending order.
inline std::vector<size_t> sample_without_replacement(size_t n, size_t k,
                                                      DeterministicRng& rng) {
  std::vector<size_t> pool(n);
  for (size_t i = 0; i < n; ++i) pool[i] = i;
  seeded_shuffle(pool, rng);
  pool.resize(k < n ? k : n);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace raar
