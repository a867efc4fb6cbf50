#pragma once

#include <cstdint>
#include <string_view>

namespace duet {

// Deterministic splitmix64 generator. The standard <random> engines are
// portable but the distributions are not, and reproducibility across
// platforms and compiler versions matters more here than statistical
// sophistication: every sampled artifact must be byte-identical given the
// same seed.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1), 53 bits of entropy.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be positive.
  uint64_t below(uint64_t n) { return n ? next() % n : 0; }

  // Derive an independent stream; forks of the same rng with different
  // labels never share state.
  Rng fork(uint64_t label) const {
    Rng child(state_ ^ (label * 0xd1342543de82ef95ull + 0x2545f4914f6cdd1dull));
    child.next();
    return child;
  }

 private:
  uint64_t state_;
};

namespace detail {
inline uint64_t fnv1a(std::string_view s, uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}
}  // namespace detail

// Order-sensitive mixing of integers and strings into one 64-bit value.
// Used to derive per-episode / per-instance seeds from a root seed plus
// structural coordinates, so no two sampling sites share a stream.
inline uint64_t hash_mix(uint64_t a) {
  Rng r(a);
  return r.next();
}
inline uint64_t hash_mix(uint64_t a, uint64_t b) {
  Rng r(a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2)));
  return r.next();
}
inline uint64_t hash_mix(uint64_t a, uint64_t b, uint64_t c) {
  return hash_mix(hash_mix(a, b), c);
}
inline uint64_t hash_mix(uint64_t a, std::string_view s) {
  return hash_mix(a, detail::fnv1a(s));
}
inline uint64_t hash_mix(uint64_t a, std::string_view s, uint64_t b) {
  return hash_mix(hash_mix(a, detail::fnv1a(s)), b);
}

}  // namespace duet
