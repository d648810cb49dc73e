#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace umit {

// Counter-free deterministic generator. Every consumer derives its own key
// from (seed, stream name, iteration), so resuming a run at iteration k
// needs no replay of the first k-1 iterations' draws.
class Rng {
 public:
  explicit Rng(uint64_t key) : state_(key ^ 0x9e3779b97f4a7c15ull) {
    // burn-in so nearby keys decorrelate
    next_u64();
    next_u64();
  }

  uint64_t next_u64() {
    // splitmix64 step
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform in [0,1), 53-bit mantissa
  double next_uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // standard normal via Box-Muller; pairs are cached
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_uniform();
    double u2 = next_uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // uniform integer in [0, n)
  int next_below(int n) { return int(next_u64() % uint64_t(n)); }

 private:
  uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

namespace detail {
inline uint64_t fnv1a(std::string_view s, uint64_t h) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}
inline uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}
}  // namespace detail

// Key for a named substream, optionally indexed (iteration, sub-step, ...).
inline uint64_t stream_key(uint64_t seed, std::string_view name, uint64_t a = 0,
                           uint64_t b = 0) {
  uint64_t h = detail::fnv1a(name, 0xcbf29ce484222325ull);
  h = detail::mix64(h ^ detail::mix64(seed));
  h = detail::mix64(h ^ detail::mix64(a + 0x632be59bd9b4e019ull));
  h = detail::mix64(h ^ detail::mix64(b + 0xd1b54a32d192ed03ull));
  return h;
}

inline Rng stream(uint64_t seed, std::string_view name, uint64_t a = 0,
                  uint64_t b = 0) {
  return Rng(stream_key(seed, name, a, b));
}

}  // namespace umit
