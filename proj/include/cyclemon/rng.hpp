#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "cyclemon/error.hpp"

namespace cyclemon {

// Every random draw in the project comes from an Rng stream derived from one
// master seed. Streams are addressed by (purpose, a, b) so independent
// consumers (weight init, dropout, HPO trial i of repeat r, ...) never share
// state, and parallel schedules reproduce serial ones.
enum class Stream : std::uint64_t {
  DataSplit = 1,
  Synthetic = 2,
  Noise = 3,
  WeightInit = 4,
  Dropout = 5,
  BatchShuffle = 6,
  HpoSample = 7,
  TrialSeed = 8,
  Generic = 9,
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Order-independent per-consumer seed: hash of (master, tag, a, b).
inline std::uint64_t derive_seed(std::uint64_t master, Stream tag,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t s = master;
  std::uint64_t h = splitmix64(s);
  s ^= static_cast<std::uint64_t>(tag) * 0xd1b54a32d192ed03ULL;
  h ^= splitmix64(s);
  s ^= a * 0x8cb92ba72f3d8dd7ULL + 0x2545f4914f6cdd1dULL;
  h ^= splitmix64(s);
  s ^= b * 0x9e6c63d0876a9a47ULL + 0xda3e39cb94b95bdbULL;
  h ^= splitmix64(s);
  return h;
}

// xoshiro256** with hand-rolled distributions. std:: distributions are
// implementation-defined and would break cross-platform reproducibility.
class Rng {
public:
  Rng() : Rng(0) {}

  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
  }

  static Rng stream(std::uint64_t master, Stream tag, std::uint64_t a = 0,
                    std::uint64_t b = 0) {
    return Rng(derive_seed(master, tag, a, b));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) raise_numeric("InvalidRange", "below(0)");
    const std::uint64_t threshold = (~n + 1) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Inclusive integer range.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) raise_numeric("InvalidRange", "uniform_int: hi < lo");
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(span == 0 ? next_u64() : below(span));
  }

  // Box-Muller; the pair is consumed eagerly so draw order is well defined.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // 10^U with U uniform on [exp_lo, exp_hi].
  double log_uniform10(double exp_lo, double exp_hi) {
    return std::pow(10.0, uniform(exp_lo, exp_hi));
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace cyclemon
