#pragma once

// Counter-based random number generation (Philox4x64-10).
//
// Every stochastic routine in this library takes an explicit 64-bit seed and
// derives independent substreams from (seed, label, index) triples, so results
// are reproducible bit-for-bit regardless of evaluation order or thread count.

#include <cstdint>
#include <cstring>
#include <array>
#include <cmath>
#include <numbers>
#include <string_view>

namespace ecns {

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Derives the seed for replicate `index` of a batch rooted at `seed`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index + 1));
}

namespace detail {

inline void mulwide64(std::uint64_t a, std::uint64_t b,
                      std::uint64_t& hi, std::uint64_t& lo) {
  unsigned __int128 w = static_cast<unsigned __int128>(a) * b;
  hi = static_cast<std::uint64_t>(w >> 64);
  lo = static_cast<std::uint64_t>(w);
}

}  // namespace detail

/// Philox4x64-10 block cipher: 256-bit counter, 128-bit key -> 256-bit block.
struct Philox4x64 {
  static constexpr std::uint64_t kMul0 = 0xd2e7470ee14c6c93ull;
  static constexpr std::uint64_t kMul1 = 0xca5a826395121157ull;
  static constexpr std::uint64_t kWeyl0 = 0x9e3779b97f4a7c15ull;
  static constexpr std::uint64_t kWeyl1 = 0xbb67ae8584caa73bull;

  static std::array<std::uint64_t, 4> block(std::array<std::uint64_t, 4> ctr,
                                            std::uint64_t k0, std::uint64_t k1) {
    for (int round = 0; round < 10; ++round) {
      std::uint64_t hi0, lo0, hi1, lo1;
      detail::mulwide64(kMul0, ctr[0], hi0, lo0);
      detail::mulwide64(kMul1, ctr[2], hi1, lo1);
      ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
      k0 += kWeyl0;
      k1 += kWeyl1;
    }
    return ctr;
  }
};

/// One independent stream of uniforms/normals, addressed by (seed, label, index).
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view label, std::uint64_t index = 0)
      : key0_(splitmix64(seed)),
        key1_(fnv1a64(label) ^ splitmix64(index * 0x9e3779b97f4a7c15ull + 0x6a09e667f3bcc909ull)) {}

  std::uint64_t next_u64() {
    if (pos_ == 4) refill();
    return buf_[pos_++];
  }

  /// Uniform on the open interval (0, 1); never returns 0 or 1.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller (pairs cached).
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_below(std::uint64_t n) {
    // Rejection-free modulo bias is negligible for n << 2^64; keep exactness
    // with Lemire-style rejection anyway.
    std::uint64_t x = next_u64();
    unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      std::uint64_t t = -n % n;
      while (lo < t) {
        x = next_u64();
        m = static_cast<unsigned __int128>(x) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

 private:
  void refill() {
    buf_ = Philox4x64::block({counter_, 0, 0, 0}, key0_, key1_);
    ++counter_;
    pos_ = 0;
  }

  std::uint64_t key0_, key1_;
  std::uint64_t counter_ = 0;
  std::array<std::uint64_t, 4> buf_{};
  int pos_ = 4;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace ecns
