#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace stabq {

// Counter-based random number generation (Philox4x32-10). Streams are keyed
// by arbitrary 64-bit words (seed, replicate id, lattice cell coordinates,
// ...), so any stream can be reconstructed independently of evaluation
// order. All samplers below consume the stream through the same interface,
// which keeps every experiment bit-reproducible across thread counts.

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Fold one more word into a running 64-bit stream identity.
inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
  return splitmix64(h ^ (v + kGolden + (h << 6) + (h >> 2)));
}

}  // namespace detail

struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;

  static Counter block(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
             static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }
};

// One independent random stream. Identity is 128 bits (key + counter high
// words), derived by hashing the words passed to the constructor.
class RngStream {
 public:
  RngStream() : RngStream(0) {}

  explicit RngStream(std::uint64_t seed) {
    const std::uint64_t k = detail::splitmix64(seed);
    const std::uint64_t d = detail::splitmix64(k ^ kGoldenTag);
    init(k, d);
  }

  // Stream keyed by several words, e.g. {seed, replicate, class, zx, zy}.
  RngStream(std::initializer_list<std::uint64_t> words) {
    std::uint64_t h = 0x5374616251524e47ull;  // arbitrary domain tag
    for (std::uint64_t w : words) h = detail::hash_combine(h, w);
    const std::uint64_t d = detail::splitmix64(h ^ kGoldenTag);
    init(h, d);
  }

  // A derived, statistically independent stream.
  RngStream substream(std::uint64_t tag) const {
    std::uint64_t h = detail::hash_combine(key64_, tag);
    h = detail::hash_combine(h, disc64_);
    RngStream s;
    s.init(h, detail::splitmix64(h ^ kGoldenTag));
    return s;
  }

  std::uint32_t next_u32() {
    if (pos_ == 4) refill();
    return buf_[pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return lo | (hi << 32);
  }

  // Uniform on [0,1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0,1]; safe as a log() argument.
  double uniform01_open() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01_open();
    const double u2 = uniform01();
    const double m = std::sqrt(-2.0 * std::log(u1));
    constexpr double two_pi = 6.283185307179586476925286766559;
    spare_ = m * std::sin(two_pi * u2);
    have_spare_ = true;
    return m * std::cos(two_pi * u2);
  }

  // Poisson sampling: Knuth's product method for small means, transformed
  // rejection (Hoermann's PTRS) otherwise. Both consume only uniform01
  // draws, so sequences are reproducible across platforms.
  std::uint64_t poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    if (lambda < 30.0) return poisson_knuth(lambda);
    return poisson_ptrs(lambda);
  }

 private:
  static constexpr std::uint64_t kGoldenTag = 0xA0761D6478BD642Full;

  void init(std::uint64_t key, std::uint64_t disc) {
    key64_ = key;
    disc64_ = disc;
    key_ = {static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)};
    ctr_hi_ = {static_cast<std::uint32_t>(disc), static_cast<std::uint32_t>(disc >> 32)};
    block_ = 0;
    pos_ = 4;
    have_spare_ = false;
  }

  void refill() {
    const Philox4x32::Counter c = {static_cast<std::uint32_t>(block_),
                                   static_cast<std::uint32_t>(block_ >> 32), ctr_hi_[0],
                                   ctr_hi_[1]};
    buf_ = Philox4x32::block(c, key_);
    ++block_;
    pos_ = 0;
  }

  std::uint64_t poisson_knuth(double lambda) {
    const double limit = std::exp(-lambda);
    std::uint64_t k = 0;
    double p = 1.0;
    do {
      p *= uniform01_open();
      if (p <= limit) return k;
      ++k;
    } while (k < 10000);
    return k;  // unreachable for lambda < 30
  }

  std::uint64_t poisson_ptrs(double lambda) {
    const double slam = std::sqrt(lambda);
    const double loglam = std::log(lambda);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
      const double u = uniform01() - 0.5;
      const double v = uniform01_open();
      const double us = 0.5 - std::abs(u);
      const double kf = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
      if (us >= 0.07 && v <= v_r) return static_cast<std::uint64_t>(kf);
      if (kf < 0.0 || (us < 0.013 && v > us)) continue;
      if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
          kf * loglam - lambda - std::lgamma(kf + 1.0)) {
        return static_cast<std::uint64_t>(kf);
      }
    }
  }

  Philox4x32::Key key_{};
  std::array<std::uint32_t, 2> ctr_hi_{};
  std::uint64_t key64_ = 0;
  std::uint64_t disc64_ = 0;
  std::uint64_t block_ = 0;
  Philox4x32::Counter buf_{};
  int pos_ = 4;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace stabq
