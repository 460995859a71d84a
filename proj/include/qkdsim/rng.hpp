#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace qkdsim {

// Domain tags keep the substreams of one session seed independent of each
// other: per-slot photon detail, per-chunk occupancy skipping, per-channel
// dark processes, Eve's measurements and the polarization drift walk.
namespace rng_domain {
inline constexpr std::uint32_t slot_detail = 0x51u;
inline constexpr std::uint32_t occupancy = 0x0Cu;
inline constexpr std::uint32_t dark = 0xDAu;
inline constexpr std::uint32_t eavesdrop = 0xE5u;
inline constexpr std::uint32_t drift = 0xD6u;
}  // namespace rng_domain

// Counter-based generator (Philox4x32-10). A (seed, stream, domain) triple
// names an independent substream and every draw is a pure function of the
// draw counter, so any slot of a session can be simulated in isolation, in
// any order, and on any number of threads with bit-identical results.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint32_t domain = 0)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32) ^ domain},
        ctr_{0u, 0u, static_cast<std::uint32_t>(stream),
             static_cast<std::uint32_t>(stream >> 32)} {}

  std::uint32_t next_u32() {
    if (pos_ == 4) refill();
    return block_[pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return lo | (hi << 32);
  }

  // Uniform on [0,1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller; the second member of each pair is cached.
  double gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = 1.0 - uniform();  // (0,1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  double exponential(double rate) {
    if (rate <= 0.0) throw std::invalid_argument("exponential: rate must be positive");
    return -std::log(1.0 - uniform()) / rate;
  }

  int poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean > 30.0) {
      // Gaussian approximation; configs in practice keep the mean far below this.
      const double v = mean + std::sqrt(mean) * gaussian();
      return v < 0.0 ? 0 : static_cast<int>(std::llround(v));
    }
    const double limit = std::exp(-mean);
    int k = 0;
    double prod = 1.0;
    do {
      ++k;
      prod *= uniform();
    } while (prod > limit);
    return k - 1;
  }

  // Poisson conditioned on being nonzero, by inverting the conditional CDF.
  int poisson_at_least_one(double mean) {
    if (mean <= 0.0) throw std::invalid_argument("poisson_at_least_one: mean must be positive");
    const double p0 = std::exp(-mean);
    const double target = uniform() * (1.0 - p0);
    double term = p0;
    double cum = 0.0;
    int k = 0;
    do {
      ++k;
      term *= mean / k;
      cum += term;
    } while (cum < target && k < 1000);
    return k;
  }

  // Number of failures before the next success in a Bernoulli(q) sequence.
  std::int64_t geometric_skips(double q) {
    if (q >= 1.0) return 0;
    if (q <= 0.0) return std::numeric_limits<std::int64_t>::max() / 4;
    const double u = uniform();
    const double s = std::log1p(-u) / std::log1p(-q);
    if (s >= static_cast<double>(std::numeric_limits<std::int64_t>::max() / 4))
      return std::numeric_limits<std::int64_t>::max() / 4;
    return static_cast<std::int64_t>(s);
  }

 private:
  static std::uint32_t mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    return static_cast<std::uint32_t>(p);
  }

  void refill() {
    std::array<std::uint32_t, 4> x = ctr_;
    std::array<std::uint32_t, 2> k = key_;
    for (int round = 0;; ++round) {
      std::uint32_t hi0 = 0;
      std::uint32_t hi1 = 0;
      const std::uint32_t lo0 = mulhilo(0xD2511F53u, x[0], hi0);
      const std::uint32_t lo1 = mulhilo(0xCD9E8D57u, x[2], hi1);
      x = {hi1 ^ x[1] ^ k[0], lo1, hi0 ^ x[3] ^ k[1], lo0};
      if (round == 9) break;
      k[0] += 0x9E3779B9u;
      k[1] += 0xBB67AE85u;
    }
    block_ = x;
    pos_ = 0;
    if (++ctr_[0] == 0) ++ctr_[1];
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> ctr_;
  std::array<std::uint32_t, 4> block_{};
  int pos_ = 4;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace qkdsim
