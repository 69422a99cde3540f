#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace spolab {

/// SplitMix64 finalizer. Used both as the counter hash and for stream derivation.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Counter-based generator: draw k is mix64(key + k). The whole state is
/// (key, counter), so streams are reproducible and cheap to fork.
///
/// Standard-library distributions are implementation-defined, so uniform and
/// normal variates are derived here directly from the raw bits.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) noexcept : key_(mix64(seed)) {}

  /// Independent stream for (seed, stream_id), e.g. one per rollout worker.
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id) noexcept {
    Rng r;
    r.key_ = mix64(mix64(seed) ^ mix64(stream_id + 0x5851F42D4C957F2DULL));
    return r;
  }

  std::uint64_t next_u64() noexcept { return mix64(key_ + 0x632BE59BD9B4E019ULL * counter_++); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Lemire's multiply-shift; bias is below 2^-64 * n.
  std::uint64_t below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Standard normal via Box–Muller. Each call consumes two uniforms and
  /// discards the sine branch so that the state stays a plain counter.
  double normal() noexcept {
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 < 0x1.0p-60) u1 = 0x1.0p-60;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

/// Fisher–Yates over any random-access range using our generator.
template <typename Range>
void shuffle(Range& range, Rng& rng) {
  using std::swap;
  const auto n = static_cast<std::uint64_t>(std::size(range));
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = rng.below(i);
    swap(range[i - 1], range[j]);
  }
}

}  // namespace spolab
