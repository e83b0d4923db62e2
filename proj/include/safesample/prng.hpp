#pragma once

#include <cstdint>
#include <span>
#include <utility>

namespace safesample {

/// splitmix64 (Steele, Lea & Flood). Small enough to reimplement in any
/// language, which is what makes cross-implementation test vectors possible.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  constexpr std::uint64_t operator()() noexcept { return next(); }

  /// Uniform integer in [0, bound) by rejection: draws below 2^64 mod bound
  /// are discarded, the rest are reduced mod bound. bound must be > 0.
  constexpr std::uint64_t bounded(std::uint64_t bound) noexcept {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

  static constexpr std::uint64_t min() noexcept { return 0; }
  static constexpr std::uint64_t max() noexcept { return ~std::uint64_t{0}; }

 private:
  std::uint64_t state_;
};

/// Moves a uniformly random k-subset of `items` to the front, in draw order:
/// for i in [0, k) swap items[i] with items[i + bounded(size - i)].
/// Returns the number of items drawn, min(k, size).
template <typename T>
std::size_t partial_fisher_yates(std::span<T> items, std::size_t k, SplitMix64& rng) {
  const std::size_t n = items.size();
  const std::size_t take = k < n ? k : n;
  for (std::size_t i = 0; i < take; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.bounded(n - i));
    using std::swap;
    swap(items[i], items[j]);
  }
  return take;
}

}  // namespace safesample
