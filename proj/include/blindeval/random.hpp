#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace blindeval {

/// Finalizer of the SplitMix64 generator.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Reproducible random stream: std::mt19937_64 seeded with
/// splitmix64(seed ^ splitmix64(stream)). The engine's output sequence is fixed
/// by the standard, and bounded draws and shuffles are implemented here
/// instead of with std::uniform_int_distribution / std::shuffle, whose
/// results differ between standard libraries.
class SeededStream {
 public:
  SeededStream(std::uint64_t seed, std::uint64_t stream)
      : engine_(splitmix64(seed ^ splitmix64(stream))) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, bound) by rejection sampling. bound > 0.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (true) {
      const std::uint64_t r = engine_();
      if (r >= threshold) return r % bound;
    }
  }

  /// Fisher-Yates, walking from the back.
  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace blindeval
