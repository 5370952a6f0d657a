#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace pfss {

// mt19937_64 with distribution transforms written out here, so that a seed
// gives the same stream on every standard library (std:: distributions are
// implementation-defined).
class Rng {
 public:
  static constexpr std::string_view kGeneratorName = "mt19937_64";

  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  // Uniform integer in [0, bound), unbiased.
  uint64_t below(uint64_t bound);
  double exponential(double scale);
  double normal(double mean, double stddev);
  double gamma(double shape, double scale);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (size_t i = items.size(); i > 1; --i) {
      const size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  // Independent child seed for stream `index` (splitmix64 of seed ^ index).
  static uint64_t derive(uint64_t seed, uint64_t index);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace pfss
