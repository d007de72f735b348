#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mcpar/errors.hpp"
#include "mcpar/random.hpp"

namespace mcpar {

struct ToyConfig {
  /// Extra floating point work per realization, for speedup studies. It
  /// burns CPU only and never changes the drawn values.
  std::uint64_t busy_work = 0;
};

/// Square of a uniformly drawn decimal digit 0..9.
class ToyDigitSquareProblem {
 public:
  explicit ToyDigitSquareProblem(ToyConfig cfg = {}) : cfg_(cfg) {}

  std::size_t channel_count() const { return 1; }
  std::vector<double> channel_times() const { return {0.0}; }

  double realize(RandomStream& stream, std::span<double> channels) const {
    const auto digit = static_cast<double>(stream.uniform_below(10));
    if (cfg_.busy_work > 0) spin(cfg_.busy_work);
    const double value = digit * digit;
    channels[0] = value;
    return value;
  }

  const ToyConfig& config() const noexcept { return cfg_; }

 private:
  static void spin(std::uint64_t iterations) {
    // Read through a volatile so the recurrence cannot be folded at compile
    // time (1.0 is its fixed point).
    volatile double start = 1.0;
    double x = start;
    for (std::uint64_t i = 0; i < iterations; ++i) x = x * 0.999999 + 1e-6;
    volatile double sink = x;
    (void)sink;
  }

  ToyConfig cfg_;
};

}  // namespace mcpar
