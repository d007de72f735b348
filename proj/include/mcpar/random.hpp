#pragma once

// Per-task random streams and the samplers the stochastic problems need.
//
// Streams come from the Philox4x64-10 counter-based generator. The 256-bit
// counter is split as (block, 0, task_index, 0) and the key is
// (base_seed, 0), so every task walks its own disjoint counter range: no two
// tasks can ever produce overlapping sequences, whatever order they run in.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "mcpar/errors.hpp"

namespace mcpar {

namespace philox_detail {

inline constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
inline constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
inline constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;  // golden ratio
inline constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;  // sqrt(3) - 1

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
  const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
  hi = static_cast<std::uint64_t>(p >> 64);
  lo = static_cast<std::uint64_t>(p);
}

}  // namespace philox_detail

using PhiloxCounter = std::array<std::uint64_t, 4>;
using PhiloxKey = std::array<std::uint64_t, 2>;

/// One Philox4x64 block with 10 rounds.
inline PhiloxCounter philox4x64_10(PhiloxCounter ctr, PhiloxKey key) {
  using namespace philox_detail;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint64_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

/// Identifies a task's stream: a pure function of the run seed and the task
/// index.
struct StreamId {
  std::uint64_t base_seed = 0;
  std::uint64_t task_index = 0;

  friend bool operator==(const StreamId&, const StreamId&) = default;
};

/// Sequential view over one Philox stream. Satisfies
/// UniformRandomBitGenerator so it can also drive <random> distributions.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(StreamId id) : id_(id), key_{id.base_seed, 0} {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (pos_ == buffer_.size()) refill();
    return buffer_[pos_++];
  }

  /// Uniform in (0, 1]; never returns 0 so logs are always finite.
  double uniform_open0() { return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53; }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Unbiased integer in [0, bound) (Lemire's multiply-and-reject).
  std::uint64_t uniform_below(std::uint64_t bound) {
    if (bound == 0) throw InvalidParams("uniform_below needs a positive bound");
    std::uint64_t hi, lo;
    philox_detail::mulhilo((*this)(), bound, hi, lo);
    if (lo < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (lo < threshold) philox_detail::mulhilo((*this)(), bound, hi, lo);
    }
    return hi;
  }

  /// Standard normal via Box-Muller; the second variate of each pair is kept.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_open0()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  const StreamId& id() const noexcept { return id_; }
  std::uint64_t blocks_consumed() const noexcept { return block_; }

 private:
  void refill() {
    buffer_ = philox4x64_10({block_, 0, id_.task_index, 0}, key_);
    ++block_;
    pos_ = 0;
  }

  StreamId id_;
  PhiloxKey key_;
  std::uint64_t block_ = 0;
  PhiloxCounter buffer_{};
  std::size_t pos_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline RandomStream derive_stream(std::uint64_t base_seed, std::uint64_t task_index) {
  return RandomStream(StreamId{base_seed, task_index});
}

/// Mean and dispersion (coefficient of variation) of the maximum-entropy
/// gamma model for a positive parameter with known mean: shape 1/delta^2,
/// scale delta^2 * mu. delta = 0 is the deterministic limit.
struct GammaParams {
  double mu = 1.0;
  double delta = 0.1;

  double shape() const { return 1.0 / (delta * delta); }
  double scale() const { return delta * delta * mu; }

  void validate() const {
    if (!(mu > 0.0) || !std::isfinite(mu)) {
      throw InvalidParams("gamma mean must be positive and finite, got " + std::to_string(mu));
    }
    if (!(delta >= 0.0) || !std::isfinite(delta)) {
      throw InvalidParams("gamma dispersion must be non-negative and finite, got " +
                          std::to_string(delta));
    }
  }
};

/// Density of the maximum-entropy gamma model, zero outside (0, inf).
inline double gamma_pdf(double xi, const GammaParams& p) {
  p.validate();
  if (!(xi > 0.0)) return 0.0;
  const double a = p.shape();
  const double log_pdf = -std::log(p.mu) + a * std::log(a) - std::lgamma(a) +
                         (a - 1.0) * std::log(xi / p.mu) - xi / (p.delta * p.delta * p.mu);
  return std::exp(log_pdf);
}

namespace gamma_detail {

// Marsaglia-Tsang squeeze/rejection for unit-scale Gamma(shape >= 1).
inline double unit_gamma_ge1(RandomStream& s, double shape) {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = s.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = s.uniform_open0();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

}  // namespace gamma_detail

/// One draw from Gamma(1/delta^2, delta^2 mu). Shapes below one use the
/// Gamma(a + 1) * U^(1/a) boost.
inline double sample_gamma(RandomStream& s, const GammaParams& p) {
  p.validate();
  if (p.delta == 0.0) return p.mu;
  const double shape = p.shape();
  double g;
  if (shape >= 1.0) {
    g = gamma_detail::unit_gamma_ge1(s, shape);
  } else {
    g = gamma_detail::unit_gamma_ge1(s, shape + 1.0) * std::pow(s.uniform_open0(), 1.0 / shape);
  }
  const double draw = g * p.scale();
  // Underflow for extreme shapes would break the positive-support contract.
  return draw > 0.0 ? draw : std::numeric_limits<double>::min();
}

/// n_steps i.i.d. Normal(0, amplitude^2) values: white noise held constant
/// over each time step.
inline std::vector<double> sample_white_noise(RandomStream& s, std::size_t n_steps, double amplitude) {
  if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) {
    throw InvalidParams("white noise amplitude must be non-negative");
  }
  std::vector<double> out(n_steps, 0.0);
  if (amplitude == 0.0) return out;
  for (double& v : out) v = amplitude * s.normal();
  return out;
}

}  // namespace mcpar
