#pragma once

// Storage-lean statistics: single-pass moment accumulators that merge
// pairwise, fixed-bin density estimates, and the n-vs-4n residues used as a
// Monte Carlo convergence diagnostic.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mcpar/errors.hpp"

namespace mcpar {

/// Count, mean and centered sum of squares of a sample. This triple is all a
/// task has to keep per output channel; any two accumulators can be merged
/// exactly into the accumulator of the concatenated sample.
struct MomentAccumulator {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  /// Welford update in place. Throws NonFiniteSample for NaN or infinities.
  void add(double x) {
    if (!std::isfinite(x)) {
      throw NonFiniteSample("non-finite sample " + std::to_string(x));
    }
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }

  friend bool operator==(const MomentAccumulator&, const MomentAccumulator&) = default;
};

inline MomentAccumulator welford_update(MomentAccumulator acc, double x) {
  acc.add(x);
  return acc;
}

/// Combines the accumulators of two disjoint samples (Chan et al. pairwise
/// formula). The empty accumulator is a two-sided identity.
inline MomentAccumulator welford_merge(const MomentAccumulator& a, const MomentAccumulator& b) {
  if (b.count == 0) return a;
  if (a.count == 0) return b;
  const double na = static_cast<double>(a.count);
  const double nb = static_cast<double>(b.count);
  const double n = na + nb;
  const double delta = b.mean - a.mean;
  MomentAccumulator out;
  out.count = a.count + b.count;
  out.mean = a.mean + delta * (nb / n);
  out.m2 = a.m2 + b.m2 + delta * delta * (na * nb / n);
  return out;
}

inline double mean_of(const MomentAccumulator& acc) {
  if (acc.count < 1) throw InsufficientSamples("mean needs at least one sample");
  return acc.mean;
}

/// Sample standard deviation with the unbiased (n - 1) convention.
inline double std_of(const MomentAccumulator& acc) {
  if (acc.count < 2) throw InsufficientSamples("standard deviation needs at least two samples");
  return std::sqrt(acc.m2 / static_cast<double>(acc.count - 1));
}

inline MomentAccumulator accumulate(std::span<const double> samples) {
  MomentAccumulator acc;
  for (double x : samples) acc.add(x);
  return acc;
}

/// Rescales a sample to zero mean and unit (unbiased) standard deviation.
inline std::vector<double> normalize_samples(std::span<const double> samples) {
  if (samples.size() < 2) throw InsufficientSamples("normalization needs at least two samples");
  const MomentAccumulator acc = accumulate(samples);
  const double sd = std_of(acc);
  if (sd == 0.0) throw DegenerateSample("sample has zero variance");
  std::vector<double> out;
  out.reserve(samples.size());
  for (double x : samples) out.push_back((x - acc.mean) / sd);
  return out;
}

struct HistogramSpec {
  double lower_edge = -5.0;
  double upper_edge = 5.0;
  std::size_t n_bins = 100;

  double bin_width() const { return (upper_edge - lower_edge) / static_cast<double>(n_bins); }
  double bin_center(std::size_t i) const {
    return lower_edge + (static_cast<double>(i) + 0.5) * bin_width();
  }
  void validate() const {
    if (!(lower_edge < upper_edge) || !std::isfinite(lower_edge) || !std::isfinite(upper_edge)) {
      throw ConfigError("histogram needs finite lower_edge < upper_edge");
    }
    if (n_bins < 1) throw ConfigError("histogram needs at least one bin");
  }

  friend bool operator==(const HistogramSpec&, const HistogramSpec&) = default;
};

struct Histogram {
  HistogramSpec spec;
  std::vector<std::uint64_t> counts;
  std::vector<double> density;
  std::uint64_t n_total = 0;
  std::uint64_t n_out_of_range = 0;
};

/// Normalized histogram over fixed bins. Bins are half-open [e_i, e_{i+1})
/// except the last, which also takes the upper edge. Samples outside the
/// range count towards n_total and n_out_of_range but no bin, so the density
/// integrates to the in-range fraction.
inline Histogram build_histogram(std::span<const double> samples, const HistogramSpec& spec) {
  spec.validate();
  Histogram h;
  h.spec = spec;
  h.counts.assign(spec.n_bins, 0);
  h.density.assign(spec.n_bins, 0.0);
  const double width = spec.bin_width();
  for (double x : samples) {
    if (!std::isfinite(x)) throw NonFiniteSample("non-finite sample in histogram input");
    ++h.n_total;
    if (x < spec.lower_edge || x > spec.upper_edge) {
      ++h.n_out_of_range;
      continue;
    }
    auto bin = static_cast<std::size_t>(std::floor((x - spec.lower_edge) / width));
    bin = std::min(bin, spec.n_bins - 1);
    ++h.counts[bin];
  }
  if (h.n_total > 0) {
    const double scale = 1.0 / (static_cast<double>(h.n_total) * width);
    for (std::size_t i = 0; i < spec.n_bins; ++i) {
      h.density[i] = static_cast<double>(h.counts[i]) * scale;
    }
  }
  return h;
}

enum class ResidueQuantity { pdf, mean, std };

inline const char* to_string(ResidueQuantity q) {
  switch (q) {
    case ResidueQuantity::pdf:
      return "pdf";
    case ResidueQuantity::mean:
      return "mean";
    case ResidueQuantity::std:
      return "std";
  }
  return "unknown";
}

/// Difference between an n-sample and a 4n-sample estimate. `residue` is the
/// sup norm; `series` holds the pointwise values for mean/std time series.
struct ResidueReport {
  ResidueQuantity quantity = ResidueQuantity::pdf;
  std::uint64_t n_small = 0;
  std::uint64_t n_large = 0;
  double residue = 0.0;
  std::vector<double> series;
  double tolerance = 0.05;
  bool converged = false;
};

inline ResidueReport pdf_residue(const Histogram& h_small, const Histogram& h_large, double epsilon) {
  if (!(h_small.spec == h_large.spec) || h_small.density.size() != h_large.density.size()) {
    throw SpecMismatch("pdf residue needs histograms on identical bins");
  }
  ResidueReport r;
  r.quantity = ResidueQuantity::pdf;
  r.n_small = h_small.n_total;
  r.n_large = h_large.n_total;
  r.tolerance = epsilon;
  for (std::size_t i = 0; i < h_small.density.size(); ++i) {
    r.residue = std::max(r.residue, std::abs(h_large.density[i] - h_small.density[i]));
  }
  r.converged = r.residue < epsilon;
  return r;
}

inline std::vector<double> series_residue(std::span<const double> stat_small,
                                          std::span<const double> stat_large) {
  if (stat_small.size() != stat_large.size()) {
    throw LengthMismatch("residue series have different lengths (" +
                         std::to_string(stat_small.size()) + " vs " +
                         std::to_string(stat_large.size()) + ")");
  }
  std::vector<double> out(stat_small.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(stat_large[i] - stat_small[i]);
  return out;
}

inline ResidueReport series_residue_report(ResidueQuantity quantity, std::span<const double> stat_small,
                                           std::span<const double> stat_large, std::uint64_t n_small,
                                           std::uint64_t n_large, double epsilon) {
  ResidueReport r;
  r.quantity = quantity;
  r.n_small = n_small;
  r.n_large = n_large;
  r.tolerance = epsilon;
  r.series = series_residue(stat_small, stat_large);
  for (double v : r.series) r.residue = std::max(r.residue, v);
  r.converged = r.residue < epsilon;
  return r;
}

}  // namespace mcpar
