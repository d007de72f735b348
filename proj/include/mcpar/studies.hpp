#pragma once

// Multi-run studies: the n -> 4n convergence protocol and the worker-count
// speedup sweep.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mcpar/config.hpp"
#include "mcpar/cost.hpp"
#include "mcpar/engine.hpp"
#include "mcpar/errors.hpp"
#include "mcpar/io.hpp"
#include "mcpar/stats.hpp"

namespace mcpar {

/// Sample counts must each be four times the previous one and divisible by
/// n_serial.
inline void validate_quadrupling(std::span<const std::uint64_t> n_list, std::uint64_t n_serial) {
  if (n_list.empty()) throw ConfigError("sample-count list is empty");
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    if (n_list[i] == 0 || n_serial == 0 || n_list[i] % n_serial != 0) {
      throw ConfigError("sample count " + std::to_string(n_list[i]) + " is not a positive multiple of n_serial (" +
                        std::to_string(n_serial) + ")");
    }
    if (i > 0 && n_list[i] != 4 * n_list[i - 1]) {
      throw ConfigError("sample counts must quadruple: " + std::to_string(n_list[i]) + " follows " +
                        std::to_string(n_list[i - 1]));
    }
  }
}

struct ConvergenceRun {
  std::uint64_t n_mc = 0;
  MergedResult merged;
  Histogram histogram;  // of the normalized tracked samples
  std::vector<double> mean_series;
  std::vector<double> std_series;
};

struct ConvergenceStep {
  ResidueReport pdf;
  ResidueReport mean;
  ResidueReport std;
};

struct ConvergenceStudy {
  std::vector<ConvergenceRun> runs;
  std::vector<ConvergenceStep> steps;  // steps[i] compares runs[i] and runs[i + 1]
};

/// One campaign per sample count, all on the same base seed, so each run's
/// sample set is a prefix of the next one's. Histograms share the configured
/// bins. `on_run` sees every run as soon as it is finished.
inline ConvergenceStudy run_convergence_study(const CampaignConfig& campaign, std::span<const std::uint64_t> n_list,
                                              const EngineOptions& options = {},
                                              const std::function<void(const ConvergenceRun&)>& on_run = {}) {
  validate_quadrupling(n_list, campaign.run.n_serial);
  ConvergenceStudy study;
  for (std::uint64_t n : n_list) {
    RunConfig cfg = campaign.run;
    cfg.n_mc = n;
    ConvergenceRun r;
    r.n_mc = n;
    r.merged = run(cfg, options);
    r.histogram = build_histogram(normalize_samples(r.merged.tracked_samples), cfg.histogram_spec);
    r.mean_series.reserve(r.merged.channel_moments.size());
    r.std_series.reserve(r.merged.channel_moments.size());
    for (const auto& m : r.merged.channel_moments) {
      r.mean_series.push_back(mean_of(m));
      r.std_series.push_back(std_of(m));
    }
    if (on_run) on_run(r);
    study.runs.push_back(std::move(r));
  }
  for (std::size_t i = 0; i + 1 < study.runs.size(); ++i) {
    const auto& small = study.runs[i];
    const auto& large = study.runs[i + 1];
    ConvergenceStep step;
    step.pdf = pdf_residue(small.histogram, large.histogram, campaign.tolerance);
    step.mean = series_residue_report(ResidueQuantity::mean, small.mean_series, large.mean_series, small.n_mc,
                                      large.n_mc, campaign.tolerance);
    step.std = series_residue_report(ResidueQuantity::std, small.std_series, large.std_series, small.n_mc,
                                     large.n_mc, campaign.tolerance);
    study.steps.push_back(std::move(step));
  }
  return study;
}

/// Serial baseline: the mean wall time of task 0 over `repetitions` runs,
/// extrapolated to all tasks.
inline double measure_serial_baseline(const RunConfig& config, int repetitions = 10) {
  if (repetitions < 1) throw ConfigError("repetitions must be positive");
  const auto specs = split(config);
  return with_problem(config, [&](const auto& problem) {
    double total = 0.0;
    for (int i = 0; i < repetitions; ++i) total += execute_task(problem, specs.front()).wall_time.count();
    return extrapolate_serial(total / repetitions, specs.size());
  });
}

struct SpeedupRow {
  std::size_t workers = 0;
  TimingBreakdown timing;
  double serial_ms = 0.0;
  double speedup = 0.0;
  std::uint64_t checksum = 0;
};

/// Runs the same campaign once per worker count. Throws InvarianceViolation
/// if any two runs disagree on the merged statistics.
inline std::vector<SpeedupRow> run_speedup_study(const RunConfig& config, std::span<const std::size_t> worker_list,
                                                 int baseline_repetitions = 10) {
  if (worker_list.empty()) throw ConfigError("worker list is empty");
  for (std::size_t w : worker_list) {
    if (w < 1) throw ConfigError("worker counts must be at least 1");
  }
  config.validate();
  const double serial_ms = measure_serial_baseline(config, baseline_repetitions);
  std::vector<SpeedupRow> rows;
  for (std::size_t w : worker_list) {
    RunConfig cfg = config;
    cfg.n_workers = w;
    const MergedResult merged = run(cfg);
    SpeedupRow row;
    row.workers = w;
    row.timing = merged.timing;
    row.serial_ms = serial_ms;
    row.speedup = speedup(serial_ms, merged.timing.total_ms);
    row.checksum = moments_checksum(merged);
    if (!rows.empty() && row.checksum != rows.front().checksum) {
      throw InvarianceViolation("merged moments with " + std::to_string(w) + " workers differ from the run with " +
                                std::to_string(rows.front().workers));
    }
    rows.push_back(row);
  }
  return rows;
}

inline std::string speedup_csv(std::span<const SpeedupRow> rows) {
  std::string out = "workers,total_ms,process_ms,serial_ms,speedup\n";
  for (const auto& r : rows) {
    out += std::to_string(r.workers) + ',' + format_double(r.timing.total_ms) + ',' +
           format_double(r.timing.process_ms) + ',' + format_double(r.serial_ms) + ',' + format_double(r.speedup) +
           '\n';
  }
  return out;
}

}  // namespace mcpar
