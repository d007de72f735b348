#pragma once

// Run artifacts: moments.csv, samples.{bin,csv}, report.json, histogram and
// residue files. Every file is written to a temporary sibling and renamed
// into place, so a reader sees either the whole file or nothing.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "mcpar/cost.hpp"
#include "mcpar/engine.hpp"
#include "mcpar/errors.hpp"
#include "mcpar/stats.hpp"

namespace mcpar {

/// Shortest decimal text that round-trips to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline void atomic_write(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error("failed writing " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

inline std::string moments_csv(const MergedResult& merged) {
  std::string out = "channel_index,time,mean,std\n";
  for (std::size_t i = 0; i < merged.channel_moments.size(); ++i) {
    const auto& m = merged.channel_moments[i];
    const double t = i < merged.channel_times.size() ? merged.channel_times[i] : 0.0;
    const double sd = m.count >= 2 ? std_of(m) : std::nan("");
    out += std::to_string(i);
    out += ',';
    out += format_double(t);
    out += ',';
    out += format_double(m.mean);
    out += ',';
    out += format_double(sd);
    out += '\n';
  }
  return out;
}

enum class SamplesFormat { bin, csv };

inline std::filesystem::path write_samples(const std::filesystem::path& dir, std::span<const double> samples,
                                           SamplesFormat format) {
  if (format == SamplesFormat::bin) {
    const auto path = dir / "samples.bin";
    atomic_write(path, std::string_view(reinterpret_cast<const char*>(samples.data()), samples.size_bytes()));
    return path;
  }
  std::string out = "sample_index,value\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += format_double(samples[i]);
    out += '\n';
  }
  const auto path = dir / "samples.csv";
  atomic_write(path, out);
  return path;
}

inline std::vector<double> read_samples_bin(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  const auto size = std::filesystem::file_size(path);
  if (size % sizeof(double) != 0) throw Error(path.string() + " is not a whole number of doubles");
  std::vector<double> out(size / sizeof(double));
  in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(size));
  return out;
}

/// FNV-1a over the raw bytes of the merged accumulators and samples; equal
/// checksums across worker counts witness bit-identical results.
inline std::uint64_t moments_checksum(const MergedResult& merged) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& m : merged.channel_moments) {
    mix(&m.count, sizeof m.count);
    mix(&m.mean, sizeof m.mean);
    mix(&m.m2, sizeof m.m2);
  }
  mix(merged.tracked_samples.data(), merged.tracked_samples.size() * sizeof(double));
  return h;
}

inline nlohmann::json timing_json(const TimingBreakdown& t) {
  return {{"split_ms", t.split_ms},   {"process_ms", t.process_ms}, {"merge_ms", t.merge_ms},
          {"total_ms", t.total_ms},   {"n_tasks", t.n_tasks},       {"n_workers", t.n_workers}};
}

inline nlohmann::json report_json(const MergedResult& merged, const RunConfig& config, const PriceSheet& prices) {
  const double serial_ms =
      merged.execution.mean_task_ms > 0.0 ? extrapolate_serial(merged.execution.mean_task_ms, merged.timing.n_tasks)
                                          : 0.0;
  const double sp = merged.timing.total_ms > 0.0 ? speedup(serial_ms, merged.timing.total_ms) : 0.0;
  const std::uint64_t peak = merged.storage.intermediate_bytes;
  nlohmann::json j;
  j["base_seed"] = config.base_seed;
  j["n_mc"] = config.n_mc;
  j["n_serial"] = config.n_serial;
  j["n_tasks"] = merged.timing.n_tasks;
  j["n_workers"] = merged.timing.n_workers;
  j["problem"] = std::holds_alternative<BarConfig>(config.problem) ? "bar" : "toy";
  j["timing"] = timing_json(merged.timing);
  j["serial_ms_extrapolated"] = serial_ms;
  j["mean_task_ms"] = merged.execution.mean_task_ms;
  j["speedup"] = sp;
  j["execution"] = {{"leases", merged.execution.leases},
                    {"executions", merged.execution.executions},
                    {"requeued", merged.execution.requeued},
                    {"duplicates_discarded", merged.execution.duplicates_discarded}};
  j["storage"] = {{"intermediate_bytes", peak},
                  {"merged_bytes", merged.storage.merged_bytes},
                  {"space_mb", static_cast<double>(peak) / kBytesPerMB}};
  j["cost"] = {{"estimated", estimate_cost(merged.timing, peak, 0, prices)},
               {"vm_hour_price", prices.vm_hour_price},
               {"storage_price", prices.storage_price},
               {"egress_price", prices.egress_price},
               {"billing", prices.billing == Billing::hourly ? "hourly" : "fractional"}};
  j["moments_checksum"] = moments_checksum(merged);
  return j;
}

/// Writes moments.csv, the samples file and report.json into `dir`.
inline void write_run_outputs(const std::filesystem::path& dir, const MergedResult& merged, const RunConfig& config,
                              const PriceSheet& prices, SamplesFormat format) {
  atomic_write(dir / "moments.csv", moments_csv(merged));
  write_samples(dir, merged.tracked_samples, format);
  atomic_write(dir / "report.json", report_json(merged, config, prices).dump(2) + "\n");
}

inline std::string histogram_csv(const Histogram& h) {
  std::string out = "bin_center,density\n";
  for (std::size_t i = 0; i < h.density.size(); ++i) {
    out += format_double(h.spec.bin_center(i));
    out += ',';
    out += format_double(h.density[i]);
    out += '\n';
  }
  return out;
}

inline nlohmann::json residue_json(const ResidueReport& r) {
  return {{"quantity", to_string(r.quantity)}, {"n_small", r.n_small},     {"n_large", r.n_large},
          {"residue", r.residue},              {"tolerance", r.tolerance}, {"converged", r.converged}};
}

inline std::string series_residue_csv(std::span<const double> times, const ResidueReport& r) {
  std::string out = "time,residue\n";
  for (std::size_t i = 0; i < r.series.size(); ++i) {
    out += format_double(i < times.size() ? times[i] : static_cast<double>(i));
    out += ',';
    out += format_double(r.series[i]);
    out += '\n';
  }
  return out;
}

}  // namespace mcpar
