#pragma once

// Split / process / merge orchestration of a Monte Carlo campaign.
//
// split() cuts N_MC realizations into tasks of n_serial realizations, each
// with its own random stream. run() hands the tasks to a pool of worker
// threads through a lease-based TaskQueue, while a sweeper thread puts
// expired leases back in the queue. merge() folds the per-task moment
// accumulators along a fixed binary tree over task indices, so the merged
// statistics are bit-identical whatever the worker count or completion order.

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <concepts>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <exception>
#include <filesystem>
#include <mutex>
#include <random>
#include <set>
#include <span>
#include <stop_token>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "mcpar/bar.hpp"
#include "mcpar/cost.hpp"
#include "mcpar/errors.hpp"
#include "mcpar/random.hpp"
#include "mcpar/stats.hpp"
#include "mcpar/task_queue.hpp"
#include "mcpar/toy.hpp"

namespace mcpar {

using ProblemConfig = std::variant<ToyConfig, BarConfig>;

struct RunConfig {
  std::uint64_t n_mc = 16;
  std::uint64_t n_serial = 1;
  std::size_t n_workers = 1;
  std::uint64_t base_seed = 0;
  std::chrono::milliseconds lease_duration{60'000};
  ProblemConfig problem = ToyConfig{};
  HistogramSpec histogram_spec;
  std::filesystem::path output_dir = "mcpar_out";

  std::size_t n_tasks() const { return static_cast<std::size_t>(n_mc / n_serial); }

  void validate() const {
    if (n_mc < 1) throw ConfigError("n_mc must be at least 1");
    if (n_serial < 1) throw ConfigError("n_serial must be at least 1");
    if (n_workers < 1) throw ConfigError("n_workers must be at least 1");
    if (lease_duration.count() <= 0) throw ConfigError("lease_duration must be positive");
    if (n_mc % n_serial != 0) {
      throw ConfigError("n_mc (" + std::to_string(n_mc) + ") is not a multiple of n_serial (" +
                        std::to_string(n_serial) + ")");
    }
    histogram_spec.validate();
    if (const auto* bar = std::get_if<BarConfig>(&problem)) bar->validate();
  }
};

/// Value-typed output of one task: one accumulator per output channel and
/// the tracked scalar of every realization, in realization order.
struct TaskResult {
  std::size_t task_index = 0;
  std::vector<MomentAccumulator> channel_moments;
  std::vector<double> tracked_samples;
  std::chrono::duration<double, std::milli> wall_time{0};
  std::uint64_t bytes_written = 0;
};

struct StorageAccount {
  /// Sum of encoded task outputs held between process and merge.
  std::uint64_t intermediate_bytes = 0;
  /// Encoded size of what survives the merge.
  std::uint64_t merged_bytes = 0;
};

struct ExecutionStats {
  std::size_t leases = 0;
  std::size_t requeued = 0;
  std::size_t duplicates_discarded = 0;
  std::size_t executions = 0;
  double mean_task_ms = 0.0;
};

struct MergedResult {
  std::vector<MomentAccumulator> channel_moments;
  std::vector<double> channel_times;
  std::vector<double> tracked_samples;
  TimingBreakdown timing;
  StorageAccount storage;
  ExecutionStats execution;
  std::uint64_t base_seed = 0;
  std::uint64_t n_serial = 0;
};

// ---------------------------------------------------------------------------
// Intermediate encoding. Layout (little endian): task_index, channel count,
// sample count as u64; then per channel count:u64, mean:f64, m2:f64; then the
// samples as f64. Its size is what a task would leave on shared storage.

static_assert(std::endian::native == std::endian::little, "intermediate encoding assumes little endian");

inline std::uint64_t encoded_size(std::size_t n_channels, std::size_t n_samples) {
  return 3 * sizeof(std::uint64_t) + n_channels * (sizeof(std::uint64_t) + 2 * sizeof(double)) +
         n_samples * sizeof(double);
}

namespace codec_detail {
template <class T>
void put(std::vector<std::byte>& out, T v) {
  const auto* p = reinterpret_cast<const std::byte*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}
template <class T>
T get(std::span<const std::byte> in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw Error("truncated task result encoding");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}
}  // namespace codec_detail

inline std::vector<std::byte> encode_task_result(const TaskResult& r) {
  using codec_detail::put;
  std::vector<std::byte> out;
  out.reserve(encoded_size(r.channel_moments.size(), r.tracked_samples.size()));
  put<std::uint64_t>(out, r.task_index);
  put<std::uint64_t>(out, r.channel_moments.size());
  put<std::uint64_t>(out, r.tracked_samples.size());
  for (const auto& m : r.channel_moments) {
    put<std::uint64_t>(out, m.count);
    put<double>(out, m.mean);
    put<double>(out, m.m2);
  }
  for (double x : r.tracked_samples) put<double>(out, x);
  return out;
}

inline TaskResult decode_task_result(std::span<const std::byte> in) {
  using codec_detail::get;
  std::size_t pos = 0;
  TaskResult r;
  r.task_index = get<std::uint64_t>(in, pos);
  const auto n_channels = get<std::uint64_t>(in, pos);
  const auto n_samples = get<std::uint64_t>(in, pos);
  if (encoded_size(n_channels, n_samples) != in.size()) throw Error("task result encoding has wrong length");
  r.channel_moments.resize(n_channels);
  for (auto& m : r.channel_moments) {
    m.count = get<std::uint64_t>(in, pos);
    m.mean = get<double>(in, pos);
    m.m2 = get<double>(in, pos);
  }
  r.tracked_samples.resize(n_samples);
  for (double& x : r.tracked_samples) x = get<double>(in, pos);
  r.bytes_written = in.size();
  return r;
}

// ---------------------------------------------------------------------------

template <class P>
concept MonteCarloProblem = requires(const P& p, RandomStream& s, std::span<double> channels) {
  { p.channel_count() } -> std::convertible_to<std::size_t>;
  { p.channel_times() } -> std::convertible_to<std::vector<double>>;
  { p.realize(s, channels) } -> std::convertible_to<double>;
};

inline std::vector<TaskSpec> split(const RunConfig& config) {
  config.validate();
  const std::size_t n_tasks = config.n_tasks();
  std::vector<TaskSpec> specs;
  specs.reserve(n_tasks);
  for (std::size_t i = 0; i < n_tasks; ++i) {
    specs.push_back(TaskSpec{i, static_cast<std::size_t>(config.n_serial), StreamId{config.base_seed, i}});
  }
  return specs;
}

/// Runs the task's realizations serially on its own stream.
template <MonteCarloProblem P>
TaskResult execute_task(const P& problem, const TaskSpec& spec) {
  const auto start = Clock::now();
  RandomStream stream(spec.stream_id);
  const std::size_t n_channels = problem.channel_count();
  TaskResult result;
  result.task_index = spec.task_index;
  result.channel_moments.assign(n_channels, MomentAccumulator{});
  result.tracked_samples.reserve(spec.n_realizations);
  std::vector<double> channels(n_channels);
  for (std::size_t r = 0; r < spec.n_realizations; ++r) {
    try {
      const double tracked = problem.realize(stream, channels);
      if (!std::isfinite(tracked)) throw NonFiniteSample("tracked quantity is not finite");
      for (std::size_t c = 0; c < n_channels; ++c) result.channel_moments[c].add(channels[c]);
      result.tracked_samples.push_back(tracked);
    } catch (const std::exception& e) {
      throw ProblemError(spec.task_index, r, e.what());
    }
  }
  result.bytes_written = encoded_size(n_channels, result.tracked_samples.size());
  result.wall_time = Clock::now() - start;
  return result;
}

/// Combines exactly one result per task index. Accumulators are reduced
/// bottom-up over the index-sorted list, pairing (i, i + stride) with the
/// stride doubling each level, so the floating point operation order depends
/// only on N_tasks. The input results are consumed.
inline MergedResult merge(std::vector<TaskResult> results, const RunConfig& config) {
  const std::size_t n_tasks = config.n_tasks();
  std::sort(results.begin(), results.end(),
            [](const TaskResult& a, const TaskResult& b) { return a.task_index < b.task_index; });
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (i > 0 && results[i].task_index == results[i - 1].task_index) {
      throw DuplicateTask("task " + std::to_string(results[i].task_index) + " appears more than once");
    }
    if (results[i].task_index >= n_tasks) {
      throw UnknownTask("task index " + std::to_string(results[i].task_index) + " out of range");
    }
  }
  if (results.size() != n_tasks) {
    std::size_t expect = 0;
    for (const auto& r : results) {
      if (r.task_index != expect) break;
      ++expect;
    }
    throw MissingTask("task " + std::to_string(expect) + " has no result");
  }
  if (n_tasks == 0) throw MissingTask("nothing to merge");

  MergedResult merged;
  const std::size_t n_channels = results.front().channel_moments.size();
  double task_ms = 0.0;
  for (const auto& r : results) {
    if (r.channel_moments.size() != n_channels) throw Error("tasks disagree on the channel count");
    merged.storage.intermediate_bytes += r.bytes_written;
    task_ms += r.wall_time.count();
  }
  merged.execution.mean_task_ms = task_ms / static_cast<double>(n_tasks);

  merged.tracked_samples.reserve(config.n_mc);
  for (const auto& r : results) {
    merged.tracked_samples.insert(merged.tracked_samples.end(), r.tracked_samples.begin(), r.tracked_samples.end());
  }

  for (std::size_t stride = 1; stride < n_tasks; stride *= 2) {
    for (std::size_t i = 0; i + stride < n_tasks; i += 2 * stride) {
      auto& left = results[i].channel_moments;
      auto& right = results[i + stride].channel_moments;
      for (std::size_t c = 0; c < n_channels; ++c) left[c] = welford_merge(left[c], right[c]);
      right = {};
      results[i + stride].tracked_samples = {};
    }
  }
  merged.channel_moments = std::move(results.front().channel_moments);
  results.clear();
  merged.storage.merged_bytes = encoded_size(n_channels, merged.tracked_samples.size());
  merged.base_seed = config.base_seed;
  merged.n_serial = config.n_serial;
  merged.timing.n_tasks = n_tasks;
  merged.timing.n_workers = config.n_workers;
  return merged;
}

/// Test hook that perturbs the first attempt of selected tasks.
struct FaultPlan {
  /// The worker finishes the task but reports only after its lease has
  /// expired and the task was re-queued.
  std::set<std::size_t> stall;
  /// The worker silently drops the task, as if its machine died.
  std::set<std::size_t> abandon;
  /// The worker reports its completion twice.
  std::set<std::size_t> duplicate;

  bool empty() const { return stall.empty() && abandon.empty() && duplicate.empty(); }

  /// Picks round(fraction * n_tasks) distinct tasks for each fault kind.
  static FaultPlan random(std::size_t n_tasks, double fraction, std::uint64_t seed) {
    FaultPlan plan;
    std::mt19937_64 gen(seed);
    std::vector<std::size_t> idx(n_tasks);
    for (std::size_t i = 0; i < n_tasks; ++i) idx[i] = i;
    const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n_tasks)));
    for (auto* bucket : {&plan.stall, &plan.abandon, &plan.duplicate}) {
      std::shuffle(idx.begin(), idx.end(), gen);
      bucket->insert(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(std::min(k, n_tasks)));
    }
    return plan;
  }
};

struct EngineOptions {
  FaultPlan faults;
};

inline std::chrono::milliseconds sweep_period(std::chrono::milliseconds lease) {
  return std::max(lease / 4, std::chrono::milliseconds(10));
}

/// Full split / process / merge pipeline for one problem.
template <MonteCarloProblem P>
MergedResult run_campaign(const P& problem, const RunConfig& config, const EngineOptions& options = {}) {
  using ms = std::chrono::duration<double, std::milli>;
  const auto t0 = Clock::now();
  TaskQueue<TaskResult> queue(split(config), config.lease_duration);
  const auto t1 = Clock::now();

  const auto period = sweep_period(config.lease_duration);
  std::atomic<bool> abort{false};
  std::atomic<std::size_t> executions{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto worker = [&](std::size_t worker_id) {
    try {
      while (!abort.load()) {
        auto lease = queue.acquire(worker_id, Clock::now());
        if (!lease) {
          if (queue.all_done()) return;
          queue.wait_for_change(period);
          continue;
        }
        const std::size_t idx = lease->spec.task_index;
        const bool first = lease->attempt == 1;
        if (first && options.faults.abandon.contains(idx)) continue;
        TaskResult result = execute_task(problem, lease->spec);
        executions.fetch_add(1);
        if (first && options.faults.stall.contains(idx)) {
          // Hold the result until the sweeper has certainly re-queued it.
          while (!abort.load() && Clock::now() <= lease->deadline + 2 * period) {
            std::this_thread::sleep_for(period / 2);
          }
        }
        if (first && options.faults.duplicate.contains(idx)) queue.complete(result);
        queue.complete(std::move(result));
      }
    } catch (...) {
      {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
      abort.store(true);
      queue.interrupt();
    }
  };

  {
    std::jthread sweeper([&](std::stop_token stop) {
      std::mutex m;
      std::condition_variable_any cv;
      std::unique_lock lock(m);
      while (!stop.stop_requested()) {
        queue.expire_leases(Clock::now());
        cv.wait_for(lock, stop, period, [] { return false; });
      }
    });
    std::vector<std::jthread> workers;
    workers.reserve(config.n_workers);
    for (std::size_t w = 0; w < config.n_workers; ++w) workers.emplace_back(worker, w);
    workers.clear();  // joins
    sweeper.request_stop();
  }
  if (first_error) std::rethrow_exception(first_error);
  const auto t2 = Clock::now();

  MergedResult merged = merge(queue.take_results(), config);
  merged.channel_times = problem.channel_times();
  const auto t3 = Clock::now();

  const auto counters = queue.counters();
  merged.execution.leases = counters.leases;
  merged.execution.requeued = counters.requeued;
  merged.execution.duplicates_discarded = counters.duplicates_discarded;
  merged.execution.executions = executions.load();
  merged.timing.split_ms = ms(t1 - t0).count();
  merged.timing.process_ms = ms(t2 - t1).count();
  merged.timing.merge_ms = ms(t3 - t2).count();
  merged.timing.total_ms = merged.timing.split_ms + merged.timing.process_ms + merged.timing.merge_ms;
  return merged;
}

/// Builds the problem named by `config.problem` and passes it to `f`.
template <class F>
decltype(auto) with_problem(const RunConfig& config, F&& f) {
  return std::visit(
      [&](const auto& problem_cfg) -> decltype(auto) {
        using Cfg = std::decay_t<decltype(problem_cfg)>;
        if constexpr (std::is_same_v<Cfg, ToyConfig>) {
          return f(ToyDigitSquareProblem(problem_cfg));
        } else {
          return f(BarProblem(problem_cfg));
        }
      },
      config.problem);
}

/// Runs the campaign described by `config.problem`.
inline MergedResult run(const RunConfig& config, const EngineOptions& options = {}) {
  config.validate();
  return with_problem(config, [&](const auto& problem) { return run_campaign(problem, config, options); });
}

}  // namespace mcpar
