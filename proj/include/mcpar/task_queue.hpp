#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mcpar/errors.hpp"
#include "mcpar/random.hpp"

namespace mcpar {

using Clock = std::chrono::steady_clock;

/// A batch of consecutive realizations sharing one random stream.
struct TaskSpec {
  std::size_t task_index = 0;
  std::size_t n_realizations = 0;
  StreamId stream_id;

  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

enum class TaskState { pending, leased, done };

struct QueueEntry {
  TaskSpec spec;
  TaskState state = TaskState::pending;
  Clock::time_point deadline{};
  std::size_t leased_by = 0;
  unsigned attempts = 0;
};

/// What a worker receives from acquire(): the task plus which attempt this
/// is (1 for the first lease).
struct Lease {
  TaskSpec spec;
  unsigned attempt = 0;
  Clock::time_point deadline{};
};

struct QueueCounters {
  std::size_t leases = 0;
  std::size_t requeued = 0;
  std::size_t duplicates_discarded = 0;
};

/// In-memory task queue with time-limited leases. A lease that is not
/// completed before its deadline goes back to Pending on the next
/// expire_leases() call. The first completion of a task wins; later ones
/// are discarded. Result must expose a `task_index` member.
template <class Result>
class TaskQueue {
 public:
  TaskQueue(std::vector<TaskSpec> specs, std::chrono::milliseconds lease_duration)
      : lease_duration_(lease_duration) {
    if (lease_duration_.count() <= 0) throw ConfigError("lease duration must be positive");
    entries_.reserve(specs.size());
    results_.resize(specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (specs[i].task_index != i) throw ConfigError("task indices must be contiguous from 0");
      entries_.push_back(QueueEntry{std::move(specs[i])});
      pending_.insert(i);
    }
  }

  TaskQueue(const TaskQueue&) = delete;
  TaskQueue& operator=(const TaskQueue&) = delete;

  /// Leases the lowest-index Pending task, or returns nullopt if none is
  /// Pending (some may still be Leased).
  std::optional<Lease> acquire(std::size_t worker_id, Clock::time_point now) {
    std::lock_guard lock(mutex_);
    if (pending_.empty()) return std::nullopt;
    const std::size_t idx = *pending_.begin();
    pending_.erase(pending_.begin());
    QueueEntry& e = entries_[idx];
    e.state = TaskState::leased;
    e.deadline = now + lease_duration_;
    e.leased_by = worker_id;
    ++e.attempts;
    ++counters_.leases;
    return Lease{e.spec, e.attempts, e.deadline};
  }

  /// Returns every Leased entry whose deadline is strictly before `now` to
  /// Pending. Done entries are never touched.
  std::size_t expire_leases(Clock::time_point now) {
    std::size_t n = 0;
    {
      std::lock_guard lock(mutex_);
      for (QueueEntry& e : entries_) {
        if (e.state == TaskState::leased && e.deadline < now) {
          e.state = TaskState::pending;
          pending_.insert(e.spec.task_index);
          ++n;
        }
      }
      counters_.requeued += n;
      if (n > 0) ++version_;
    }
    if (n > 0) changed_.notify_all();
    return n;
  }

  /// Stores the result and marks the task Done. Returns false, leaving the
  /// stored result untouched, if the task was already Done.
  bool complete(Result result) {
    bool accepted = false;
    {
      std::lock_guard lock(mutex_);
      const std::size_t idx = result.task_index;
      if (idx >= entries_.size()) {
        throw UnknownTask("task index " + std::to_string(idx) + " out of range [0, " +
                          std::to_string(entries_.size()) + ")");
      }
      QueueEntry& e = entries_[idx];
      if (e.state == TaskState::done) {
        ++counters_.duplicates_discarded;
        return false;
      }
      if (e.state == TaskState::pending) pending_.erase(idx);
      e.state = TaskState::done;
      results_[idx] = std::move(result);
      ++done_;
      ++version_;
      accepted = true;
    }
    changed_.notify_all();
    return accepted;
  }

  /// Blocks until the queue changes or `timeout` elapses.
  template <class Rep, class Period>
  void wait_for_change(std::chrono::duration<Rep, Period> timeout) {
    std::unique_lock lock(mutex_);
    const std::uint64_t seen = version_;
    changed_.wait_for(lock, timeout,
                      [&] { return version_ != seen || interrupted_ || done_ == entries_.size(); });
  }

  /// Wakes every waiter; used when a run aborts.
  void interrupt() {
    {
      std::lock_guard lock(mutex_);
      interrupted_ = true;
    }
    changed_.notify_all();
  }

  bool all_done() const {
    std::lock_guard lock(mutex_);
    return done_ == entries_.size();
  }

  std::size_t size() const noexcept { return entries_.size(); }

  QueueEntry entry(std::size_t idx) const {
    std::lock_guard lock(mutex_);
    return entries_.at(idx);
  }

  QueueCounters counters() const {
    std::lock_guard lock(mutex_);
    return counters_;
  }

  /// Moves out the stored results in task order. Only valid once all_done().
  std::vector<Result> take_results() {
    std::lock_guard lock(mutex_);
    if (done_ != entries_.size()) throw MissingTask("queue still has unfinished tasks");
    std::vector<Result> out;
    out.reserve(results_.size());
    for (auto& r : results_) out.push_back(std::move(*r));
    results_.clear();
    return out;
  }

 private:
  std::chrono::milliseconds lease_duration_;
  mutable std::mutex mutex_;
  std::condition_variable changed_;
  std::vector<QueueEntry> entries_;
  std::vector<std::optional<Result>> results_;
  std::set<std::size_t> pending_;
  std::size_t done_ = 0;
  std::uint64_t version_ = 0;
  bool interrupted_ = false;
  QueueCounters counters_;
};

}  // namespace mcpar
