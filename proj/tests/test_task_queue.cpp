#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <mutex>
#include <set>
#include <thread>
#include <vector>

#include "mcpar/task_queue.hpp"

using namespace mcpar;
using namespace std::chrono_literals;

namespace {

struct Done {
  std::size_t task_index = 0;
  int payload = 0;
};

std::vector<TaskSpec> specs(std::size_t n) {
  std::vector<TaskSpec> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(TaskSpec{i, 1, StreamId{0, i}});
  return out;
}

}  // namespace

TEST(TaskQueue, LowestPendingFirst) {
  TaskQueue<Done> q(specs(2), 1000ms);
  const auto t = Clock::now();
  const auto a = q.acquire(0, t);
  ASSERT_TRUE(a);
  EXPECT_EQ(a->spec.task_index, 0u);
  EXPECT_EQ(a->attempt, 1u);
  EXPECT_EQ(q.entry(0).state, TaskState::leased);
  EXPECT_EQ(q.entry(0).deadline, t + 1000ms);
  EXPECT_EQ(q.entry(1).state, TaskState::pending);
  EXPECT_EQ(q.acquire(1, t)->spec.task_index, 1u);
  EXPECT_FALSE(q.acquire(2, t));
}

TEST(TaskQueue, ExhaustedQueueReturnsNone) {
  TaskQueue<Done> q(specs(3), 1000ms);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_TRUE(q.complete(Done{i, 0}));
  EXPECT_TRUE(q.all_done());
  EXPECT_FALSE(q.acquire(0, Clock::now()));
}

TEST(TaskQueue, RequeuedTaskIsReacquiredBeforeHigherIndices) {
  TaskQueue<Done> q(specs(3), 10ms);
  const auto t = Clock::now();
  q.acquire(0, t);
  q.acquire(0, t);
  EXPECT_EQ(q.expire_leases(t + 11ms), 2u);
  const auto again = q.acquire(1, t + 11ms);
  EXPECT_EQ(again->spec.task_index, 0u);
  EXPECT_EQ(again->attempt, 2u);
}

TEST(TaskQueue, ExpiryIsStrict) {
  TaskQueue<Done> q(specs(1), 100ms);
  const auto t = Clock::now();
  q.acquire(0, t);
  const auto deadline = q.entry(0).deadline;
  EXPECT_EQ(q.expire_leases(deadline - 1ns), 0u);
  EXPECT_EQ(q.entry(0).state, TaskState::leased);
  EXPECT_EQ(q.expire_leases(deadline), 0u);
  EXPECT_EQ(q.expire_leases(deadline + 1ns), 1u);
  EXPECT_EQ(q.entry(0).state, TaskState::pending);
  EXPECT_EQ(q.counters().requeued, 1u);
}

TEST(TaskQueue, DoneIsTerminal) {
  TaskQueue<Done> q(specs(1), 10ms);
  const auto t = Clock::now();
  q.acquire(0, t);
  EXPECT_TRUE(q.complete(Done{0, 1}));
  EXPECT_EQ(q.expire_leases(t + 1h), 0u);
  EXPECT_EQ(q.entry(0).state, TaskState::done);
  EXPECT_FALSE(q.acquire(0, t + 1h));
}

TEST(TaskQueue, FirstCompletionWins) {
  TaskQueue<Done> q(specs(4), 10ms);
  EXPECT_TRUE(q.complete(Done{3, 111}));
  EXPECT_EQ(q.entry(3).state, TaskState::done);
  EXPECT_FALSE(q.complete(Done{3, 222}));
  EXPECT_EQ(q.counters().duplicates_discarded, 1u);
  for (std::size_t i = 0; i < 3; ++i) q.complete(Done{i, 0});
  const auto results = q.take_results();
  EXPECT_EQ(results[3].payload, 111);
}

TEST(TaskQueue, CompletionOfExpiredLeaseStillCounts) {
  TaskQueue<Done> q(specs(1), 10ms);
  const auto t = Clock::now();
  q.acquire(0, t);
  q.expire_leases(t + 1s);
  ASSERT_EQ(q.entry(0).state, TaskState::pending);
  EXPECT_TRUE(q.complete(Done{0, 5}));
  EXPECT_FALSE(q.acquire(0, t + 1s));
}

TEST(TaskQueue, UnknownTask) {
  TaskQueue<Done> q(specs(2), 10ms);
  EXPECT_THROW(q.complete(Done{2, 0}), UnknownTask);
}

TEST(TaskQueue, TakeResultsRequiresAllDone) {
  TaskQueue<Done> q(specs(2), 10ms);
  q.complete(Done{0, 0});
  EXPECT_THROW(q.take_results(), MissingTask);
}

TEST(TaskQueue, RejectsBadConstruction) {
  EXPECT_THROW(TaskQueue<Done>(specs(2), 0ms), ConfigError);
  auto s = specs(2);
  s[1].task_index = 5;
  EXPECT_THROW(TaskQueue<Done>(s, 10ms), ConfigError);
}

TEST(TaskQueue, ConcurrentAcquireNeverDuplicates) {
  constexpr std::size_t kTasks = 20000;
  TaskQueue<Done> q(specs(kTasks), 1h);
  std::mutex m;
  std::vector<std::size_t> seen;
  std::atomic<bool> go{false};
  std::vector<std::jthread> threads;
  for (std::size_t w = 0; w < 8; ++w) {
    threads.emplace_back([&, w] {
      while (!go.load()) std::this_thread::yield();
      std::vector<std::size_t> mine;
      while (auto l = q.acquire(w, Clock::now())) mine.push_back(l->spec.task_index);
      std::lock_guard lock(m);
      seen.insert(seen.end(), mine.begin(), mine.end());
    });
  }
  go.store(true);
  threads.clear();
  ASSERT_EQ(seen.size(), kTasks);
  EXPECT_EQ(std::set<std::size_t>(seen.begin(), seen.end()).size(), kTasks);
}

TEST(TaskQueue, ConcurrentCompleteAcceptsExactlyOnce) {
  constexpr std::size_t kTasks = 2000;
  TaskQueue<Done> q(specs(kTasks), 1h);
  std::atomic<std::size_t> accepted{0};
  {
    std::vector<std::jthread> threads;
    for (int w = 0; w < 4; ++w) {
      threads.emplace_back([&] {
        for (std::size_t i = 0; i < kTasks; ++i) accepted += q.complete(Done{i, 0});
      });
    }
  }
  EXPECT_EQ(accepted.load(), kTasks);
  EXPECT_EQ(q.counters().duplicates_discarded, 3 * kTasks);
  EXPECT_TRUE(q.all_done());
}

TEST(TaskQueue, WaitWakesOnCompletion) {
  TaskQueue<Done> q(specs(1), 1h);
  std::jthread t([&] {
    std::this_thread::sleep_for(20ms);
    q.complete(Done{0, 0});
  });
  const auto start = Clock::now();
  q.wait_for_change(10s);
  EXPECT_LT(Clock::now() - start, 5s);
}
