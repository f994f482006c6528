#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "coevo/evaluation.hpp"

namespace coevo::distrib {

struct QueueSettings {
  double task_timeout = 600.0;  // seconds a pulled task may stay in flight
  int max_retries = 2;          // attempts allowed: max_retries + 1
};

struct WorkerInfo {
  std::string worker_id;
  double last_seen = 0.0;
  int tasks_completed = 0;
};

// Point-in-time copy of the queue bookkeeping, for invariant checks.
struct QueueSnapshot {
  std::vector<std::string> pending;
  std::vector<std::string> in_flight;
  std::vector<std::string> done;       // accepted, not yet consumed
  std::vector<std::string> delivered;  // consumed through next_result
  std::map<std::string, int> attempts;
};

// Server-side completion service: submit many tasks, workers pull one at a
// time, results come back through a separate queue in completion order.
// Execution is at-least-once; delivery is exactly-once, first completion
// wins. All operations are atomic with respect to each other.
class CompletionService {
 public:
  using Clock = std::function<double()>;  // seconds

  explicit CompletionService(QueueSettings settings = {}, Clock clock = {});

  // False (queue unchanged) when the task_id was already submitted.
  bool submit(EvaluationTask task);

  std::optional<EvaluationTask> worker_pull(const std::string& worker_id);

  // True when the result was accepted. Duplicate, late and unknown returns
  // are discarded.
  bool worker_return(EvaluationResult result);

  // Pops one completed result, waiting until `deadline` (steady clock).
  std::optional<EvaluationResult> next_result(std::chrono::steady_clock::time_point deadline);
  std::optional<EvaluationResult> try_next_result();

  // Requeues expired in-flight tasks at the head of pending; tasks out of
  // attempts complete as failed. Returns the number requeued.
  std::size_t reap_timeouts();
  std::size_t reap_timeouts(double now);

  QueueSnapshot snapshot() const;
  std::size_t pending_count() const;
  std::size_t in_flight_count() const;
  std::size_t done_count() const;
  std::size_t discarded_returns() const;
  std::map<std::string, WorkerInfo> workers() const;
  const QueueSettings& settings() const { return settings_; }
  double now() const { return clock_(); }

 private:
  struct InFlight {
    EvaluationTask task;
    std::string worker_id;
    double deadline;
  };

  void complete_locked(EvaluationResult result);

  QueueSettings settings_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::condition_variable result_ready_;
  std::deque<EvaluationTask> pending_;
  std::map<std::string, InFlight> in_flight_;
  std::deque<EvaluationResult> done_;
  std::set<std::string> finished_;  // accepted results, consumed or not
  std::set<std::string> submitted_;
  std::map<std::string, int> attempts_;
  std::map<std::string, WorkerInfo> workers_;
  std::size_t discarded_ = 0;
};

}  // namespace coevo::distrib
