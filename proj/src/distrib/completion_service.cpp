#include "coevo/distrib/completion_service.hpp"

#include <algorithm>

#include "coevo/log.hpp"

namespace coevo::distrib {

namespace {

double steady_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

}  // namespace

CompletionService::CompletionService(QueueSettings settings, Clock clock)
    : settings_(settings), clock_(clock ? std::move(clock) : Clock(steady_seconds)) {}

bool CompletionService::submit(EvaluationTask task) {
  std::lock_guard lock(mutex_);
  if (!submitted_.insert(task.task_id).second) return false;
  task.submitted_at = clock_();
  attempts_[task.task_id] = 0;
  pending_.push_back(std::move(task));
  return true;
}

std::optional<EvaluationTask> CompletionService::worker_pull(const std::string& worker_id) {
  std::lock_guard lock(mutex_);
  const double now = clock_();
  auto& info = workers_[worker_id];
  info.worker_id = worker_id;
  info.last_seen = now;
  if (pending_.empty()) return std::nullopt;
  EvaluationTask task = std::move(pending_.front());
  pending_.pop_front();
  ++attempts_[task.task_id];
  in_flight_[task.task_id] = InFlight{task, worker_id, now + settings_.task_timeout};
  return task;
}

void CompletionService::complete_locked(EvaluationResult result) {
  finished_.insert(result.task_id);
  done_.push_back(std::move(result));
  result_ready_.notify_one();
}

bool CompletionService::worker_return(EvaluationResult result) {
  std::lock_guard lock(mutex_);
  if (!result.worker_id.empty()) {
    auto& info = workers_[result.worker_id];
    info.worker_id = result.worker_id;
    info.last_seen = clock_();
  }
  const std::string& id = result.task_id;
  if (!submitted_.contains(id)) {
    ++discarded_;
    log::warn("discarding result for unknown task '{}'", id);
    return false;
  }
  if (finished_.contains(id)) {
    ++discarded_;
    log::debug("discarding duplicate result for task '{}'", id);
    return false;
  }
  // A late return for a task that was reaped and requeued still wins if it
  // is the first completion.
  if (in_flight_.erase(id) == 0) {
    auto it = std::find_if(pending_.begin(), pending_.end(),
                           [&](const EvaluationTask& t) { return t.task_id == id; });
    if (it != pending_.end()) pending_.erase(it);
  }
  if (!result.worker_id.empty()) ++workers_[result.worker_id].tasks_completed;
  complete_locked(std::move(result));
  return true;
}

std::optional<EvaluationResult> CompletionService::next_result(
    std::chrono::steady_clock::time_point deadline) {
  std::unique_lock lock(mutex_);
  if (!result_ready_.wait_until(lock, deadline, [&] { return !done_.empty(); })) return std::nullopt;
  EvaluationResult r = std::move(done_.front());
  done_.pop_front();
  return r;
}

std::optional<EvaluationResult> CompletionService::try_next_result() {
  std::lock_guard lock(mutex_);
  if (done_.empty()) return std::nullopt;
  EvaluationResult r = std::move(done_.front());
  done_.pop_front();
  return r;
}

std::size_t CompletionService::reap_timeouts() { return reap_timeouts(clock_()); }

std::size_t CompletionService::reap_timeouts(double now) {
  std::lock_guard lock(mutex_);
  std::vector<std::string> expired;
  for (const auto& [id, f] : in_flight_)
    if (f.deadline <= now) expired.push_back(id);
  std::size_t requeued = 0;
  // Reverse so the earliest-expiring ids end up first at the head.
  for (auto it = expired.rbegin(); it != expired.rend(); ++it) {
    auto node = in_flight_.extract(*it);
    InFlight f = std::move(node.mapped());
    if (attempts_[*it] < settings_.max_retries + 1) {
      log::info("task '{}' timed out on worker '{}', requeued", *it, f.worker_id);
      pending_.push_front(std::move(f.task));
      ++requeued;
    } else {
      log::warn("task '{}' exhausted {} attempts", *it, attempts_[*it]);
      EvaluationResult failed;
      failed.task_id = *it;
      failed.status = EvaluationStatus::failed;
      failed.worker_id = f.worker_id;
      failed.error = "attempts exhausted";
      complete_locked(std::move(failed));
    }
  }
  return requeued;
}

QueueSnapshot CompletionService::snapshot() const {
  std::lock_guard lock(mutex_);
  QueueSnapshot s;
  for (const auto& t : pending_) s.pending.push_back(t.task_id);
  for (const auto& [id, f] : in_flight_) s.in_flight.push_back(id);
  std::set<std::string> waiting;
  for (const auto& r : done_) {
    s.done.push_back(r.task_id);
    waiting.insert(r.task_id);
  }
  for (const auto& id : finished_)
    if (!waiting.contains(id)) s.delivered.push_back(id);
  s.attempts = attempts_;
  return s;
}

std::size_t CompletionService::pending_count() const {
  std::lock_guard lock(mutex_);
  return pending_.size();
}

std::size_t CompletionService::in_flight_count() const {
  std::lock_guard lock(mutex_);
  return in_flight_.size();
}

std::size_t CompletionService::done_count() const {
  std::lock_guard lock(mutex_);
  return done_.size();
}

std::size_t CompletionService::discarded_returns() const {
  std::lock_guard lock(mutex_);
  return discarded_;
}

std::map<std::string, WorkerInfo> CompletionService::workers() const {
  std::lock_guard lock(mutex_);
  return workers_;
}

}  // namespace coevo::distrib
