#include "coevo/distrib/remote_backend.hpp"

#include <map>

#include "coevo/errors.hpp"
#include "coevo/log.hpp"

namespace coevo::distrib {

RemoteBackend::RemoteBackend(RemoteSettings settings)
    : settings_(std::move(settings)), service_(settings_.queue), server_(service_, settings_.server) {
  server_.start();
}

RemoteBackend::~RemoteBackend() { server_.stop(); }

std::vector<EvaluationResult> RemoteBackend::evaluate_batch(const std::vector<EvaluationTask>& tasks) {
  std::map<std::string, std::size_t> waiting;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!service_.submit(tasks[i])) throw ProtocolError("duplicate task id '" + tasks[i].task_id + "'");
    waiting.emplace(tasks[i].task_id, i);
  }
  std::vector<EvaluationResult> results;
  results.reserve(tasks.size());
  double last_activity = service_.now();
  while (!waiting.empty()) {
    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                              std::chrono::duration<double>(settings_.poll_interval));
    if (auto r = service_.next_result(deadline)) {
      if (waiting.erase(r->task_id)) results.push_back(std::move(*r));
      last_activity = service_.now();
      continue;
    }
    service_.reap_timeouts();
    // A held task counts as activity; dead holders are handled by reaping.
    if (service_.in_flight_count() > 0) last_activity = service_.now();
    for (const auto& [id, w] : service_.workers()) last_activity = std::max(last_activity, w.last_seen);
    if (service_.now() - last_activity > settings_.unreachable_timeout)
      throw EvaluatorUnavailable("no worker activity for " + std::to_string(settings_.unreachable_timeout) +
                                 " s with " + std::to_string(waiting.size()) + " tasks outstanding");
  }
  log::debug("batch of {} tasks complete", tasks.size());
  return results;
}

}  // namespace coevo::distrib
