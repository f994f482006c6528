#pragma once

#include <memory>

#include "coevo/coevolution.hpp"
#include "coevo/distrib/completion_service.hpp"
#include "coevo/distrib/transport.hpp"

namespace coevo::distrib {

struct RemoteSettings {
  ServerSettings server;
  QueueSettings queue;
  double unreachable_timeout = 60.0;  // seconds with no worker activity before aborting
  double poll_interval = 0.05;        // seconds between reaping passes
};

// Evaluates batches through a completion service exposed on a TCP port.
// Throws EvaluatorUnavailable when no worker shows up in time.
class RemoteBackend : public EvaluationBackend {
 public:
  explicit RemoteBackend(RemoteSettings settings);
  ~RemoteBackend() override;

  std::vector<EvaluationResult> evaluate_batch(const std::vector<EvaluationTask>& tasks) override;
  int port() const { return server_.port(); }
  CompletionService& service() { return service_; }

 private:
  RemoteSettings settings_;
  CompletionService service_;
  QueueServer server_;
};

}  // namespace coevo::distrib
