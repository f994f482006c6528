#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "coevo/network_ir.hpp"
#include "json.hpp"

namespace coevo {

struct EvaluationTask {
  std::string task_id;
  std::string network_json;
  nlohmann::json train_config = nlohmann::json::object();
  double submitted_at = 0.0;  // seconds on the submitter's clock
};

enum class EvaluationStatus { ok, failed };

struct EvaluationResult {
  std::string task_id;
  double primary = 0.0;
  double raw_secondary = 0.0;
  EvaluationStatus status = EvaluationStatus::ok;
  std::string worker_id;
  double duration = 0.0;
  std::string error;  // failure reason, empty when ok

  bool ok() const { return status == EvaluationStatus::ok; }
};

std::string to_string(EvaluationStatus status);

class Evaluator {
 public:
  virtual ~Evaluator() = default;
  // Implementations may throw; evaluate_local turns that into a failed result.
  virtual EvaluationResult evaluate(const EvaluationTask& task) const = 0;
  virtual bool deterministic() const { return true; }
  virtual bool remote() const { return false; }
};

// Graph descriptors the surrogate scores.
struct NetworkDescriptors {
  int depth = 0;              // computational layers on the longest input->output path
  int distinct_ops = 0;       // distinct computational op kinds
  int distinct_activations = 0;
  int cyclomatic = 0;         // independent extra paths: edges - layers + 1 (>= 0)
  std::int64_t parameters = 0;
};

NetworkDescriptors describe_network(const NetworkGraph& network);

struct SurrogateWeights {
  double depth = 0.4;
  double diversity = 0.2;
  double branching = 0.2;
  double params = 0.2;
  double depth_target = 8.0;      // D*
  double branching_target = 4.0;  // B*
  double params_target = 1e6;     // P*
  int op_kinds_target = 2;
  int activations_target = 4;
};

nlohmann::json to_json(const SurrogateWeights& w);
SurrogateWeights surrogate_weights_from_json(const nlohmann::json& j);

// Closed-form score in [0, 1):
//   raw = wd*sat(depth/D*) + wv*diversity + wb*sat(cyclomatic/B*) - wp*sat(params/P*)
//   f   = (raw + wp) / (wd + wv + wb + wp)
// with sat(x) = 1 - exp(-x). Its supremum is 1, approached by deep, diverse,
// branching networks with few parameters.
double surrogate_fitness(const NetworkGraph& network, const SurrogateWeights& weights = {});
double surrogate_fitness(const NetworkDescriptors& d, const SurrogateWeights& weights = {});
inline constexpr double kSurrogateOptimum = 1.0;

class SurrogateEvaluator : public Evaluator {
 public:
  explicit SurrogateEvaluator(SurrogateWeights weights = {}) : weights_(weights) {}
  EvaluationResult evaluate(const EvaluationTask& task) const override;
  const SurrogateWeights& weights() const { return weights_; }

 private:
  SurrogateWeights weights_;
};

// Adds Gaussian noise to the wrapped primary objective, seeded from
// (task_id, seed) so replays are exact.
class NoisyEvaluator : public Evaluator {
 public:
  NoisyEvaluator(std::shared_ptr<const Evaluator> inner, double sigma, std::uint64_t seed);
  EvaluationResult evaluate(const EvaluationTask& task) const override;
  bool deterministic() const override { return inner_->deterministic(); }

 private:
  std::shared_ptr<const Evaluator> inner_;
  double sigma_;
  std::uint64_t seed_;
};

std::shared_ptr<const Evaluator> noisy_wrapper(std::shared_ptr<const Evaluator> inner, double sigma,
                                               std::uint64_t seed);

// Evaluates every task on `parallelism` threads. Results come back in task
// order; a throwing evaluator yields a failed result for that task only.
std::vector<EvaluationResult> evaluate_local(const std::vector<EvaluationTask>& tasks,
                                             const Evaluator& evaluator, int parallelism);

std::uint64_t stable_hash(const std::string& s);

}  // namespace coevo
