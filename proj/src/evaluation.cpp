#include "coevo/evaluation.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <set>
#include <stdexcept>
#include <thread>

#include "coevo/rng.hpp"

namespace coevo {

using nlohmann::json;

std::string to_string(EvaluationStatus status) { return status == EvaluationStatus::ok ? "ok" : "failed"; }

namespace {

bool computational(OpKind op) {
  switch (op) {
    case OpKind::conv1d:
    case OpKind::conv2d:
    case OpKind::dense:
    case OpKind::lstm:
    case OpKind::gru:
    case OpKind::dropout:
      return true;
    default:
      return false;
  }
}

double saturate(double x) { return 1.0 - std::exp(-x); }

}  // namespace

NetworkDescriptors describe_network(const NetworkGraph& network) {
  NetworkDescriptors d;
  const auto order = topological_layer_order(network);
  std::map<std::string, int> depth;
  std::set<OpKind> ops;
  std::set<std::string> activations;
  int edges = 0;
  for (const auto& id : order) {
    const LayerSpec& l = *network.find(id);
    int best = 0;
    for (const auto& src : l.inbound) best = std::max(best, depth[src]);
    edges += static_cast<int>(l.inbound.size());
    const bool counts = computational(l.op);
    depth[id] = best + (counts ? 1 : 0);
    if (counts) {
      ops.insert(l.op);
      if (auto it = l.attrs.find("activation"); it != l.attrs.end() && it->is_string())
        activations.insert(it->get<std::string>());
    }
  }
  for (const auto& out : network.outputs) d.depth = std::max(d.depth, depth[out]);
  d.distinct_ops = static_cast<int>(ops.size());
  d.distinct_activations = static_cast<int>(activations.size());
  d.cyclomatic = std::max(0, edges - static_cast<int>(network.layers.size()) + 1);
  d.parameters = count_parameters(network);
  return d;
}

double surrogate_fitness(const NetworkDescriptors& d, const SurrogateWeights& w) {
  const double diversity =
      0.5 * std::min(1.0, static_cast<double>(d.distinct_ops) / std::max(1, w.op_kinds_target)) +
      0.5 * std::min(1.0, static_cast<double>(d.distinct_activations) / std::max(1, w.activations_target));
  const double raw = w.depth * saturate(d.depth / w.depth_target) + w.diversity * diversity +
                     w.branching * saturate(d.cyclomatic / w.branching_target) -
                     w.params * saturate(static_cast<double>(d.parameters) / w.params_target);
  return (raw + w.params) / (w.depth + w.diversity + w.branching + w.params);
}

double surrogate_fitness(const NetworkGraph& network, const SurrogateWeights& weights) {
  return surrogate_fitness(describe_network(network), weights);
}

json to_json(const SurrogateWeights& w) {
  return json{{"depth", w.depth},
              {"diversity", w.diversity},
              {"branching", w.branching},
              {"params", w.params},
              {"depth_target", w.depth_target},
              {"branching_target", w.branching_target},
              {"params_target", w.params_target},
              {"op_kinds_target", w.op_kinds_target},
              {"activations_target", w.activations_target}};
}

SurrogateWeights surrogate_weights_from_json(const json& j) {
  SurrogateWeights w;
  w.depth = j.value("depth", w.depth);
  w.diversity = j.value("diversity", w.diversity);
  w.branching = j.value("branching", w.branching);
  w.params = j.value("params", w.params);
  w.depth_target = j.value("depth_target", w.depth_target);
  w.branching_target = j.value("branching_target", w.branching_target);
  w.params_target = j.value("params_target", w.params_target);
  w.op_kinds_target = j.value("op_kinds_target", w.op_kinds_target);
  w.activations_target = j.value("activations_target", w.activations_target);
  return w;
}

EvaluationResult SurrogateEvaluator::evaluate(const EvaluationTask& task) const {
  const auto start = std::chrono::steady_clock::now();
  EvaluationResult r;
  r.task_id = task.task_id;
  r.worker_id = "local";
  const NetworkGraph network = deserialize_network(task.network_json);
  const auto d = describe_network(network);
  r.primary = surrogate_fitness(d, weights_);
  r.raw_secondary = static_cast<double>(d.parameters);
  r.duration = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::uint64_t stable_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

NoisyEvaluator::NoisyEvaluator(std::shared_ptr<const Evaluator> inner, double sigma, std::uint64_t seed)
    : inner_(std::move(inner)), sigma_(sigma), seed_(seed) {
  if (!inner_) throw std::invalid_argument("noisy evaluator needs an inner evaluator");
  if (sigma_ < 0.0) throw std::invalid_argument("noise sigma must be >= 0");
}

EvaluationResult NoisyEvaluator::evaluate(const EvaluationTask& task) const {
  EvaluationResult r = inner_->evaluate(task);
  if (r.ok() && sigma_ > 0.0) {
    Rng rng(stable_hash(task.task_id) ^ (seed_ * 0x9E3779B97F4A7C15ULL));
    r.primary = rng.normal(r.primary, sigma_);
  }
  return r;
}

std::shared_ptr<const Evaluator> noisy_wrapper(std::shared_ptr<const Evaluator> inner, double sigma,
                                               std::uint64_t seed) {
  return std::make_shared<NoisyEvaluator>(std::move(inner), sigma, seed);
}

std::vector<EvaluationResult> evaluate_local(const std::vector<EvaluationTask>& tasks,
                                             const Evaluator& evaluator, int parallelism) {
  if (parallelism < 1) throw std::invalid_argument("parallelism must be >= 1");
  std::vector<EvaluationResult> results(tasks.size());
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        results[i] = evaluator.evaluate(tasks[i]);
        results[i].task_id = tasks[i].task_id;
        if (results[i].ok() && !(std::isfinite(results[i].primary) && std::isfinite(results[i].raw_secondary))) {
          results[i].status = EvaluationStatus::failed;
          results[i].error = "non-finite objectives";
        }
      } catch (const std::exception& e) {
        results[i] = EvaluationResult{};
        results[i].task_id = tasks[i].task_id;
        results[i].status = EvaluationStatus::failed;
        results[i].error = e.what();
      } catch (...) {
        results[i] = EvaluationResult{};
        results[i].task_id = tasks[i].task_id;
        results[i].status = EvaluationStatus::failed;
        results[i].error = "unknown evaluator failure";
      }
    }
  };

  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(parallelism), tasks.size());
  if (threads <= 1) {
    work();
    return results;
  }
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
  pool.clear();
  return results;
}

}  // namespace coevo
