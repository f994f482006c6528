#pragma once

#include <filesystem>
#include <string>

#include "coevo/coevolution.hpp"
#include "coevo/distrib/remote_backend.hpp"
#include "coevo/evaluation.hpp"
#include "json.hpp"

namespace coevo {

enum class EvaluatorKind { surrogate, noisy_surrogate, remote };

std::string to_string(EvaluatorKind kind);

struct RunConfig {
  EvolutionSettings evolution;
  int generations = 30;
  int checkpoint_every = 1;
  EvaluatorKind evaluator = EvaluatorKind::surrogate;
  SurrogateWeights surrogate;
  double noise_sigma = 0.02;
  int parallelism = 1;
  distrib::RemoteSettings distrib;
  std::string output_dir = "runs/default";

  std::vector<std::string> problems() const;
};

// Parses a run configuration document. Missing fields take defaults; every
// unknown, mistyped or out-of-range field is reported in one ConfigError
// whose diagnostics name the field path.
RunConfig parse_run_config(const nlohmann::json& document);
RunConfig load_run_config(const std::filesystem::path& path);

// Fully expanded configuration. parse_run_config(effective_config_json(c))
// reproduces c.
nlohmann::json effective_config_json(const RunConfig& config);

// Builds the evaluator selected by the configuration (local kinds only).
std::shared_ptr<const Evaluator> make_local_evaluator(const RunConfig& config);

}  // namespace coevo
