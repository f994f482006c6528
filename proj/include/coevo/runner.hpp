#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "coevo/config.hpp"

namespace coevo {

struct RunOptions {
  // Stop after this many generations of this invocation, leaving the run
  // resumable (used to simulate an interrupt).
  std::optional<int> stop_after;
  // Replaces the configured evaluator backend when set.
  std::shared_ptr<EvaluationBackend> backend;
};

struct RunSummary {
  int generations_run = 0;   // in this invocation
  int completed = 0;         // generations completed overall
  bool finished = false;     // completed == configured generations
  std::optional<ArchivedNetwork> best;
};

inline constexpr int kCheckpointVersion = 1;

// Fresh run into out_dir (created; earlier outputs are replaced). Writes
// effective_config.json, generations.jsonl, timing.jsonl,
// pareto_gen_<n>.csv, checkpoint_<n>.json and best_network.json.
RunSummary run_experiment(const RunConfig& config, const std::filesystem::path& out_dir,
                          const RunOptions& options = {});

// Continues from a checkpoint file, or from the newest checkpoint in a run
// directory. `config`, when given, may only change settings that do not
// alter the population (e.g. generations); anything else throws
// CheckpointError. A finished run is a successful no-op.
RunSummary resume_experiment(const std::filesystem::path& checkpoint,
                             const std::optional<RunConfig>& config = std::nullopt,
                             const RunOptions& options = {});

struct Checkpoint {
  int completed = 0;
  RunConfig config;
  EvolutionState state;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);  // throws CheckpointError
std::filesystem::path latest_checkpoint(const std::filesystem::path& run_dir);

struct ReportRow {
  int generation = 0;
  double best_fitness = 0.0;
  double best_so_far = 0.0;
  double evaluation_time = 0.0;
  double cumulative_evaluation_time = 0.0;
};

// Prints a per-generation summary and writes pareto_history.csv (the union
// of the per-generation Pareto CSVs). Throws
// std::runtime_error when the logs are missing.
std::vector<ReportRow> report_run(const std::filesystem::path& run_dir, std::ostream& out);

// Network rows of one generation, as written to pareto_gen_<n>.csv.
std::string pareto_csv(const GenerationOutcome& outcome);

}  // namespace coevo
