#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "coevo/assembly.hpp"
#include "coevo/evaluation.hpp"
#include "coevo/speciation.hpp"
#include "json.hpp"

namespace coevo {

struct PopulationSettings {
  int size = 56;
  int species_target = 4;
  double add_node_prob = 0.05;
  double add_connection_prob = 0.05;
  double mutate_params_prob = 0.8;
  double crossover_prob = 0.5;
};

struct EvolutionSettings {
  SearchSpace space = text_search_space();
  PopulationSettings modules{56, 4, 0.05, 0.05, 0.8, 0.5};
  PopulationSettings blueprints{22, 1, 0.05, 0.05, 0.8, 0.5};
  int assembled_population_size = 100;
  double truncation_fraction = 0.5;  // F_l, shared by both ranking modes
  int tournament_size = 2;
  double per_param_mutation_prob = 0.2;
  double species_pointer_mutation_prob = 0.1;
  double disabled_carryover = 0.75;
  CompatibilityCoefficients compatibility;
  double initial_compatibility_threshold = 1.0;
  double threshold_step = 0.1;
  int staleness_limit = 15;
  double failure_fitness = 0.0;
  RankingMode ranking = RankingMode::single_objective;
  bool secondary_sort = false;
  bool hyperparameter_only = false;
  std::uint64_t seed = 1;
  nlohmann::json train_config = nlohmann::json::object();

  std::vector<std::string> problems() const;
};

struct ArchivedNetwork {
  std::string network_id;
  int generation = 0;
  ObjectiveVector objectives;
  std::string network_json;
};

struct EvolutionState {
  int generation = 0;  // next generation to run
  Population modules;
  Population blueprints;
  InnovationRegistry registry;
  Rng rng;
  ChromosomeId next_id = 0;
  bool hyperparameter_only = false;
  std::optional<ArchivedNetwork> best;          // highest primary ever evaluated
  std::vector<ArchivedNetwork> pareto_archive;  // front over every evaluated network
};

struct GenerationReport {
  int generation = 0;
  double best_fitness = 0.0;  // max over this generation's networks
  double mean_fitness = 0.0;
  double best_secondary = 0.0;  // raw secondary of the best network
  double best_so_far = 0.0;
  std::map<std::string, std::map<SpeciesId, int>> species_counts;
  int evaluations = 0;
  int evaluation_failures = 0;
  int unevaluated = 0;  // chromosomes that inherited their species mean
  double wall_time = 0.0;
};

// Everything but wall_time, which is timing-dependent.
nlohmann::json to_json(const GenerationReport& r);
GenerationReport generation_report_from_json(const nlohmann::json& j);

struct EvaluationRecord {
  std::string network_id;
  ChromosomeId blueprint_id = 0;
  std::vector<ChromosomeId> module_ids;
  ObjectiveVector objectives;
  bool failed = false;
};

struct AttributedFitness {
  double primary = 0.0;
  double secondary = 0.0;
};

struct GenerationOutcome {
  GenerationReport report;
  std::vector<AssembledNetwork> networks;
  std::vector<EvaluationRecord> log;
  std::vector<int> front_index;  // per network, 1-based
  // Objectives of every chromosome right after attribution, before
  // unevaluated members are filled in and reproduction runs.
  std::map<ChromosomeId, AttributedFitness> attributed;
};

class EvaluationBackend {
 public:
  virtual ~EvaluationBackend() = default;
  // One result per task, any order; missing results count as failures.
  virtual std::vector<EvaluationResult> evaluate_batch(const std::vector<EvaluationTask>& tasks) = 0;
};

class LocalBackend : public EvaluationBackend {
 public:
  LocalBackend(std::shared_ptr<const Evaluator> evaluator, int parallelism = 1)
      : evaluator_(std::move(evaluator)), parallelism_(parallelism) {}
  std::vector<EvaluationResult> evaluate_batch(const std::vector<EvaluationTask>& tasks) override {
    return evaluate_local(tasks, *evaluator_, parallelism_);
  }

 private:
  std::shared_ptr<const Evaluator> evaluator_;
  int parallelism_;
};

// Generation-0 populations of minimal chromosomes, speciated.
EvolutionState initialize_state(const EvolutionSettings& settings);

// Throws std::logic_error once a generation has run.
void set_hyperparameter_only_mode(EvolutionState& state, bool enabled);

// Mean primary/secondary over the networks containing each chromosome,
// accumulated in network order. Chromosomes in no network keep their
// previous values.
void attribute_fitness(const std::vector<EvaluationRecord>& log, Population& blueprints,
                       Population& modules);

// Members without fitness take their species mean (failure fitness when the
// whole species is unevaluated). Returns how many were filled.
int fill_unevaluated(Population& population, double failure_fitness);

// Successive-front ranking of the assembled networks; returns the 1-based
// front index of each network.
std::vector<int> rank_assembled_networks(const std::vector<AssembledNetwork>& networks,
                                         bool sort_by_secondary = false);

// Assemble, evaluate, attribute, rank, reproduce. Deterministic for a fixed
// seed when the backend is.
GenerationOutcome evolve_generation(EvolutionState& state, const EvolutionSettings& settings,
                                    EvaluationBackend& backend);

nlohmann::json state_to_json(const EvolutionState& state);
EvolutionState state_from_json(const nlohmann::json& j);

// Equal-budget baseline: each sample is a minimal blueprint and minimal
// modules drifted by a uniform number of random structural and parameter
// mutations (0 .. 2 * generations * (add-node + add-connection prob)).
// Returns the best primary found.
double random_search(const EvolutionSettings& settings, int budget, int generations,
                     EvaluationBackend& backend);

}  // namespace coevo
