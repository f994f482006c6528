#pragma once

#include <map>
#include <vector>

#include "coevo/genome.hpp"
#include "coevo/multiobjective.hpp"
#include "json.hpp"

namespace coevo {

struct Species {
  SpeciesId id = 0;
  ChromosomeGraph representative;
  std::vector<ChromosomeGraph> members;
  double mean_fitness = 0.0;
  double best_fitness = -1e300;  // best member fitness ever seen
  int staleness = 0;
};

struct Population {
  GenomeKind kind = GenomeKind::module;
  std::vector<Species> species;  // ascending id
  int target_species_count = 1;
  double compatibility_threshold = 0.5;
  SpeciesId next_species_id = 0;

  std::size_t size() const;
  std::vector<SpeciesId> species_ids() const;
  const Species* find(SpeciesId id) const;
  Species* find(SpeciesId id);
  std::vector<const ChromosomeGraph*> members() const;
};

struct SpeciationSettings {
  CompatibilityCoefficients coefficients;
  double threshold_step = 0.1;  // relative nudge per generation
  double min_threshold = 1e-3;
};

// Assigns each chromosome to the first species (ascending id) whose
// representative is closer than the threshold, founding new species for the
// rest. Empty species disappear; surviving species keep their id and take
// their first member as the new representative. The threshold then moves
// one step toward the target species count.
Population speciate(Population population, std::vector<ChromosomeGraph> chromosomes,
                    const SearchSpace& space, const SpeciationSettings& settings);

// Recomputes mean fitness and staleness from member fitness (members without
// fitness are skipped).
void update_species_statistics(Population& population);

struct AllocationSettings {
  double epsilon = 1e-9;
  int staleness_limit = 15;
};

// Offspring per species, proportional to max(mean - population minimum
// member fitness, epsilon), largest-remainder rounding, at least one per
// surviving species, summing to total_size. Species stale for longer than
// the limit get nothing unless they hold the population-best member.
std::map<SpeciesId, int> allocate_offspring(const Population& population, int total_size,
                                            const AllocationSettings& settings = {});

enum class RankingMode { single_objective, multiobjective };

// Orders members best first: by descending fitness, or by successive Pareto
// fronts over (fitness, secondary).
void rank_species(Species& species, RankingMode mode, bool sort_by_secondary = false);

// The leading members left after removing the last `truncation_fraction`
// of a ranked species.
std::vector<ChromosomeGraph> truncate_ranked(const Species& species, double truncation_fraction);

struct ReproductionSettings {
  double truncation_fraction = 0.5;  // F_l
  int tournament_size = 2;
  double crossover_prob = 0.5;
  double add_node_prob = 0.05;
  double add_connection_prob = 0.05;
  double mutate_params_prob = 0.8;
  HyperparameterMutation param_mutation;
  CrossoverOptions crossover;
  bool structural_mutation = true;
};

struct ReproductionContext {
  InnovationRegistry& registry;
  Rng& rng;
  const SearchSpace& space;
  std::span<const SpeciesId> module_species;  // pointer targets for blueprints
  ChromosomeId& next_id;
};

// Members must already be ranked. The rank-1 member is copied unchanged
// (same id), the rest come from tournament-selected survivors of the
// truncated ranking via crossover and gated mutation.
std::vector<ChromosomeGraph> reproduce_species(const Species& species, int offspring_count,
                                               const ReproductionSettings& settings,
                                               ReproductionContext& ctx);

nlohmann::json to_json(const Population& population);
Population population_from_json(const nlohmann::json& j);

}  // namespace coevo
