#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coevo/genome.hpp"
#include "coevo/multiobjective.hpp"
#include "coevo/network_ir.hpp"
#include "coevo/speciation.hpp"

namespace coevo {

struct AssembledNetwork {
  std::string network_id;
  NetworkGraph network;
  ChromosomeId blueprint_id = 0;
  std::map<SpeciesId, ChromosomeId> module_choices;
  std::optional<ObjectiveVector> objectives;
  bool failed = false;
  std::string failure;

  // Module chromosome ids, each once.
  std::vector<ChromosomeId> module_ids() const;
};

// Splices one module per blueprint node into a layer DAG. Every blueprint
// node pointing to species s expands to modules.at(s). Pooling layers are
// placed on the cuts after evenly spaced levels of the blueprint's longest
// path so every input-to-output path crosses the same number of them.
// Throws NetworkError when the result is not a valid network.
NetworkGraph build_network(const ChromosomeGraph& blueprint,
                           const std::map<SpeciesId, const ChromosomeGraph*>& modules,
                           const SearchSpace& space);

// Layer attrs for a module node's hyperparameter table.
LayerSpec layer_from_params(const std::string& id, const HyperparameterTable& params);

// Re-points blueprint nodes whose species no longer exists to a uniformly
// drawn surviving species. Returns the number of pointers changed.
int repoint_dead_species(Population& blueprints, const std::vector<SpeciesId>& live, Rng& rng);

// Round-robin over blueprints (species order, then member order) until
// `count` networks exist; one uniformly drawn module per referenced species.
// Assembly failures are returned marked failed rather than thrown.
std::vector<AssembledNetwork> assemble_networks(Population& blueprints, const Population& modules,
                                                int count, const SearchSpace& space, Rng& rng,
                                                int generation);

}  // namespace coevo
