#include "coevo/speciation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace coevo {

using nlohmann::json;

std::size_t Population::size() const {
  std::size_t n = 0;
  for (const auto& s : species) n += s.members.size();
  return n;
}

std::vector<SpeciesId> Population::species_ids() const {
  std::vector<SpeciesId> ids;
  for (const auto& s : species) ids.push_back(s.id);
  return ids;
}

const Species* Population::find(SpeciesId id) const {
  for (const auto& s : species)
    if (s.id == id) return &s;
  return nullptr;
}

Species* Population::find(SpeciesId id) {
  for (auto& s : species)
    if (s.id == id) return &s;
  return nullptr;
}

std::vector<const ChromosomeGraph*> Population::members() const {
  std::vector<const ChromosomeGraph*> out;
  for (const auto& s : species)
    for (const auto& m : s.members) out.push_back(&m);
  return out;
}

Population speciate(Population population, std::vector<ChromosomeGraph> chromosomes,
                    const SearchSpace& space, const SpeciationSettings& settings) {
  for (auto& s : population.species) s.members.clear();

  for (auto& c : chromosomes) {
    Species* home = nullptr;
    for (auto& s : population.species) {
      if (compatibility_distance(c, s.representative, space, settings.coefficients) <
          population.compatibility_threshold) {
        home = &s;
        break;
      }
    }
    if (!home) {
      Species founded;
      founded.id = population.next_species_id++;
      founded.representative = c;
      population.species.push_back(std::move(founded));
      home = &population.species.back();
    }
    home->members.push_back(std::move(c));
  }

  std::erase_if(population.species, [](const Species& s) { return s.members.empty(); });
  for (auto& s : population.species) s.representative = s.members.front();

  const auto count = static_cast<int>(population.species.size());
  if (count < population.target_species_count)
    population.compatibility_threshold *= 1.0 - settings.threshold_step;
  else if (count > population.target_species_count)
    population.compatibility_threshold *= 1.0 + settings.threshold_step;
  population.compatibility_threshold =
      std::max(population.compatibility_threshold, settings.min_threshold);
  return population;
}

void update_species_statistics(Population& population) {
  for (auto& s : population.species) {
    double sum = 0.0;
    std::size_t n = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& m : s.members) {
      if (!m.fitness) continue;
      sum += *m.fitness;
      ++n;
      best = std::max(best, *m.fitness);
    }
    if (n == 0) continue;
    s.mean_fitness = sum / static_cast<double>(n);
    if (best > s.best_fitness) {
      s.best_fitness = best;
      s.staleness = 0;
    } else {
      ++s.staleness;
    }
  }
}

std::map<SpeciesId, int> allocate_offspring(const Population& population, int total_size,
                                            const AllocationSettings& settings) {
  std::map<SpeciesId, int> counts;
  if (population.species.empty()) return counts;

  double min_fitness = std::numeric_limits<double>::infinity();
  double best_fitness = -std::numeric_limits<double>::infinity();
  SpeciesId best_species = population.species.front().id;
  for (const auto& s : population.species) {
    for (const auto& m : s.members) {
      if (!m.fitness) continue;
      min_fitness = std::min(min_fitness, *m.fitness);
      if (*m.fitness > best_fitness) {
        best_fitness = *m.fitness;
        best_species = s.id;
      }
    }
  }
  if (!std::isfinite(min_fitness)) min_fitness = 0.0;

  struct Share {
    SpeciesId id;
    double weight;
    int count = 0;
    double remainder = 0.0;
  };
  std::vector<Share> shares;
  for (const auto& s : population.species) {
    counts[s.id] = 0;
    const bool stale = s.staleness > settings.staleness_limit && s.id != best_species;
    if (stale) continue;
    shares.push_back({s.id, std::max(s.mean_fitness - min_fitness, settings.epsilon)});
  }

  double total_weight = 0.0;
  for (const auto& sh : shares) total_weight += sh.weight;
  int assigned = 0;
  for (auto& sh : shares) {
    const double quota = static_cast<double>(total_size) * sh.weight / total_weight;
    sh.count = static_cast<int>(std::floor(quota));
    sh.remainder = quota - sh.count;
    assigned += sh.count;
  }
  std::vector<Share*> by_remainder;
  for (auto& sh : shares) by_remainder.push_back(&sh);
  std::stable_sort(by_remainder.begin(), by_remainder.end(),
                   [](const Share* a, const Share* b) { return a->remainder > b->remainder; });
  for (std::size_t i = 0; assigned < total_size && !by_remainder.empty(); ++i) {
    ++by_remainder[i % by_remainder.size()]->count;
    ++assigned;
  }

  // Every surviving species keeps at least one slot, taken from the largest.
  for (auto& sh : shares) {
    if (sh.count > 0) continue;
    auto largest = std::max_element(shares.begin(), shares.end(),
                                    [](const Share& a, const Share& b) { return a.count < b.count; });
    if (largest->count <= 1) break;
    --largest->count;
    sh.count = 1;
  }
  for (const auto& sh : shares) counts[sh.id] = sh.count;
  return counts;
}

void rank_species(Species& species, RankingMode mode, bool sort_by_secondary) {
  std::vector<ObjectiveVector> objectives;
  for (const auto& m : species.members) {
    ObjectiveVector o;
    o.primary = m.fitness.value_or(0.0);
    o.secondary = m.secondary.value_or(0.0);
    o.raw_secondary = -o.secondary;
    objectives.push_back(o);
  }
  const auto order = mode == RankingMode::multiobjective
                         ? rank_by_fronts(objectives, sort_by_secondary)
                         : rank_by_primary(objectives);
  std::vector<ChromosomeGraph> ranked;
  ranked.reserve(order.size());
  for (auto i : order) ranked.push_back(std::move(species.members[i]));
  species.members = std::move(ranked);
}

std::vector<ChromosomeGraph> truncate_ranked(const Species& species, double truncation_fraction) {
  const auto keep = survivors_after_truncation(species.members.size(), truncation_fraction);
  return {species.members.begin(), species.members.begin() + static_cast<std::ptrdiff_t>(keep)};
}

std::vector<ChromosomeGraph> reproduce_species(const Species& species, int offspring_count,
                                               const ReproductionSettings& settings,
                                               ReproductionContext& ctx) {
  std::vector<ChromosomeGraph> offspring;
  if (offspring_count <= 0 || species.members.empty()) return offspring;

  const auto survivors = truncate_ranked(species, settings.truncation_fraction);
  offspring.push_back(survivors.front());

  auto tournament = [&]() -> const ChromosomeGraph& {
    std::size_t best = ctx.rng.index(survivors.size());
    for (int k = 1; k < settings.tournament_size; ++k) best = std::min(best, ctx.rng.index(survivors.size()));
    return survivors[best];
  };

  for (int k = 1; k < offspring_count; ++k) {
    const ChromosomeGraph& first = tournament();
    ChromosomeGraph child;
    if (survivors.size() > 1 && ctx.rng.bernoulli(settings.crossover_prob)) {
      const ChromosomeGraph& second = tournament();
      child = crossover(first, second, ctx.rng, settings.crossover);
    } else {
      child = first;
    }
    if (settings.structural_mutation) {
      if (ctx.rng.bernoulli(settings.add_node_prob)) {
        if (auto m = mutate_add_node(child, ctx.registry, ctx.space, ctx.module_species, ctx.rng))
          child = std::move(*m);
      }
      if (ctx.rng.bernoulli(settings.add_connection_prob)) {
        if (auto m = mutate_add_connection(child, ctx.registry, ctx.rng)) child = std::move(*m);
      }
    }
    if (ctx.rng.bernoulli(settings.mutate_params_prob))
      child = mutate_hyperparameters(child, ctx.space, settings.param_mutation, ctx.module_species,
                                     ctx.rng);
    child.id = ctx.next_id++;
    child.fitness.reset();
    child.secondary.reset();
    offspring.push_back(std::move(child));
  }
  return offspring;
}

json to_json(const Population& population) {
  json species = json::array();
  for (const auto& s : population.species) {
    json members = json::array();
    for (const auto& m : s.members) members.push_back(to_json(m));
    species.push_back({{"id", s.id},
                       {"representative", to_json(s.representative)},
                       {"members", members},
                       {"mean_fitness", s.mean_fitness},
                       {"best_fitness", s.best_fitness},
                       {"staleness", s.staleness}});
  }
  return json{{"kind", to_string(population.kind)},
              {"species", species},
              {"target_species_count", population.target_species_count},
              {"compatibility_threshold", population.compatibility_threshold},
              {"next_species_id", population.next_species_id}};
}

Population population_from_json(const json& j) {
  Population p;
  p.kind = genome_kind_from_string(j.at("kind").get<std::string>());
  p.target_species_count = j.at("target_species_count").get<int>();
  p.compatibility_threshold = j.at("compatibility_threshold").get<double>();
  p.next_species_id = j.at("next_species_id").get<SpeciesId>();
  for (const auto& sj : j.at("species")) {
    Species s;
    s.id = sj.at("id").get<SpeciesId>();
    s.representative = chromosome_from_json(sj.at("representative"));
    for (const auto& m : sj.at("members")) s.members.push_back(chromosome_from_json(m));
    s.mean_fitness = sj.at("mean_fitness").get<double>();
    s.best_fitness = sj.at("best_fitness").get<double>();
    s.staleness = sj.at("staleness").get<int>();
    p.species.push_back(std::move(s));
  }
  return p;
}

}  // namespace coevo
