#include "coevo/coevolution.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include "coevo/errors.hpp"

namespace coevo {

using nlohmann::json;

std::vector<std::string> EvolutionSettings::problems() const {
  std::vector<std::string> out = space.problems();
  auto prob = [&](double p, const std::string& name) {
    if (!(p >= 0.0 && p <= 1.0)) out.push_back(name + ": probability must lie in [0, 1]");
  };
  auto pop = [&](const PopulationSettings& p, const std::string& name) {
    if (p.size < 1) out.push_back(name + "_population_size: must be >= 1");
    if (p.species_target < 1) out.push_back(name + "_species_size: must be >= 1");
    if (p.size < p.species_target)
      out.push_back(name + "_population_size: must be >= " + name + "_species_size");
    prob(p.add_node_prob, "add_" + name + "_node_prob");
    prob(p.add_connection_prob, "add_" + name + "_connection_prob");
    prob(p.mutate_params_prob, name + "_mutate_params_prob");
    prob(p.crossover_prob, name + "_crossover_prob");
  };
  pop(modules, "module");
  pop(blueprints, "blueprint");
  if (space.node_params.empty()) out.push_back("search_space.node_params: must not be empty");
  if (space.global_params.empty()) out.push_back("search_space.global_params: must not be empty");
  if (!space.find_node_param("layer_type"))
    out.push_back("search_space.node_params: a categorical 'layer_type' is required");
  if (assembled_population_size < blueprints.size)
    out.push_back("assembled_population_size: must be >= blueprint_population_size");
  if (!(truncation_fraction >= 0.0 && truncation_fraction < 1.0))
    out.push_back("truncation_fraction: must lie in [0, 1)");
  if (tournament_size < 1) out.push_back("tournament_size: must be >= 1");
  prob(per_param_mutation_prob, "per_param_mutation_prob");
  prob(species_pointer_mutation_prob, "species_pointer_mutation_prob");
  prob(disabled_carryover, "disabled_carryover");
  if (!(initial_compatibility_threshold > 0.0))
    out.push_back("compatibility.initial_threshold: must be > 0");
  if (!(threshold_step >= 0.0 && threshold_step < 1.0))
    out.push_back("compatibility.threshold_step: must lie in [0, 1)");
  if (staleness_limit < 1) out.push_back("staleness_limit: must be >= 1");
  return out;
}

namespace {

SpeciationSettings speciation_settings(const EvolutionSettings& s) {
  SpeciationSettings out;
  out.coefficients = s.compatibility;
  out.threshold_step = s.threshold_step;
  return out;
}

ReproductionSettings reproduction_settings(const EvolutionSettings& s, const PopulationSettings& p,
                                           bool hyperparameter_only) {
  ReproductionSettings r;
  r.truncation_fraction = s.truncation_fraction;
  r.tournament_size = s.tournament_size;
  r.crossover_prob = p.crossover_prob;
  r.add_node_prob = p.add_node_prob;
  r.add_connection_prob = p.add_connection_prob;
  r.mutate_params_prob = p.mutate_params_prob;
  r.param_mutation.per_param_prob = s.per_param_mutation_prob;
  r.param_mutation.species_pointer_prob = s.species_pointer_mutation_prob;
  r.crossover.disabled_carryover = s.disabled_carryover;
  if (hyperparameter_only) {
    r.structural_mutation = false;
    r.param_mutation.node_params = false;
    r.crossover.globals_only = true;
  }
  return r;
}

Population empty_population(GenomeKind kind, const PopulationSettings& p, double threshold) {
  Population pop;
  pop.kind = kind;
  pop.target_species_count = p.species_target;
  pop.compatibility_threshold = threshold;
  return pop;
}

Population next_population(const Population& population, const PopulationSettings& p,
                           const EvolutionSettings& settings, const ReproductionSettings& r,
                           ReproductionContext& ctx) {
  AllocationSettings alloc;
  alloc.staleness_limit = settings.staleness_limit;
  const auto counts = allocate_offspring(population, p.size, alloc);
  std::vector<ChromosomeGraph> offspring;
  for (const auto& s : population.species) {
    auto kids = reproduce_species(s, counts.at(s.id), r, ctx);
    for (auto& k : kids) offspring.push_back(std::move(k));
  }
  return speciate(population, std::move(offspring), settings.space, speciation_settings(settings));
}

void merge_into_archive(std::vector<ArchivedNetwork>& archive, std::vector<ArchivedNetwork> fresh) {
  for (auto& f : fresh) archive.push_back(std::move(f));
  std::vector<ObjectiveVector> objectives;
  for (const auto& a : archive) objectives.push_back(a.objectives);
  auto front = pareto_front(objectives);
  std::sort(front.begin(), front.end());
  std::vector<ArchivedNetwork> kept;
  for (auto i : front) kept.push_back(std::move(archive[i]));
  archive = std::move(kept);
}

}  // namespace

EvolutionState initialize_state(const EvolutionSettings& settings) {
  if (auto problems = settings.problems(); !problems.empty()) throw ConfigError(problems);
  EvolutionState state;
  state.rng = Rng(settings.seed);
  state.hyperparameter_only = settings.hyperparameter_only;
  state.modules = empty_population(GenomeKind::module, settings.modules,
                                   settings.initial_compatibility_threshold);
  state.blueprints = empty_population(GenomeKind::blueprint, settings.blueprints,
                                      settings.initial_compatibility_threshold);

  std::vector<ChromosomeGraph> modules;
  for (int i = 0; i < settings.modules.size; ++i) {
    auto c = new_minimal_chromosome(GenomeKind::module, settings.space, state.rng);
    c.id = state.next_id++;
    modules.push_back(std::move(c));
  }
  state.modules = speciate(std::move(state.modules), std::move(modules), settings.space,
                           speciation_settings(settings));

  const auto live = state.modules.species_ids();
  std::vector<ChromosomeGraph> blueprints;
  for (int i = 0; i < settings.blueprints.size; ++i) {
    auto c = new_minimal_chromosome(GenomeKind::blueprint, settings.space, state.rng, live);
    c.id = state.next_id++;
    blueprints.push_back(std::move(c));
  }
  state.blueprints = speciate(std::move(state.blueprints), std::move(blueprints), settings.space,
                              speciation_settings(settings));
  return state;
}

void set_hyperparameter_only_mode(EvolutionState& state, bool enabled) {
  if (state.generation > 0)
    throw std::logic_error("hyperparameter-only mode can only change before the first generation");
  state.hyperparameter_only = enabled;
}

void attribute_fitness(const std::vector<EvaluationRecord>& log, Population& blueprints,
                       Population& modules) {
  struct Sum {
    double primary = 0.0;
    double secondary = 0.0;
    int count = 0;
  };
  std::unordered_map<ChromosomeId, Sum> sums;
  for (const auto& rec : log) {
    auto add = [&](ChromosomeId id) {
      auto& s = sums[id];
      s.primary += rec.objectives.primary;
      s.secondary += rec.objectives.secondary;
      ++s.count;
    };
    add(rec.blueprint_id);
    for (auto id : rec.module_ids) add(id);
  }
  for (Population* pop : {&blueprints, &modules}) {
    for (auto& s : pop->species) {
      for (auto& m : s.members) {
        auto it = sums.find(m.id);
        if (it == sums.end()) continue;
        m.fitness = it->second.primary / it->second.count;
        m.secondary = it->second.secondary / it->second.count;
      }
    }
  }
}

int fill_unevaluated(Population& population, double failure_fitness) {
  int filled = 0;
  for (auto& s : population.species) {
    double primary = 0.0;
    double secondary = 0.0;
    int n = 0;
    for (const auto& m : s.members) {
      if (!m.fitness) continue;
      primary += *m.fitness;
      secondary += m.secondary.value_or(0.0);
      ++n;
    }
    for (auto& m : s.members) {
      if (m.fitness) continue;
      m.fitness = n > 0 ? primary / n : failure_fitness;
      m.secondary = n > 0 ? secondary / n : 0.0;
      ++filled;
    }
  }
  return filled;
}

std::vector<int> rank_assembled_networks(const std::vector<AssembledNetwork>& networks,
                                         bool sort_by_secondary) {
  std::vector<ObjectiveVector> objectives;
  for (const auto& n : networks) objectives.push_back(n.objectives.value_or(ObjectiveVector{}));
  std::vector<int> front_index(networks.size(), 0);
  int f = 1;
  for (const auto& front : pareto_fronts(objectives, sort_by_secondary)) {
    for (auto i : front) front_index[i] = f;
    ++f;
  }
  return front_index;
}

GenerationOutcome evolve_generation(EvolutionState& state, const EvolutionSettings& settings,
                                    EvaluationBackend& backend) {
  const auto start = std::chrono::steady_clock::now();
  GenerationOutcome out;
  const int gen = state.generation;

  out.networks = assemble_networks(state.blueprints, state.modules,
                                   settings.assembled_population_size, settings.space, state.rng, gen);

  std::vector<EvaluationTask> tasks;
  for (auto& n : out.networks) {
    if (n.failed) continue;
    tasks.push_back({n.network_id, serialize_network(n.network), settings.train_config, 0.0});
  }
  auto results = backend.evaluate_batch(tasks);
  std::unordered_map<std::string, EvaluationResult> by_id;
  for (auto& r : results) by_id.emplace(r.task_id, std::move(r));

  for (auto& n : out.networks) {
    auto it = by_id.find(n.network_id);
    if (!n.failed && it != by_id.end() && it->second.ok()) {
      n.objectives = ObjectiveVector::minimizing_secondary(it->second.primary, it->second.raw_secondary);
    } else {
      if (!n.failed) {
        n.failed = true;
        n.failure = it == by_id.end() ? "no result" : it->second.error;
      }
      double raw = 0.0;
      if (!n.network.layers.empty()) {
        try {
          raw = static_cast<double>(count_parameters(n.network));
        } catch (const std::exception&) {
        }
      }
      n.objectives = ObjectiveVector::minimizing_secondary(settings.failure_fitness, raw);
      ++out.report.evaluation_failures;
    }
    out.log.push_back({n.network_id, n.blueprint_id, n.module_ids(), *n.objectives, n.failed});
  }

  attribute_fitness(out.log, state.blueprints, state.modules);
  for (const Population* pop : {&state.blueprints, &state.modules})
    for (const auto* m : pop->members())
      if (m->fitness) out.attributed[m->id] = {*m->fitness, m->secondary.value_or(0.0)};
  out.report.unevaluated = fill_unevaluated(state.modules, settings.failure_fitness) +
                           fill_unevaluated(state.blueprints, settings.failure_fitness);
  update_species_statistics(state.modules);
  update_species_statistics(state.blueprints);

  out.front_index = rank_assembled_networks(out.networks, settings.secondary_sort);

  // Report and archives.
  GenerationReport& r = out.report;
  r.generation = gen;
  r.evaluations = static_cast<int>(tasks.size());
  r.best_fitness = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  std::vector<ArchivedNetwork> fresh;
  const AssembledNetwork* best = nullptr;
  for (std::size_t i = 0; i < out.networks.size(); ++i) {
    const auto& n = out.networks[i];
    sum += n.objectives->primary;
    if (!best || n.objectives->primary > best->objectives->primary) best = &n;
    if (!n.failed && out.front_index[i] == 1)
      fresh.push_back({n.network_id, gen, *n.objectives, serialize_network(n.network)});
  }
  if (best) {
    r.best_fitness = best->objectives->primary;
    r.best_secondary = best->objectives->raw_secondary;
    r.mean_fitness = sum / static_cast<double>(out.networks.size());
    if (!best->failed && (!state.best || best->objectives->primary > state.best->objectives.primary))
      state.best = ArchivedNetwork{best->network_id, gen, *best->objectives, serialize_network(best->network)};
  }
  merge_into_archive(state.pareto_archive, std::move(fresh));
  r.best_so_far = state.best ? state.best->objectives.primary : settings.failure_fitness;
  for (const auto& s : state.modules.species) r.species_counts["modules"][s.id] = static_cast<int>(s.members.size());
  for (const auto& s : state.blueprints.species)
    r.species_counts["blueprints"][s.id] = static_cast<int>(s.members.size());

  // Reproduction: modules first so blueprints can point at the new species.
  for (Population* pop : {&state.modules, &state.blueprints})
    for (auto& s : pop->species) rank_species(s, settings.ranking, settings.secondary_sort);

  state.registry.new_generation();
  const std::vector<SpeciesId> no_species;
  ReproductionContext module_ctx{state.registry, state.rng, settings.space, no_species, state.next_id};
  state.modules = next_population(state.modules, settings.modules, settings,
                                  reproduction_settings(settings, settings.modules, state.hyperparameter_only),
                                  module_ctx);
  const auto live = state.modules.species_ids();
  ReproductionContext blueprint_ctx{state.registry, state.rng, settings.space, live, state.next_id};
  state.blueprints = next_population(
      state.blueprints, settings.blueprints, settings,
      reproduction_settings(settings, settings.blueprints, state.hyperparameter_only), blueprint_ctx);

  ++state.generation;
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

json to_json(const GenerationReport& r) {
  json species = json::object();
  for (const auto& [pop, counts] : r.species_counts) {
    json c = json::object();
    for (const auto& [id, n] : counts) c[std::to_string(id)] = n;
    species[pop] = c;
  }
  return json{{"generation", r.generation},
              {"best_fitness", r.best_fitness},
              {"mean_fitness", r.mean_fitness},
              {"best_secondary", r.best_secondary},
              {"best_so_far", r.best_so_far},
              {"species_counts", species},
              {"evaluations", r.evaluations},
              {"evaluation_failures", r.evaluation_failures},
              {"unevaluated", r.unevaluated}};
}

GenerationReport generation_report_from_json(const json& j) {
  GenerationReport r;
  r.generation = j.at("generation").get<int>();
  r.best_fitness = j.at("best_fitness").get<double>();
  r.mean_fitness = j.at("mean_fitness").get<double>();
  r.best_secondary = j.at("best_secondary").get<double>();
  r.best_so_far = j.at("best_so_far").get<double>();
  for (const auto& [pop, counts] : j.at("species_counts").items())
    for (const auto& [id, n] : counts.items()) r.species_counts[pop][std::stoll(id)] = n.get<int>();
  r.evaluations = j.at("evaluations").get<int>();
  r.evaluation_failures = j.at("evaluation_failures").get<int>();
  r.unevaluated = j.at("unevaluated").get<int>();
  return r;
}

namespace {

json archived_to_json(const ArchivedNetwork& a) {
  return json{{"network_id", a.network_id},
              {"generation", a.generation},
              {"primary", a.objectives.primary},
              {"secondary", a.objectives.secondary},
              {"raw_secondary", a.objectives.raw_secondary},
              {"network_json", a.network_json}};
}

ArchivedNetwork archived_from_json(const json& j) {
  ArchivedNetwork a;
  a.network_id = j.at("network_id").get<std::string>();
  a.generation = j.at("generation").get<int>();
  a.objectives = {j.at("primary").get<double>(), j.at("secondary").get<double>(),
                  j.at("raw_secondary").get<double>()};
  a.network_json = j.at("network_json").get<std::string>();
  return a;
}

}  // namespace

json state_to_json(const EvolutionState& state) {
  json archive = json::array();
  for (const auto& a : state.pareto_archive) archive.push_back(archived_to_json(a));
  json j{{"generation", state.generation},
         {"modules", to_json(state.modules)},
         {"blueprints", to_json(state.blueprints)},
         {"registry", state.registry.to_json()},
         {"rng", state.rng.state()},
         {"next_id", state.next_id},
         {"hyperparameter_only", state.hyperparameter_only},
         {"pareto_archive", archive}};
  if (state.best) j["best"] = archived_to_json(*state.best);
  return j;
}

EvolutionState state_from_json(const json& j) {
  EvolutionState s;
  s.generation = j.at("generation").get<int>();
  s.modules = population_from_json(j.at("modules"));
  s.blueprints = population_from_json(j.at("blueprints"));
  s.registry = InnovationRegistry::from_json(j.at("registry"));
  s.rng.set_state(j.at("rng").get<std::string>());
  s.next_id = j.at("next_id").get<ChromosomeId>();
  s.hyperparameter_only = j.at("hyperparameter_only").get<bool>();
  for (const auto& a : j.at("pareto_archive")) s.pareto_archive.push_back(archived_from_json(a));
  if (j.contains("best")) s.best = archived_from_json(j.at("best"));
  return s;
}

namespace {

ChromosomeGraph drifted(GenomeKind kind, const EvolutionSettings& settings, const PopulationSettings& p,
                        int generations, std::span<const SpeciesId> species, InnovationRegistry& registry,
                        Rng& rng) {
  ChromosomeGraph c = new_minimal_chromosome(kind, settings.space, rng, species);
  const int max_steps =
      static_cast<int>(std::lround(2.0 * generations * (p.add_node_prob + p.add_connection_prob)));
  const auto steps = rng.uniform_int(0, std::max(0, max_steps));
  const double node_share = p.add_node_prob / std::max(1e-12, p.add_node_prob + p.add_connection_prob);
  for (std::int64_t i = 0; i < steps; ++i) {
    std::optional<ChromosomeGraph> m = rng.bernoulli(node_share)
                                           ? mutate_add_node(c, registry, settings.space, species, rng)
                                           : mutate_add_connection(c, registry, rng);
    if (m) c = std::move(*m);
  }
  return c;
}

}  // namespace

double random_search(const EvolutionSettings& settings, int budget, int generations,
                     EvaluationBackend& backend) {
  Rng rng(settings.seed ^ 0x5DEECE66DULL);
  InnovationRegistry registry;
  std::vector<SpeciesId> species;
  for (int s = 0; s < settings.modules.species_target; ++s) species.push_back(s);

  std::vector<EvaluationTask> tasks;
  for (int i = 0; i < budget; ++i) {
    registry.new_generation();
    ChromosomeGraph bp =
        drifted(GenomeKind::blueprint, settings, settings.blueprints, generations, species, registry, rng);
    std::map<SpeciesId, ChromosomeGraph> modules;
    for (const auto& node : bp.nodes) {
      if (modules.contains(node.species_pointer())) continue;
      modules[node.species_pointer()] =
          drifted(GenomeKind::module, settings, settings.modules, generations, {}, registry, rng);
    }
    std::map<SpeciesId, const ChromosomeGraph*> refs;
    for (const auto& [s, m] : modules) refs[s] = &m;
    try {
      tasks.push_back({"random-" + std::to_string(i), serialize_network(build_network(bp, refs, settings.space)),
                       settings.train_config, 0.0});
    } catch (const std::exception&) {
    }
  }
  double best = settings.failure_fitness;
  for (const auto& r : backend.evaluate_batch(tasks))
    if (r.ok()) best = std::max(best, r.primary);
  return best;
}

}  // namespace coevo
