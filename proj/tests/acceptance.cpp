// Acceptance suite: one PASS/FAIL line per criterion. Run a subset with
// `acceptance 3 5`.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "checks.hpp"
#include "coevo/assembly.hpp"
#include "coevo/coevolution.hpp"
#include "coevo/config.hpp"
#include "coevo/log.hpp"
#include "coevo/multiobjective.hpp"
#include "coevo/runner.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "simulation.hpp"

using namespace coevo;
using namespace coevo::testing;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

EvolutionSettings appendix_settings(std::uint64_t seed) {
  EvolutionSettings s;  // defaults carry the 56/22/100 appendix populations
  s.seed = seed;
  return s;
}

// 1. Alg. 3 front equals the brute-force weakly non-dominated set.
Verdict pareto_oracle() {
  Rng rng(2024);
  const auto start = Clock::now();
  int mismatches = 0;
  const int sets = 1000;
  for (int i = 0; i < sets; ++i) {
    const auto v = random_objectives(rng, 64);
    const auto front = pareto_front(v);
    const auto expected = brute_force_front(v);
    if (front.size() != expected.size() || points(v, front) != expected) ++mismatches;
  }
  const double t = seconds_since(start);
  return {mismatches == 0 && t < 5.0, fmt("%d/%d sets mismatched, %.3f s", mismatches, sets, t)};
}

// 2. Front peeling on chains, antichains and fuzzed species.
Verdict front_peeling() {
  int failures = 0;
  // Chain: A dominates B dominates C dominates D, given shuffled.
  const std::vector<ObjectiveVector> chain = {
      ObjectiveVector::minimizing_secondary(0.7, 30), ObjectiveVector::minimizing_secondary(0.9, 10),
      ObjectiveVector::minimizing_secondary(0.6, 40), ObjectiveVector::minimizing_secondary(0.8, 20)};
  if (rank_by_fronts(chain) != std::vector<std::size_t>{1, 3, 0, 2}) ++failures;
  if (pareto_fronts(chain).size() != 4) ++failures;
  // Antichain: one front in Alg. 3 construction order (descending primary).
  const std::vector<ObjectiveVector> anti = {
      ObjectiveVector::minimizing_secondary(0.5, 5), ObjectiveVector::minimizing_secondary(0.9, 50),
      ObjectiveVector::minimizing_secondary(0.7, 20), ObjectiveVector::minimizing_secondary(0.6, 10)};
  if (pareto_fronts(anti).size() != 1 || rank_by_fronts(anti) != std::vector<std::size_t>{1, 2, 3, 0}) ++failures;
  // Truncation of 8 ranked members at F_l = 0.5 keeps 4.
  if (survivors_after_truncation(8, 0.5) != 4) ++failures;

  Rng rng(77);
  const SearchSpace space = text_search_space();
  int violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto v = random_objectives(rng, 40);
    Species s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      ChromosomeGraph c = new_minimal_chromosome(GenomeKind::module, space, rng);
      c.id = static_cast<ChromosomeId>(i);
      c.fitness = v[i].primary;
      c.secondary = v[i].secondary;
      s.members.push_back(std::move(c));
    }
    rank_species(s, RankingMode::multiobjective);
    std::set<ChromosomeId> ids;
    for (std::size_t a = 0; a < s.members.size(); ++a) {
      ids.insert(s.members[a].id);
      for (std::size_t b = a + 1; b < s.members.size(); ++b) {
        const ObjectiveVector above{*s.members[a].fitness, *s.members[a].secondary, 0};
        const ObjectiveVector below{*s.members[b].fitness, *s.members[b].secondary, 0};
        if (dominates(below, above)) ++violations;
      }
    }
    if (ids.size() != v.size()) ++violations;  // ranking must be a permutation
  }
  return {failures == 0 && violations == 0,
          fmt("%d constructed cases wrong, %d dominance violations over 1000 fuzzed species", failures, violations)};
}

// 3. Nodes sharing a species pointer resolve to one module.
Verdict assembly_consistency() {
  Rng rng(3);
  int assemblies = 0, violations = 0, multi = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const SearchSpace space = trial % 2 ? vision_search_space() : text_search_space();
    auto pops = fuzz_populations(space, rng);
    for (const auto& n : assemble_networks(pops.blueprints, pops.modules, 5, space, rng, trial)) {
      ++assemblies;
      const auto* bp = find_chromosome(pops.blueprints, n.blueprint_id);
      std::set<SpeciesId> pointers;
      for (const auto& node : bp->nodes) pointers.insert(node.species_pointer());
      multi += pointers.size() < bp->nodes.size();
      violations += static_cast<int>(assembly_violations(n, pops.blueprints, pops.modules).size());
    }
  }
  return {violations == 0 && assemblies == 1000,
          fmt("%d assemblies, %d with repeated species pointers, %d violations", assemblies, multi, violations)};
}

// 4. Stored attributed fitness equals the mean over containing networks.
Verdict attribution() {
  int checked = 0, mismatches = 0, kept = 0;
  for (double sigma : {0.0, 0.05}) {
    auto settings = appendix_settings(5);
    auto state = initialize_state(settings);
    LocalBackend backend(noisy_wrapper(std::make_shared<SurrogateEvaluator>(), sigma, 11));
    for (int g = 0; g < 5; ++g) {
      std::map<ChromosomeId, AttributedFitness> before;
      for (const Population* pop : {&state.blueprints, &state.modules})
        for (const auto* m : pop->members())
          if (m->fitness) before[m->id] = {*m->fitness, m->secondary.value_or(0.0)};
      const auto out = evolve_generation(state, settings, backend);
      const auto sums = recompute_attribution(out.log);
      for (const auto& [id, s] : sums) {
        ++checked;
        const auto it = out.attributed.find(id);
        if (it == out.attributed.end() || it->second.primary != s.mean_primary() ||
            it->second.secondary != s.mean_secondary())
          ++mismatches;
      }
      // Chromosomes in no network keep their previous values.
      for (const auto& [id, f] : out.attributed) {
        if (sums.contains(id)) continue;
        ++kept;
        const auto it = before.find(id);
        if (it == before.end() || it->second.primary != f.primary || it->second.secondary != f.secondary)
          ++mismatches;
      }
      mismatches += attribution_mismatches(out.log, state.blueprints, state.modules);
    }
  }
  return {mismatches == 0 && checked > 0,
          fmt("%d chromosome values recomputed (clean and noisy), %d carried over, %d mismatches", checked, kept, mismatches)};
}

// 5. Evolution beats equal-budget random search.
Verdict effectiveness() {
  const auto start = Clock::now();
  int wins = 0;
  double evo_sum = 0, rand_sum = 0;
  const int seeds = 20, generations = 30;
  for (int seed = 1; seed <= seeds; ++seed) {
    auto settings = appendix_settings(static_cast<std::uint64_t>(seed));
    auto state = initialize_state(settings);
    LocalBackend backend(std::make_shared<SurrogateEvaluator>());
    for (int g = 0; g < generations; ++g) evolve_generation(state, settings, backend);
    const double evo = state.best ? state.best->objectives.primary : 0.0;
    const double rnd = random_search(settings, generations * settings.assembled_population_size, generations, backend);
    wins += evo > rnd;
    evo_sum += evo;
    rand_sum += rnd;
  }
  const double t = seconds_since(start);
  return {wins >= 16 && t < 300.0, fmt("evolution won %d/%d seeds (mean best %.4f vs %.4f), %.1f s", wins, seeds,
                                       evo_sum / seeds, rand_sum / seeds, t)};
}

std::vector<ObjectiveVector> archive_front(const EvolutionState& s) {
  std::vector<ObjectiveVector> v;
  for (const auto& a : s.pareto_archive) v.push_back(a.objectives);
  return v;
}

// 6. Multiobjective fronts weakly dominate single-objective fronts.
Verdict multiobjective_dominance() {
  const int pairs = 10;
  const std::vector<int> checkpoints = {10, 20, 30};
  std::map<int, int> wins;
  double coverage = 0.0;  // share of single-objective front points the other front covers
  for (int seed = 1; seed <= pairs; ++seed) {
    auto so = appendix_settings(static_cast<std::uint64_t>(seed));
    auto mo = so;
    mo.ranking = RankingMode::multiobjective;
    auto so_state = initialize_state(so);
    auto mo_state = initialize_state(mo);
    LocalBackend backend(std::make_shared<SurrogateEvaluator>());
    for (int g = 1; g <= checkpoints.back(); ++g) {
      evolve_generation(so_state, so, backend);
      evolve_generation(mo_state, mo, backend);
      if (std::find(checkpoints.begin(), checkpoints.end(), g) != checkpoints.end())
        wins[g] += front_weakly_dominates(archive_front(mo_state), archive_front(so_state));
    }
    const auto mo_front = archive_front(mo_state);
    const auto so_front = archive_front(so_state);
    int covered = 0;
    for (const auto& p : so_front)
      covered += std::any_of(mo_front.begin(), mo_front.end(), [&](const ObjectiveVector& q) {
        return q.primary >= p.primary && q.secondary >= p.secondary;
      });
    coverage += so_front.empty() ? 1.0 : static_cast<double>(covered) / static_cast<double>(so_front.size());
  }
  const int final_wins = wins[checkpoints.back()];
  return {final_wins >= 8,
          fmt("multiobjective front dominated in %d/%d pairs at generation 30 (gen 10: %d, gen 20: %d); "
              "it covers %.0f%% of single-objective front points on average",
              final_wins, pairs, wins[10], wins[20], 100.0 * coverage / pairs)};
}

// Blueprint chain of `instances` nodes that all point to species 0.
NetworkGraph repeated_module_network(int instances, const ChromosomeGraph& module, const SearchSpace& space) {
  ChromosomeGraph bp;
  bp.kind = GenomeKind::blueprint;
  Rng rng(1);
  bp.globals = sample_table(space.global_params, rng);
  for (int i = 0; i < instances; ++i) bp.nodes.push_back({2 * i, SpeciesId{0}});
  for (int i = 0; i + 1 < instances; ++i) bp.edges.push_back({2 * i + 1, 2 * i, 2 * i + 2, true});
  if (instances == 1) bp.edges.clear();
  return build_network(bp, {{0, &module}}, space);
}

// 7. Parameter counts and the duplicated-module pattern.
Verdict parameter_counting() {
  int wrong = 0;
  std::string names;
  for (const auto& f : parameter_fixtures()) {
    if (count_parameters(f.network) != f.expected) {
      ++wrong;
      names += " " + f.name;
    }
  }
  SearchSpace space = text_search_space();
  space.min_pooling_layers = 2;
  ChromosomeGraph module;
  module.kind = GenomeKind::module;
  module.id = 1;
  HyperparameterTable conv{{"layer_type", std::string("conv1d")}, {"filters", std::int64_t{32}},
                           {"kernel_size", std::int64_t{3}}, {"activation", std::string("relu")},
                           {"initializer", std::string("glorot")}, {"dropout_rate", 0.1}, {"units", std::int64_t{32}}};
  module.nodes = {{0, conv}, {1, conv}};
  module.edges = {{2, 0, 1, true}};
  const auto two = count_parameters(repeated_module_network(2, module, space));
  const auto four = count_parameters(repeated_module_network(4, module, space));
  const bool pattern = four > two;
  return {wrong == 0 && pattern, fmt("%d/10 fixtures wrong%s; same module x2 = %lld, x4 = %lld parameters", wrong,
                                     names.c_str(), static_cast<long long>(two), static_cast<long long>(four))};
}

// 8. Completion service under fault injection.
Verdict completion_service() {
  Rng rng(8);
  int violations = 0, failed = 0, crashes = 0;
  std::size_t discarded = 0;
  for (int run = 0; run < 100; ++run) {
    SimulationConfig cfg;
    cfg.tasks = run < 10 ? 500 : 10 + static_cast<int>(rng.index(491));
    cfg.workers = run < 10 ? 16 : 1 + static_cast<int>(rng.index(16));
    cfg.crash_rate = 0.3;
    cfg.seed = rng.next();
    const auto out = simulate_completion_service(cfg);
    violations += static_cast<int>(out.violations.size());
    failed += out.failed;
    crashes += out.crashes;
    discarded += out.discarded;
  }
  // Submit A and B; B finishes first and is delivered first.
  distrib::CompletionService q;
  q.submit({"A", "{}", nlohmann::json::object(), 0.0});
  q.submit({"B", "{}", nlohmann::json::object(), 0.0});
  q.worker_pull("w1");
  q.worker_pull("w2");
  EvaluationResult b;
  b.task_id = "B";
  q.worker_return(b);
  EvaluationResult a;
  a.task_id = "A";
  q.worker_return(a);
  const auto first = q.try_next_result();
  const auto second = q.try_next_result();
  const bool unordered = first && second && first->task_id == "B" && second->task_id == "A";
  return {violations == 0 && unordered,
          fmt("100 simulations: %d violations, %d crashes, %zu discarded returns, %d tasks out of attempts; "
              "B-before-A delivery %s",
              violations, crashes, discarded, failed, unordered ? "ok" : "wrong")};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 9. Byte-identical logs across runs and across interrupt + resume.
Verdict determinism() {
  const fs::path root = fs::temp_directory_path() / "coevo_acceptance_determinism";
  fs::remove_all(root);
  RunConfig config;
  config.evolution = appendix_settings(9);
  config.generations = 6;
  run_experiment(config, root / "a");
  run_experiment(config, root / "b");
  RunOptions stop;
  stop.stop_after = 3;
  run_experiment(config, root / "c", stop);
  resume_experiment(root / "c");
  int differing = 0;
  std::vector<std::string> files = {"generations.jsonl", "best_network.json"};
  for (int g = 0; g < config.generations; ++g) files.push_back("pareto_gen_" + std::to_string(g) + ".csv");
  for (const auto& f : files) {
    const std::string a = slurp(root / "a" / f);
    differing += a.empty() || a != slurp(root / "b" / f);
    differing += a != slurp(root / "c" / f);
  }
  fs::remove_all(root);
  return {differing == 0, fmt("%zu files compared across 3 runs (one resumed after generation 3), %d differ",
                              files.size(), differing)};
}

// 10. Hyperparameter-only mode preserves structure, varies globals.
Verdict hyperparameter_only() {
  auto settings = appendix_settings(10);
  settings.hyperparameter_only = true;
  auto state = initialize_state(settings);
  std::vector<ChromosomeGraph> ancestors;
  for (const Population* pop : {&state.modules, &state.blueprints})
    for (const auto* m : pop->members()) ancestors.push_back(*m);
  LocalBackend backend(std::make_shared<SurrogateEvaluator>());
  for (int g = 0; g < 20; ++g) evolve_generation(state, settings, backend);
  int changed = 0, genomes = 0;
  std::set<std::string> globals;
  for (const Population* pop : {&state.modules, &state.blueprints})
    for (const auto* c : pop->members()) {
      ++genomes;
      const bool same = std::any_of(ancestors.begin(), ancestors.end(),
                                    [&](const auto& a) { return a.kind == c->kind && a.same_structure(*c); });
      changed += !same;
      if (c->kind == GenomeKind::blueprint) globals.insert(to_json(c->globals).dump());
    }
  return {changed == 0 && globals.size() > 1,
          fmt("%d/%d genomes changed structure after 20 generations; %zu distinct global tables", changed, genomes,
              globals.size())};
}

}  // namespace

int main(int argc, char** argv) {
  log::configure_from_env();
  // Fault injection exhausts attempts on purpose; keep the output to verdicts.
  if (!std::getenv("COEVO_LOG")) log::set_level("error");
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"pareto front matches brute-force oracle", pareto_oracle},
      {"front-peeling ranking", front_peeling},
      {"assembly module consistency", assembly_consistency},
      {"fitness attribution recomputation", attribution},
      {"evolution beats random search", effectiveness},
      {"multiobjective front dominance", multiobjective_dominance},
      {"parameter counting", parameter_counting},
      {"completion service under faults", completion_service},
      {"determinism and resume", determinism},
      {"hyperparameter-only mode", hyperparameter_only},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!only.empty() && !only.contains(n)) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%s criterion %d (%s): %s\n", v.pass ? "PASS" : "FAIL", n, criteria[i].first, v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
