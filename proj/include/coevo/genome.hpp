#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "coevo/rng.hpp"
#include "coevo/search_space.hpp"
#include "json.hpp"

namespace coevo {

using Innovation = std::int64_t;
using SpeciesId = std::int64_t;
using ChromosomeId = std::int64_t;

enum class GenomeKind { module, blueprint };

std::string to_string(GenomeKind kind);
GenomeKind genome_kind_from_string(const std::string& s);

// Innovations of the two nodes and the edge of every minimal chromosome.
// Sharing them lets generation-0 individuals align during crossover.
inline constexpr Innovation kMinimalSource = 0;
inline constexpr Innovation kMinimalSink = 1;
inline constexpr Innovation kMinimalEdge = 2;
inline constexpr Innovation kFirstFreeInnovation = 3;

struct NodeGene {
  Innovation innovation = 0;
  // Layer hyperparameters for module nodes, species pointer for blueprint nodes.
  std::variant<HyperparameterTable, SpeciesId> payload;

  bool is_module_node() const { return std::holds_alternative<HyperparameterTable>(payload); }
  const HyperparameterTable& params() const { return std::get<HyperparameterTable>(payload); }
  SpeciesId species_pointer() const { return std::get<SpeciesId>(payload); }

  bool operator==(const NodeGene&) const = default;
};

struct EdgeGene {
  Innovation innovation = 0;
  Innovation src = 0;
  Innovation dst = 0;
  bool enabled = true;

  bool operator==(const EdgeGene&) const = default;
};

struct ChromosomeGraph {
  ChromosomeId id = 0;
  GenomeKind kind = GenomeKind::module;
  std::vector<NodeGene> nodes;  // sorted by innovation
  std::vector<EdgeGene> edges;  // sorted by innovation
  HyperparameterTable globals;  // blueprint only
  std::optional<double> fitness;
  std::optional<double> secondary;  // maximize form (negated raw complexity)

  const NodeGene* find_node(Innovation innovation) const;
  const EdgeGene* find_edge(Innovation innovation) const;
  bool has_connection(Innovation src, Innovation dst) const;
  std::size_t gene_count() const { return nodes.size() + edges.size(); }

  // Same genes and globals, ignoring id and objectives.
  bool same_genes(const ChromosomeGraph& other) const;
  // Same node and edge innovations and endpoints (payloads and flags ignored).
  bool same_structure(const ChromosomeGraph& other) const;

  bool operator==(const ChromosomeGraph&) const = default;
};

struct SplitInnovation {
  Innovation node;
  Innovation in_edge;
  Innovation out_edge;
};

// Issues historical markings. Within one generation the same structural
// mutation (splitting a given edge, connecting a given node pair) receives the
// same ids in every chromosome; new_generation() clears that cache.
// Not thread-safe: callers serialize access.
class InnovationRegistry {
 public:
  Innovation fresh() { return next_id_++; }
  SplitInnovation split(Innovation edge);
  Innovation connect(Innovation src, Innovation dst);
  void new_generation();

  Innovation next_id() const { return next_id_; }

  nlohmann::json to_json() const;
  static InnovationRegistry from_json(const nlohmann::json& j);

 private:
  Innovation next_id_ = kFirstFreeInnovation;
  std::map<Innovation, SplitInnovation> splits_;
  std::map<std::pair<Innovation, Innovation>, Innovation> connections_;
};

// Two nodes, one edge. Blueprint node pointers are drawn from `species`
// (pointer 0 when empty).
ChromosomeGraph new_minimal_chromosome(GenomeKind kind, const SearchSpace& space, Rng& rng,
                                       std::span<const SpeciesId> species = {});

// Structural mutations return nullopt when no legal mutation exists.
std::optional<ChromosomeGraph> mutate_add_node(const ChromosomeGraph& chromosome,
                                               InnovationRegistry& registry,
                                               const SearchSpace& space,
                                               std::span<const SpeciesId> species, Rng& rng);

std::optional<ChromosomeGraph> mutate_add_connection(const ChromosomeGraph& chromosome,
                                                     InnovationRegistry& registry, Rng& rng);

// All (src, dst) pairs that could gain an edge without duplicating an edge or
// closing a cycle, in ascending order.
std::vector<std::pair<Innovation, Innovation>> legal_connections(const ChromosomeGraph& chromosome);

struct HyperparameterMutation {
  double per_param_prob = 0.2;
  bool node_params = true;
  bool globals = true;
  // Probability of re-drawing each blueprint node's species pointer.
  double species_pointer_prob = 0.0;
};

ChromosomeGraph mutate_hyperparameters(const ChromosomeGraph& chromosome, const SearchSpace& space,
                                       const HyperparameterMutation& options,
                                       std::span<const SpeciesId> species, Rng& rng);

struct CrossoverOptions {
  double disabled_carryover = 0.75;
  // Structure and node genes come from the fitter parent unchanged; only the
  // blueprint globals mix.
  bool globals_only = false;
};

// Throws GenomeError on kind mismatch or a parent without fitness.
ChromosomeGraph crossover(const ChromosomeGraph& a, const ChromosomeGraph& b, Rng& rng,
                          const CrossoverOptions& options = {});

struct CompatibilityCoefficients {
  double excess_disjoint = 1.0;  // c1
  double node_params = 1.0;      // c2
  double globals = 1.0;          // c3, blueprint globals
};

double compatibility_distance(const ChromosomeGraph& a, const ChromosomeGraph& b,
                              const SearchSpace& space, const CompatibilityCoefficients& c);

// Empty when the chromosome is a well-formed DAG of its kind. With a search
// space, node and global tables are also range-checked.
std::vector<std::string> validate_chromosome(const ChromosomeGraph& chromosome,
                                             const SearchSpace* space = nullptr);

// Node innovations in a topological order over all edges (enabled or not).
// Throws GenomeError on a cycle.
std::vector<Innovation> topological_order(const ChromosomeGraph& chromosome);

nlohmann::json to_json(const ChromosomeGraph& chromosome);
ChromosomeGraph chromosome_from_json(const nlohmann::json& j);

}  // namespace coevo
