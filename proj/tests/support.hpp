#pragma once

#include <initializer_list>
#include <tuple>

#include "coevo/genome.hpp"
#include "coevo/search_space.hpp"

namespace coevo::testing {

// Module chromosome with the given node innovations and (innovation, src,
// dst, enabled) edges; node tables sampled from the text space.
inline ChromosomeGraph module_graph(std::initializer_list<Innovation> nodes,
                                    std::initializer_list<std::tuple<Innovation, Innovation, Innovation, bool>> edges,
                                    std::uint64_t seed = 1) {
  const SearchSpace space = text_search_space();
  Rng rng(seed);
  ChromosomeGraph c;
  c.kind = GenomeKind::module;
  for (Innovation n : nodes) c.nodes.push_back({n, sample_table(space.node_params, rng)});
  for (const auto& [i, s, d, en] : edges) c.edges.push_back({i, s, d, en});
  return c;
}

inline ChromosomeGraph blueprint_graph(std::initializer_list<std::pair<Innovation, SpeciesId>> nodes,
                                       std::initializer_list<std::tuple<Innovation, Innovation, Innovation, bool>> edges,
                                       std::uint64_t seed = 1) {
  const SearchSpace space = text_search_space();
  Rng rng(seed);
  ChromosomeGraph c;
  c.kind = GenomeKind::blueprint;
  for (const auto& [n, sp] : nodes) c.nodes.push_back({n, sp});
  for (const auto& [i, s, d, en] : edges) c.edges.push_back({i, s, d, en});
  c.globals = sample_table(space.global_params, rng);
  return c;
}

}  // namespace coevo::testing
