#include "coevo/genome.hpp"

#include <algorithm>
#include <queue>
#include <set>

#include "coevo/errors.hpp"

namespace coevo {

using nlohmann::json;

std::string to_string(GenomeKind kind) { return kind == GenomeKind::module ? "module" : "blueprint"; }

GenomeKind genome_kind_from_string(const std::string& s) {
  if (s == "module") return GenomeKind::module;
  if (s == "blueprint") return GenomeKind::blueprint;
  throw GenomeError("unknown chromosome kind '" + s + "'");
}

namespace {

template <typename Gene>
const Gene* find_by_innovation(const std::vector<Gene>& genes, Innovation innovation) {
  auto it = std::lower_bound(genes.begin(), genes.end(), innovation,
                             [](const Gene& g, Innovation i) { return g.innovation < i; });
  return (it != genes.end() && it->innovation == innovation) ? &*it : nullptr;
}

template <typename Gene>
void sort_genes(std::vector<Gene>& genes) {
  std::sort(genes.begin(), genes.end(),
            [](const Gene& x, const Gene& y) { return x.innovation < y.innovation; });
}

// reach[i] holds every node index reachable from node i (over all edges).
std::vector<std::vector<bool>> reachability(const ChromosomeGraph& c) {
  const std::size_t n = c.nodes.size();
  std::map<Innovation, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index[c.nodes[i].innovation] = i;
  std::vector<std::vector<std::size_t>> out(n);
  for (const auto& e : c.edges) out[index.at(e.src)].push_back(index.at(e.dst));
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<std::size_t> stack{s};
    while (!stack.empty()) {
      auto u = stack.back();
      stack.pop_back();
      for (auto v : out[u]) {
        if (!reach[s][v]) {
          reach[s][v] = true;
          stack.push_back(v);
        }
      }
    }
  }
  return reach;
}

NodeGene new_node(GenomeKind kind, Innovation innovation, const SearchSpace& space,
                  std::span<const SpeciesId> species, Rng& rng) {
  NodeGene node;
  node.innovation = innovation;
  if (kind == GenomeKind::module)
    node.payload = sample_table(space.node_params, rng);
  else
    node.payload = species.empty() ? SpeciesId{0} : species[rng.index(species.size())];
  return node;
}

}  // namespace

const NodeGene* ChromosomeGraph::find_node(Innovation innovation) const {
  return find_by_innovation(nodes, innovation);
}

const EdgeGene* ChromosomeGraph::find_edge(Innovation innovation) const {
  return find_by_innovation(edges, innovation);
}

bool ChromosomeGraph::has_connection(Innovation src, Innovation dst) const {
  return std::any_of(edges.begin(), edges.end(),
                     [&](const EdgeGene& e) { return e.src == src && e.dst == dst; });
}

bool ChromosomeGraph::same_genes(const ChromosomeGraph& other) const {
  return kind == other.kind && nodes == other.nodes && edges == other.edges &&
         globals == other.globals;
}

bool ChromosomeGraph::same_structure(const ChromosomeGraph& other) const {
  if (kind != other.kind || nodes.size() != other.nodes.size() ||
      edges.size() != other.edges.size())
    return false;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].innovation != other.nodes[i].innovation) return false;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& x = edges[i];
    const auto& y = other.edges[i];
    if (x.innovation != y.innovation || x.src != y.src || x.dst != y.dst) return false;
  }
  return true;
}

SplitInnovation InnovationRegistry::split(Innovation edge) {
  auto it = splits_.find(edge);
  if (it != splits_.end()) return it->second;
  SplitInnovation s{fresh(), fresh(), fresh()};
  splits_.emplace(edge, s);
  return s;
}

Innovation InnovationRegistry::connect(Innovation src, Innovation dst) {
  auto key = std::make_pair(src, dst);
  auto it = connections_.find(key);
  if (it != connections_.end()) return it->second;
  const Innovation id = fresh();
  connections_.emplace(key, id);
  return id;
}

void InnovationRegistry::new_generation() {
  splits_.clear();
  connections_.clear();
}

json InnovationRegistry::to_json() const {
  json splits = json::array();
  for (const auto& [edge, s] : splits_) splits.push_back({edge, s.node, s.in_edge, s.out_edge});
  json connections = json::array();
  for (const auto& [pair, id] : connections_) connections.push_back({pair.first, pair.second, id});
  return json{{"next_id", next_id_}, {"splits", splits}, {"connections", connections}};
}

InnovationRegistry InnovationRegistry::from_json(const json& j) {
  InnovationRegistry r;
  r.next_id_ = j.at("next_id").get<Innovation>();
  for (const auto& s : j.value("splits", json::array()))
    r.splits_[s[0].get<Innovation>()] = {s[1].get<Innovation>(), s[2].get<Innovation>(),
                                         s[3].get<Innovation>()};
  for (const auto& c : j.value("connections", json::array()))
    r.connections_[{c[0].get<Innovation>(), c[1].get<Innovation>()}] = c[2].get<Innovation>();
  return r;
}

ChromosomeGraph new_minimal_chromosome(GenomeKind kind, const SearchSpace& space, Rng& rng,
                                       std::span<const SpeciesId> species) {
  if (kind == GenomeKind::module && space.node_params.empty())
    throw ConfigError("search space has no node hyperparameters");
  if (kind == GenomeKind::blueprint && space.global_params.empty())
    throw ConfigError("search space has no global hyperparameters");

  ChromosomeGraph c;
  c.kind = kind;
  c.nodes.push_back(new_node(kind, kMinimalSource, space, species, rng));
  c.nodes.push_back(new_node(kind, kMinimalSink, space, species, rng));
  c.edges.push_back({kMinimalEdge, kMinimalSource, kMinimalSink, true});
  if (kind == GenomeKind::blueprint) c.globals = sample_table(space.global_params, rng);
  return c;
}

std::optional<ChromosomeGraph> mutate_add_node(const ChromosomeGraph& chromosome,
                                               InnovationRegistry& registry,
                                               const SearchSpace& space,
                                               std::span<const SpeciesId> species, Rng& rng) {
  std::vector<std::size_t> enabled;
  for (std::size_t i = 0; i < chromosome.edges.size(); ++i)
    if (chromosome.edges[i].enabled) enabled.push_back(i);
  if (enabled.empty()) return std::nullopt;

  ChromosomeGraph out = chromosome;
  out.fitness.reset();
  out.secondary.reset();
  EdgeGene& target = out.edges[enabled[rng.index(enabled.size())]];
  target.enabled = false;
  const Innovation src = target.src;
  const Innovation dst = target.dst;

  SplitInnovation ids = registry.split(target.innovation);
  // The cached split can already be present when crossover re-enabled an
  // edge this chromosome split earlier in the same generation.
  if (out.find_node(ids.node) || out.find_edge(ids.in_edge) || out.find_edge(ids.out_edge))
    ids = {registry.fresh(), registry.fresh(), registry.fresh()};

  out.nodes.push_back(new_node(out.kind, ids.node, space, species, rng));
  out.edges.push_back({ids.in_edge, src, ids.node, true});
  out.edges.push_back({ids.out_edge, ids.node, dst, true});
  sort_genes(out.nodes);
  sort_genes(out.edges);
  return out;
}

std::vector<std::pair<Innovation, Innovation>> legal_connections(const ChromosomeGraph& chromosome) {
  const auto reach = reachability(chromosome);
  std::vector<std::pair<Innovation, Innovation>> pairs;
  const auto& nodes = chromosome.nodes;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      if (i == j || reach[j][i]) continue;  // j ~> i would close a cycle
      if (chromosome.has_connection(nodes[i].innovation, nodes[j].innovation)) continue;
      pairs.emplace_back(nodes[i].innovation, nodes[j].innovation);
    }
  }
  return pairs;
}

std::optional<ChromosomeGraph> mutate_add_connection(const ChromosomeGraph& chromosome,
                                                     InnovationRegistry& registry, Rng& rng) {
  const auto pairs = legal_connections(chromosome);
  if (pairs.empty()) return std::nullopt;
  const auto [src, dst] = pairs[rng.index(pairs.size())];
  ChromosomeGraph out = chromosome;
  out.fitness.reset();
  out.secondary.reset();
  Innovation id = registry.connect(src, dst);
  if (out.find_edge(id)) id = registry.fresh();
  out.edges.push_back({id, src, dst, true});
  sort_genes(out.edges);
  return out;
}

ChromosomeGraph mutate_hyperparameters(const ChromosomeGraph& chromosome, const SearchSpace& space,
                                       const HyperparameterMutation& options,
                                       std::span<const SpeciesId> species, Rng& rng) {
  ChromosomeGraph out = chromosome;
  if (options.node_params) {
    for (auto& node : out.nodes) {
      if (node.is_module_node()) {
        node.payload = mutate_table(node.params(), space.node_params, options.per_param_prob, rng);
      } else if (!species.empty() && rng.bernoulli(options.species_pointer_prob)) {
        node.payload = species[rng.index(species.size())];
      }
    }
  }
  if (options.globals && out.kind == GenomeKind::blueprint)
    out.globals = mutate_table(out.globals, space.global_params, options.per_param_prob, rng);
  if (!out.same_genes(chromosome)) {
    out.fitness.reset();
    out.secondary.reset();
  }
  return out;
}

ChromosomeGraph crossover(const ChromosomeGraph& a, const ChromosomeGraph& b, Rng& rng,
                          const CrossoverOptions& options) {
  if (a.kind != b.kind) throw GenomeError("crossover between a module and a blueprint");
  if (!a.fitness || !b.fitness) throw GenomeError("crossover parent without fitness");

  const bool a_fitter = *a.fitness >= *b.fitness;
  const ChromosomeGraph& fitter = a_fitter ? a : b;
  const ChromosomeGraph& other = a_fitter ? b : a;

  ChromosomeGraph child;
  child.kind = fitter.kind;
  child.nodes = fitter.nodes;
  child.edges = fitter.edges;
  child.globals = fitter.globals;

  if (!options.globals_only) {
    for (auto& node : child.nodes) {
      const NodeGene* match = other.find_node(node.innovation);
      if (match && rng.bernoulli(0.5)) node = *match;
    }
    for (auto& edge : child.edges) {
      const EdgeGene* match = other.find_edge(edge.innovation);
      const bool disabled_somewhere = !edge.enabled || (match && !match->enabled);
      if (match && rng.bernoulli(0.5)) edge = *match;
      if (disabled_somewhere) edge.enabled = !rng.bernoulli(options.disabled_carryover);
    }
  }

  for (auto& [name, value] : child.globals) {
    auto it = other.globals.find(name);
    if (it != other.globals.end() && rng.bernoulli(0.5)) value = it->second;
  }
  return child;
}

double compatibility_distance(const ChromosomeGraph& a, const ChromosomeGraph& b,
                              const SearchSpace& space, const CompatibilityCoefficients& c) {
  std::size_t mismatched = 0;
  double node_distance = 0.0;
  std::size_t matching = 0;

  auto ia = a.nodes.begin();
  auto ib = b.nodes.begin();
  while (ia != a.nodes.end() || ib != b.nodes.end()) {
    if (ib == b.nodes.end() || (ia != a.nodes.end() && ia->innovation < ib->innovation)) {
      ++mismatched;
      ++ia;
    } else if (ia == a.nodes.end() || ib->innovation < ia->innovation) {
      ++mismatched;
      ++ib;
    } else {
      ++matching;
      if (ia->is_module_node() && ib->is_module_node())
        node_distance += table_distance(ia->params(), ib->params(), space.node_params);
      else if (!ia->is_module_node() && !ib->is_module_node())
        node_distance += ia->species_pointer() == ib->species_pointer() ? 0.0 : 1.0;
      else
        node_distance += 1.0;
      ++ia;
      ++ib;
    }
  }

  auto ea = a.edges.begin();
  auto eb = b.edges.begin();
  while (ea != a.edges.end() || eb != b.edges.end()) {
    if (eb == b.edges.end() || (ea != a.edges.end() && ea->innovation < eb->innovation)) {
      ++mismatched;
      ++ea;
    } else if (ea == a.edges.end() || eb->innovation < ea->innovation) {
      ++mismatched;
      ++eb;
    } else {
      ++ea;
      ++eb;
    }
  }

  const double n = static_cast<double>(std::max<std::size_t>({a.gene_count(), b.gene_count(), 1}));
  double delta = c.excess_disjoint * static_cast<double>(mismatched) / n;
  if (matching > 0) delta += c.node_params * node_distance / static_cast<double>(matching);
  if (a.kind == GenomeKind::blueprint && b.kind == GenomeKind::blueprint)
    delta += c.globals * table_distance(a.globals, b.globals, space.global_params);
  return delta;
}

std::vector<Innovation> topological_order(const ChromosomeGraph& chromosome) {
  std::map<Innovation, int> indegree;
  std::map<Innovation, std::vector<Innovation>> out;
  for (const auto& n : chromosome.nodes) indegree[n.innovation] = 0;
  for (const auto& e : chromosome.edges) {
    ++indegree[e.dst];
    out[e.src].push_back(e.dst);
  }
  std::priority_queue<Innovation, std::vector<Innovation>, std::greater<>> ready;
  for (const auto& [id, d] : indegree)
    if (d == 0) ready.push(id);
  std::vector<Innovation> order;
  while (!ready.empty()) {
    const Innovation u = ready.top();
    ready.pop();
    order.push_back(u);
    for (Innovation v : out[u])
      if (--indegree[v] == 0) ready.push(v);
  }
  if (order.size() != indegree.size()) throw GenomeError("chromosome graph contains a cycle");
  return order;
}

std::vector<std::string> validate_chromosome(const ChromosomeGraph& c, const SearchSpace* space) {
  std::vector<std::string> out;
  if (c.nodes.empty()) out.push_back("chromosome has no nodes");

  std::set<Innovation> ids;
  std::set<Innovation> node_ids;
  for (const auto& n : c.nodes) {
    if (!ids.insert(n.innovation).second)
      out.push_back("duplicate innovation " + std::to_string(n.innovation));
    node_ids.insert(n.innovation);
    const bool module_node = n.is_module_node();
    if (module_node != (c.kind == GenomeKind::module))
      out.push_back("node " + std::to_string(n.innovation) + " payload does not match chromosome kind");
    if (module_node && space)
      for (auto& p : space->check_table(n.params(), false))
        out.push_back("node " + std::to_string(n.innovation) + ": " + p);
  }
  if (!std::is_sorted(c.nodes.begin(), c.nodes.end(),
                      [](const NodeGene& x, const NodeGene& y) { return x.innovation < y.innovation; }))
    out.push_back("nodes not sorted by innovation");

  std::set<std::pair<Innovation, Innovation>> pairs;
  bool endpoints_ok = true;
  for (const auto& e : c.edges) {
    if (!ids.insert(e.innovation).second)
      out.push_back("duplicate innovation " + std::to_string(e.innovation));
    if (e.src == e.dst) out.push_back("edge " + std::to_string(e.innovation) + " is a self-loop");
    if (!node_ids.contains(e.src) || !node_ids.contains(e.dst)) {
      out.push_back("edge " + std::to_string(e.innovation) + " references a missing node");
      endpoints_ok = false;
    }
    if (!pairs.insert({e.src, e.dst}).second)
      out.push_back("duplicate connection " + std::to_string(e.src) + "->" + std::to_string(e.dst));
  }
  if (!std::is_sorted(c.edges.begin(), c.edges.end(),
                      [](const EdgeGene& x, const EdgeGene& y) { return x.innovation < y.innovation; }))
    out.push_back("edges not sorted by innovation");

  if (endpoints_ok && !c.nodes.empty()) {
    try {
      topological_order(c);
    } catch (const GenomeError&) {
      out.push_back("chromosome graph contains a cycle");
    }
    bool has_source = false;
    bool has_sink = false;
    for (const auto& n : c.nodes) {
      bool in = false;
      bool outgoing = false;
      for (const auto& e : c.edges) {
        in = in || e.dst == n.innovation;
        outgoing = outgoing || e.src == n.innovation;
      }
      has_source = has_source || !in;
      has_sink = has_sink || !outgoing;
    }
    if (!has_source) out.push_back("chromosome graph has no source");
    if (!has_sink) out.push_back("chromosome graph has no sink");
  }

  if (c.kind == GenomeKind::module && !c.globals.empty())
    out.push_back("module chromosome carries global hyperparameters");
  if (c.kind == GenomeKind::blueprint) {
    if (c.globals.empty() && (!space || !space->global_params.empty()))
      out.push_back("blueprint chromosome lacks global hyperparameters");
    if (space)
      for (auto& p : space->check_table(c.globals, true)) out.push_back("globals: " + p);
  }
  return out;
}

json to_json(const ChromosomeGraph& c) {
  json nodes = json::array();
  for (const auto& n : c.nodes) {
    if (n.is_module_node())
      nodes.push_back({{"innovation", n.innovation}, {"params", to_json(n.params())}});
    else
      nodes.push_back({{"innovation", n.innovation}, {"species_pointer", n.species_pointer()}});
  }
  json edges = json::array();
  for (const auto& e : c.edges)
    edges.push_back({{"innovation", e.innovation}, {"src", e.src}, {"dst", e.dst}, {"enabled", e.enabled}});
  json j{{"id", c.id}, {"kind", to_string(c.kind)}, {"nodes", nodes}, {"edges", edges}};
  if (c.kind == GenomeKind::blueprint) j["globals"] = to_json(c.globals);
  if (c.fitness) j["fitness"] = *c.fitness;
  if (c.secondary) j["secondary"] = *c.secondary;
  return j;
}

ChromosomeGraph chromosome_from_json(const json& j) {
  ChromosomeGraph c;
  c.id = j.value("id", ChromosomeId{0});
  c.kind = genome_kind_from_string(j.at("kind").get<std::string>());
  for (const auto& n : j.at("nodes")) {
    NodeGene node;
    node.innovation = n.at("innovation").get<Innovation>();
    if (n.contains("params"))
      node.payload = table_from_json(n.at("params"));
    else
      node.payload = n.at("species_pointer").get<SpeciesId>();
    c.nodes.push_back(std::move(node));
  }
  for (const auto& e : j.at("edges"))
    c.edges.push_back({e.at("innovation").get<Innovation>(), e.at("src").get<Innovation>(),
                       e.at("dst").get<Innovation>(), e.at("enabled").get<bool>()});
  if (j.contains("globals")) c.globals = table_from_json(j.at("globals"));
  if (j.contains("fitness")) c.fitness = j.at("fitness").get<double>();
  if (j.contains("secondary")) c.secondary = j.at("secondary").get<double>();
  sort_genes(c.nodes);
  sort_genes(c.edges);
  return c;
}

}  // namespace coevo
