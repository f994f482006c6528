#include "coevo/assembly.hpp"

#include <algorithm>
#include <set>

#include "coevo/errors.hpp"

namespace coevo {

using nlohmann::json;

std::vector<ChromosomeId> AssembledNetwork::module_ids() const {
  std::set<ChromosomeId> ids;
  for (const auto& [species, id] : module_choices) ids.insert(id);
  return {ids.begin(), ids.end()};
}

namespace {

std::string param_string(const HyperparameterTable& p, const char* key, const std::string& fallback) {
  auto it = p.find(key);
  if (it == p.end()) return fallback;
  if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
  return format_value(it->second);
}

std::int64_t param_int(const HyperparameterTable& p, const char* key, std::int64_t fallback) {
  auto it = p.find(key);
  if (it == p.end()) return fallback;
  if (const auto* v = std::get_if<std::int64_t>(&it->second)) return *v;
  if (const auto* v = std::get_if<double>(&it->second)) return static_cast<std::int64_t>(*v);
  if (const auto* v = std::get_if<std::string>(&it->second)) return std::stoll(*v);
  return fallback;
}

double param_real(const HyperparameterTable& p, const char* key, double fallback) {
  auto it = p.find(key);
  if (it == p.end()) return fallback;
  if (const auto* v = std::get_if<double>(&it->second)) return *v;
  if (const auto* v = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*v);
  return fallback;
}

struct Enabled {
  std::map<Innovation, std::vector<Innovation>> preds;
  std::map<Innovation, std::vector<Innovation>> succs;
};

Enabled enabled_adjacency(const ChromosomeGraph& c) {
  Enabled g;
  for (const auto& n : c.nodes) {
    g.preds[n.innovation];
    g.succs[n.innovation];
  }
  for (const auto& e : c.edges) {
    if (!e.enabled) continue;
    g.preds[e.dst].push_back(e.src);
    g.succs[e.src].push_back(e.dst);
  }
  return g;
}

std::string merge_if_needed(NetworkGraph& net, const std::vector<std::string>& producers,
                            const std::string& id) {
  if (producers.size() == 1) return producers.front();
  LayerSpec merge;
  merge.id = id;
  merge.op = OpKind::concat_merge;
  merge.inbound = producers;
  net.layers.push_back(std::move(merge));
  return id;
}

}  // namespace

LayerSpec layer_from_params(const std::string& id, const HyperparameterTable& params) {
  const std::string type = param_string(params, "layer_type", "dense");
  const auto op = op_kind_from_string(type);
  if (!op) throw NetworkError("unknown layer_type '" + type + "'");
  LayerSpec layer;
  layer.id = id;
  layer.op = *op;
  const auto width = param_int(params, "width", 32);
  const std::string activation = param_string(params, "activation", "relu");
  const std::string initializer = param_string(params, "initializer", "glorot");
  switch (layer.op) {
    case OpKind::conv1d:
    case OpKind::conv2d:
      layer.attrs = {{"filters", width},
                     {"kernel_size", param_int(params, "kernel_size", 3)},
                     {"activation", activation},
                     {"initializer", initializer}};
      break;
    case OpKind::dense:
    case OpKind::lstm:
    case OpKind::gru:
      layer.attrs = {{"units", width}, {"activation", activation}, {"initializer", initializer}};
      break;
    case OpKind::dropout:
      layer.attrs = {{"rate", param_real(params, "dropout_rate", 0.0)}};
      break;
    default:
      throw NetworkError("layer_type '" + type + "' cannot appear in a module");
  }
  return layer;
}

NetworkGraph build_network(const ChromosomeGraph& blueprint,
                           const std::map<SpeciesId, const ChromosomeGraph*>& modules,
                           const SearchSpace& space) {
  if (blueprint.kind != GenomeKind::blueprint) throw NetworkError("build_network needs a blueprint");
  const auto order = topological_order(blueprint);
  const Enabled bp = enabled_adjacency(blueprint);

  // Longest-path levels over enabled edges; sources sit at level 1.
  std::map<Innovation, int> level;
  int depth = 0;
  for (Innovation v : order) {
    int l = 1;
    for (Innovation u : bp.preds.at(v)) l = std::max(l, level.at(u) + 1);
    level[v] = l;
    depth = std::max(depth, l);
  }
  // pools_at[k]: pooling layers on the cut between level k and k + 1.
  std::vector<int> pools_at(static_cast<std::size_t>(depth) + 2, 0);
  const int pools = std::max(0, space.min_pooling_layers);
  for (int k = 1; k <= depth; ++k)
    pools_at[static_cast<std::size_t>(k)] = (k * pools) / depth - ((k - 1) * pools) / depth;
  auto pools_between = [&](int from_level, int to_level) {
    int n = 0;
    for (int k = from_level; k < to_level; ++k) n += pools_at[static_cast<std::size_t>(k)];
    return n;
  };

  NetworkGraph net;
  net.globals = blueprint.globals;
  net.weight_sharing = space.weight_sharing;
  LayerSpec input;
  input.id = "input";
  input.op = OpKind::input;
  input.attrs = {{"shape", space.input_shape}};
  net.layers.push_back(std::move(input));
  net.inputs = {"input"};

  auto pooled = [&](std::string producer, int count, const std::string& tag) {
    for (int i = 0; i < count; ++i) {
      LayerSpec pool;
      pool.id = "pool." + tag + "." + std::to_string(i);
      pool.op = OpKind::max_pool;
      pool.attrs = {{"pool_size", 2}};
      pool.inbound = {producer};
      producer = pool.id;
      net.layers.push_back(std::move(pool));
    }
    return producer;
  };

  std::map<Innovation, std::string> exit_of;
  for (Innovation b : order) {
    const NodeGene* node = blueprint.find_node(b);
    const auto found = modules.find(node->species_pointer());
    if (found == modules.end() || !found->second)
      throw NetworkError("no module chosen for species " + std::to_string(node->species_pointer()));
    const ChromosomeGraph& module = *found->second;
    const std::string prefix = "b" + std::to_string(b);

    std::vector<std::string> producers;
    if (bp.preds.at(b).empty()) {
      producers.push_back(pooled("input", pools_between(0, level.at(b)), prefix + ".in"));
    } else {
      for (Innovation u : bp.preds.at(b))
        producers.push_back(pooled(exit_of.at(u), pools_between(level.at(u), level.at(b)),
                                   "b" + std::to_string(u) + "-" + prefix));
    }
    const std::string entry = merge_if_needed(net, producers, prefix + ".in");

    const Enabled mg = enabled_adjacency(module);
    std::vector<std::string> sinks;
    for (Innovation m : topological_order(module)) {
      const std::string id = prefix + ".m" + std::to_string(m);
      std::vector<std::string> inbound;
      for (Innovation p : mg.preds.at(m)) inbound.push_back(prefix + ".m" + std::to_string(p));
      if (inbound.empty()) inbound.push_back(entry);
      const std::string feed = merge_if_needed(net, inbound, id + ".in");
      LayerSpec layer = layer_from_params(id, module.find_node(m)->params());
      layer.inbound = {feed};
      if (space.weight_sharing)
        layer.attrs["share_group"] = "c" + std::to_string(module.id) + ".n" + std::to_string(m);
      net.layers.push_back(std::move(layer));
      if (mg.succs.at(m).empty()) sinks.push_back(id);
    }
    exit_of[b] = merge_if_needed(net, sinks, prefix + ".out");
  }

  LayerSpec output;
  output.id = "output";
  output.op = OpKind::output;
  output.attrs = {{"units", space.output_units}, {"activation", "softmax"}};
  for (Innovation b : order)
    if (bp.succs.at(b).empty())
      output.inbound.push_back(pooled(exit_of.at(b), pools_between(level.at(b), depth + 1),
                                      "b" + std::to_string(b) + "-out"));
  net.layers.push_back(std::move(output));
  net.outputs = {"output"};

  const auto problems = validate_dag(net);
  if (!problems.empty()) throw NetworkError("assembled network invalid: " + problems.front());
  return net;
}

int repoint_dead_species(Population& blueprints, const std::vector<SpeciesId>& live, Rng& rng) {
  if (live.empty()) return 0;
  const std::set<SpeciesId> alive(live.begin(), live.end());
  int changed = 0;
  for (auto& s : blueprints.species) {
    for (auto& bp : s.members) {
      for (auto& node : bp.nodes) {
        if (node.is_module_node() || alive.contains(node.species_pointer())) continue;
        node.payload = live[rng.index(live.size())];
        ++changed;
      }
    }
  }
  return changed;
}

std::vector<AssembledNetwork> assemble_networks(Population& blueprints, const Population& modules,
                                                int count, const SearchSpace& space, Rng& rng,
                                                int generation) {
  repoint_dead_species(blueprints, modules.species_ids(), rng);
  const auto pool = blueprints.members();
  std::vector<AssembledNetwork> out;
  if (pool.empty()) return out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const ChromosomeGraph& bp = *pool[static_cast<std::size_t>(i) % pool.size()];
    AssembledNetwork a;
    a.network_id = "g" + std::to_string(generation) + "-n" + std::to_string(i);
    a.blueprint_id = bp.id;
    std::set<SpeciesId> referenced;
    for (const auto& node : bp.nodes) referenced.insert(node.species_pointer());
    std::map<SpeciesId, const ChromosomeGraph*> chosen;
    for (SpeciesId s : referenced) {
      const Species* species = modules.find(s);
      if (!species || species->members.empty()) continue;
      const auto& m = species->members[rng.index(species->members.size())];
      chosen[s] = &m;
      a.module_choices[s] = m.id;
    }
    try {
      a.network = build_network(bp, chosen, space);
    } catch (const std::exception& e) {
      a.failed = true;
      a.failure = e.what();
    }
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace coevo
