#include "coevo/network_ir.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>

#include "coevo/errors.hpp"

namespace coevo {

using nlohmann::json;

namespace {

constexpr std::pair<OpKind, const char*> kOpNames[] = {
    {OpKind::conv1d, "conv1d"},   {OpKind::conv2d, "conv2d"},
    {OpKind::dense, "dense"},     {OpKind::lstm, "lstm"},
    {OpKind::gru, "gru"},         {OpKind::dropout, "dropout"},
    {OpKind::max_pool, "max_pool"}, {OpKind::flatten, "flatten"},
    {OpKind::concat_merge, "concat_merge"}, {OpKind::input, "input"},
    {OpKind::output, "output"},
};

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

std::int64_t int_attr(const LayerSpec& layer, const char* key, std::int64_t fallback) {
  auto it = layer.attrs.find(key);
  if (it == layer.attrs.end() || !it->is_number_integer()) return fallback;
  return it->get<std::int64_t>();
}

std::int64_t required_int(const LayerSpec& layer, const char* key) {
  auto it = layer.attrs.find(key);
  if (it == layer.attrs.end() || !it->is_number_integer())
    throw NetworkError("layer '" + layer.id + "': missing integer attr '" + key + "'");
  return it->get<std::int64_t>();
}

std::vector<std::string> required_attrs(OpKind op) {
  switch (op) {
    case OpKind::conv1d:
    case OpKind::conv2d:
      return {"filters", "kernel_size", "activation", "initializer"};
    case OpKind::dense:
    case OpKind::lstm:
    case OpKind::gru:
      return {"units", "activation", "initializer"};
    case OpKind::dropout:
      return {"rate"};
    case OpKind::input:
      return {"shape"};
    case OpKind::output:
      return {"units", "activation"};
    case OpKind::max_pool:
    case OpKind::flatten:
    case OpKind::concat_merge:
      return {};
  }
  return {};
}

const std::set<std::string> kActivations{"relu", "linear", "elu", "selu", "softmax", "sigmoid",
                                         "tanh"};
const std::set<std::string> kInitializers{"glorot", "he"};

std::vector<std::string> attr_problems(const LayerSpec& layer) {
  std::vector<std::string> out;
  const std::string where = "layer '" + layer.id + "': ";
  if (!layer.attrs.is_object()) {
    out.push_back(where + "attrs must be an object");
    return out;
  }
  for (const auto& key : required_attrs(layer.op))
    if (!layer.attrs.contains(key)) out.push_back(where + "missing attr '" + key + "'");
  for (const char* key : {"filters", "units", "kernel_size", "strides", "pool_size"}) {
    auto it = layer.attrs.find(key);
    if (it != layer.attrs.end() && (!it->is_number_integer() || it->get<std::int64_t>() <= 0))
      out.push_back(where + "attr '" + key + "' must be a positive integer");
  }
  if (auto it = layer.attrs.find("activation"); it != layer.attrs.end())
    if (!it->is_string() || !kActivations.contains(it->get<std::string>()))
      out.push_back(where + "unknown activation");
  if (auto it = layer.attrs.find("initializer"); it != layer.attrs.end())
    if (!it->is_string() || !kInitializers.contains(it->get<std::string>()))
      out.push_back(where + "unknown initializer");
  if (auto it = layer.attrs.find("rate"); it != layer.attrs.end()) {
    if (!it->is_number() || it->get<double>() < 0.0 || it->get<double>() >= 1.0)
      out.push_back(where + "dropout rate must lie in [0, 1)");
  }
  if (layer.op == OpKind::input) {
    auto it = layer.attrs.find("shape");
    bool ok = it != layer.attrs.end() && it->is_array() && !it->empty();
    if (ok)
      for (const auto& d : *it) ok = ok && d.is_number_integer() && d.get<std::int64_t>() > 0;
    if (!ok) out.push_back(where + "input shape must be a non-empty list of positive integers");
  }
  return out;
}

TensorShape merged_shape(const LayerSpec& layer, const std::vector<TensorShape>& ins) {
  if (ins.empty()) throw NetworkError("layer '" + layer.id + "': no inbound tensors to merge");
  TensorShape out = ins.front();
  for (std::size_t i = 1; i < ins.size(); ++i) {
    const auto& s = ins[i];
    if (s.rank() != out.rank())
      throw NetworkError("layer '" + layer.id + "': rank mismatch between merged inputs (" +
                         to_string(out) + " vs " + to_string(s) + ")");
    for (std::size_t d = 0; d + 1 < s.rank(); ++d)
      if (s.dims[d] != out.dims[d])
        throw NetworkError("layer '" + layer.id + "': non-feature dimension mismatch (" +
                           to_string(out) + " vs " + to_string(s) + ")");
    out.dims.back() += s.dims.back();
  }
  return out;
}

void require_rank(const LayerSpec& layer, const TensorShape& in, std::size_t rank) {
  if (in.rank() != rank)
    throw NetworkError("layer '" + layer.id + "': rank mismatch, " + to_string(layer.op) +
                       " expects rank " + std::to_string(rank) + " input but got " + to_string(in));
}

TensorShape apply_op(const LayerSpec& layer, const std::vector<TensorShape>& ins) {
  if (layer.op == OpKind::concat_merge || layer.op == OpKind::output) {
    TensorShape in = merged_shape(layer, ins);
    if (layer.op == OpKind::concat_merge) return in;
    return TensorShape{{required_int(layer, "units")}};
  }
  if (ins.size() != 1)
    throw NetworkError("layer '" + layer.id + "': " + to_string(layer.op) +
                       " takes exactly one inbound tensor, got " + std::to_string(ins.size()));
  const TensorShape& in = ins.front();
  switch (layer.op) {
    case OpKind::conv1d: {
      require_rank(layer, in, 2);
      const auto stride = int_attr(layer, "strides", 1);
      return TensorShape{{ceil_div(in.dims[0], stride), required_int(layer, "filters")}};
    }
    case OpKind::conv2d: {
      require_rank(layer, in, 3);
      const auto stride = int_attr(layer, "strides", 1);
      return TensorShape{{ceil_div(in.dims[0], stride), ceil_div(in.dims[1], stride),
                          required_int(layer, "filters")}};
    }
    case OpKind::dense: {
      TensorShape out = in;
      out.dims.back() = required_int(layer, "units");
      return out;
    }
    case OpKind::lstm:
    case OpKind::gru:
      require_rank(layer, in, 2);
      return TensorShape{{in.dims[0], required_int(layer, "units")}};
    case OpKind::dropout:
      return in;
    case OpKind::max_pool: {
      const auto p = int_attr(layer, "pool_size", 2);
      if (in.rank() == 2) return TensorShape{{ceil_div(in.dims[0], p), in.dims[1]}};
      if (in.rank() == 3)
        return TensorShape{{ceil_div(in.dims[0], p), ceil_div(in.dims[1], p), in.dims[2]}};
      throw NetworkError("layer '" + layer.id + "': rank mismatch, max_pool expects rank 2 or 3 input but got " +
                         to_string(in));
    }
    case OpKind::flatten:
      return TensorShape{{in.elements()}};
    default:
      break;
  }
  throw NetworkError("layer '" + layer.id + "': unexpected op");
}

}  // namespace

std::string to_string(OpKind op) {
  for (const auto& [k, name] : kOpNames)
    if (k == op) return name;
  return "?";
}

std::optional<OpKind> op_kind_from_string(const std::string& s) {
  for (const auto& [k, name] : kOpNames)
    if (s == name) return k;
  return std::nullopt;
}

std::int64_t TensorShape::elements() const {
  return std::accumulate(dims.begin(), dims.end(), std::int64_t{1}, std::multiplies<>());
}

std::string to_string(const TensorShape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.dims.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape.dims[i]);
  }
  return s + ")";
}

const LayerSpec* NetworkGraph::find(const std::string& id) const {
  for (const auto& l : layers)
    if (l.id == id) return &l;
  return nullptr;
}

std::vector<std::string> topological_layer_order(const NetworkGraph& network) {
  std::map<std::string, int> indegree;
  std::map<std::string, std::vector<std::string>> consumers;
  for (const auto& l : network.layers) {
    if (indegree.contains(l.id)) throw NetworkError("duplicate layer id '" + l.id + "'");
    indegree[l.id] = 0;
  }
  for (const auto& l : network.layers) {
    for (const auto& src : l.inbound) {
      if (!indegree.contains(src))
        throw NetworkError("layer '" + l.id + "': unknown inbound layer '" + src + "'");
      ++indegree[l.id];
      consumers[src].push_back(l.id);
    }
  }
  std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
  for (const auto& [id, d] : indegree)
    if (d == 0) ready.push(id);
  std::vector<std::string> order;
  while (!ready.empty()) {
    auto id = ready.top();
    ready.pop();
    order.push_back(id);
    for (const auto& c : consumers[id])
      if (--indegree[c] == 0) ready.push(c);
  }
  if (order.size() != network.layers.size()) {
    std::string stuck;
    for (const auto& [id, d] : indegree)
      if (d > 0) stuck = id;
    throw NetworkError("cycle through layer '" + stuck + "'");
  }
  return order;
}

std::map<std::string, TensorShape> infer_shapes(const NetworkGraph& network,
                                                const std::optional<TensorShape>& input_shape) {
  const auto order = topological_layer_order(network);
  std::size_t input_count = 0;
  for (const auto& l : network.layers) input_count += l.op == OpKind::input;

  std::map<std::string, TensorShape> shapes;
  for (const auto& id : order) {
    const LayerSpec& layer = *network.find(id);
    if (layer.op == OpKind::input) {
      if (!layer.inbound.empty()) throw NetworkError("layer '" + id + "': input layer has inbound edges");
      if (input_shape && input_count == 1) {
        shapes[id] = *input_shape;
      } else {
        auto it = layer.attrs.find("shape");
        if (it == layer.attrs.end()) throw NetworkError("layer '" + id + "': input without shape");
        shapes[id] = TensorShape{it->get<std::vector<std::int64_t>>()};
      }
      continue;
    }
    std::vector<TensorShape> ins;
    for (const auto& src : layer.inbound) ins.push_back(shapes.at(src));
    shapes[id] = apply_op(layer, ins);
  }
  return shapes;
}

std::int64_t layer_parameters(const LayerSpec& layer, const TensorShape& in) {
  const std::int64_t c = in.features();
  switch (layer.op) {
    case OpKind::conv1d: {
      const auto k = required_int(layer, "kernel_size");
      const auto f = required_int(layer, "filters");
      return k * c * f + f;
    }
    case OpKind::conv2d: {
      const auto k = required_int(layer, "kernel_size");
      const auto f = required_int(layer, "filters");
      return k * k * c * f + f;
    }
    case OpKind::dense:
    case OpKind::output: {
      const auto u = required_int(layer, "units");
      return c * u + u;
    }
    case OpKind::lstm: {
      const auto h = required_int(layer, "units");
      return 4 * ((c + h) * h + h);
    }
    case OpKind::gru: {
      const auto h = required_int(layer, "units");
      return 3 * ((c + h) * h + h);
    }
    default:
      return 0;
  }
}

std::int64_t count_parameters(const NetworkGraph& network,
                              const std::optional<TensorShape>& input_shape) {
  const auto shapes = infer_shapes(network, input_shape);
  std::set<std::string> shared_blocks;
  std::int64_t total = 0;
  for (const auto& layer : network.layers) {
    if (layer.op == OpKind::input) continue;
    std::vector<TensorShape> ins;
    for (const auto& src : layer.inbound) ins.push_back(shapes.at(src));
    // Merged feature width is what a dense/output head sees.
    const TensorShape in = ins.size() == 1 ? ins.front() : merged_shape(layer, ins);
    const std::int64_t params = layer_parameters(layer, in);
    if (params == 0) continue;
    if (network.weight_sharing) {
      auto group = layer.attrs.find("share_group");
      if (group != layer.attrs.end()) {
        json key_attrs = layer.attrs;
        key_attrs.erase("share_group");
        const std::string key = group->dump() + "|" + to_string(layer.op) + "|" +
                                std::to_string(in.features()) + "|" + key_attrs.dump();
        if (!shared_blocks.insert(key).second) continue;
      }
    }
    total += params;
  }
  return total;
}

std::vector<std::string> validate_dag(const NetworkGraph& network) {
  std::vector<std::string> out;
  std::set<std::string> ids;
  for (const auto& l : network.layers) {
    if (l.id.empty()) out.push_back("layer with empty id");
    if (!ids.insert(l.id).second) out.push_back("duplicate layer id '" + l.id + "'");
  }
  bool structure_ok = out.empty();
  for (const auto& l : network.layers) {
    for (const auto& src : l.inbound) {
      if (src == l.id) {
        out.push_back("layer '" + l.id + "': cycle (self-loop)");
        structure_ok = false;
      } else if (!ids.contains(src)) {
        out.push_back("layer '" + l.id + "': unknown inbound layer '" + src + "'");
        structure_ok = false;
      }
    }
    for (auto& p : attr_problems(l)) out.push_back(std::move(p));
    if (l.op == OpKind::input && !l.inbound.empty())
      out.push_back("layer '" + l.id + "': input layer has inbound edges");
    if (l.op != OpKind::input && l.inbound.empty())
      out.push_back("layer '" + l.id + "': no inbound edges");
  }
  if (network.inputs.empty()) out.push_back("network declares no inputs");
  if (network.outputs.empty()) out.push_back("network declares no outputs");
  for (const auto& id : network.inputs) {
    const auto* l = network.find(id);
    if (!l || l->op != OpKind::input) out.push_back("declared input '" + id + "' is not an input layer");
  }
  for (const auto& id : network.outputs)
    if (!network.find(id)) out.push_back("declared output '" + id + "' does not exist");
  for (const auto& l : network.layers)
    for (const auto& src : l.inbound)
      if (std::find(network.outputs.begin(), network.outputs.end(), src) != network.outputs.end())
        out.push_back("output layer '" + src + "' feeds layer '" + l.id + "'");

  if (structure_ok) {
    try {
      topological_layer_order(network);
    } catch (const NetworkError& e) {
      out.push_back(e.what());
      structure_ok = false;
    }
  }
  if (!structure_ok) return out;

  // Reachability from inputs and to outputs.
  std::map<std::string, std::vector<std::string>> consumers;
  for (const auto& l : network.layers)
    for (const auto& src : l.inbound) consumers[src].push_back(l.id);
  std::set<std::string> forward(network.inputs.begin(), network.inputs.end());
  std::vector<std::string> stack(network.inputs.begin(), network.inputs.end());
  while (!stack.empty()) {
    auto id = stack.back();
    stack.pop_back();
    for (const auto& c : consumers[id])
      if (forward.insert(c).second) stack.push_back(c);
  }
  std::set<std::string> backward(network.outputs.begin(), network.outputs.end());
  stack.assign(network.outputs.begin(), network.outputs.end());
  while (!stack.empty()) {
    auto id = stack.back();
    stack.pop_back();
    const auto* l = network.find(id);
    if (!l) continue;
    for (const auto& src : l->inbound)
      if (backward.insert(src).second) stack.push_back(src);
  }
  for (const auto& l : network.layers) {
    if (!forward.contains(l.id)) out.push_back("layer '" + l.id + "': unreachable from any input");
    if (!backward.contains(l.id)) out.push_back("layer '" + l.id + "': does not reach any output");
  }

  if (out.empty()) {
    try {
      infer_shapes(network);
    } catch (const NetworkError& e) {
      out.push_back(e.what());
    } catch (const json::exception& e) {
      out.push_back(std::string("malformed attrs: ") + e.what());
    }
  }
  return out;
}

json network_to_json(const NetworkGraph& network) {
  const auto order = topological_layer_order(network);
  json layers = json::array();
  for (const auto& id : order) {
    const LayerSpec& l = *network.find(id);
    layers.push_back(
        {{"id", l.id}, {"op_kind", to_string(l.op)}, {"attrs", l.attrs}, {"inbound", l.inbound}});
  }
  json globals = to_json(network.globals);
  globals["weight_sharing"] = network.weight_sharing;
  return json{{"format_version", kInterchangeFormatVersion},
              {"layers", layers},
              {"inputs", network.inputs},
              {"outputs", network.outputs},
              {"globals", globals}};
}

std::string serialize_network(const NetworkGraph& network) { return network_to_json(network).dump(); }

NetworkGraph network_from_json(const json& j) {
  if (j.at("format_version").get<std::string>() != kInterchangeFormatVersion)
    throw NetworkError("unsupported interchange format_version");
  NetworkGraph n;
  for (const auto& l : j.at("layers")) {
    LayerSpec layer;
    layer.id = l.at("id").get<std::string>();
    const auto op = op_kind_from_string(l.at("op_kind").get<std::string>());
    if (!op) throw NetworkError("layer '" + layer.id + "': unknown op_kind");
    layer.op = *op;
    layer.attrs = l.value("attrs", json::object());
    layer.inbound = l.value("inbound", std::vector<std::string>{});
    n.layers.push_back(std::move(layer));
  }
  n.inputs = j.at("inputs").get<std::vector<std::string>>();
  n.outputs = j.at("outputs").get<std::vector<std::string>>();
  json globals = j.value("globals", json::object());
  if (globals.contains("weight_sharing")) {
    n.weight_sharing = globals.at("weight_sharing").get<bool>();
    globals.erase("weight_sharing");
  }
  n.globals = table_from_json(globals);
  return n;
}

NetworkGraph deserialize_network(const std::string& bytes) {
  try {
    return network_from_json(json::parse(bytes));
  } catch (const json::exception& e) {
    throw NetworkError(std::string("malformed interchange JSON: ") + e.what());
  }
}

NetworkGraph augment_filters(const NetworkGraph& network, double scale) {
  if (!(scale >= 1.0)) throw NetworkError("augment_filters: scale must be >= 1");
  NetworkGraph out = network;
  for (auto& l : out.layers) {
    const char* key = nullptr;
    if (l.op == OpKind::conv1d || l.op == OpKind::conv2d) key = "filters";
    if (l.op == OpKind::dense) key = "units";
    if (!key || !l.attrs.contains(key)) continue;
    const auto v = l.attrs.at(key).get<std::int64_t>();
    l.attrs[key] = static_cast<std::int64_t>(std::ceil(static_cast<double>(v) * scale - 1e-9));
  }
  return out;
}

}  // namespace coevo
