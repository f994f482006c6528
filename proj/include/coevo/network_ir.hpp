#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coevo/search_space.hpp"
#include "json.hpp"

namespace coevo {

enum class OpKind {
  conv1d,
  conv2d,
  dense,
  lstm,
  gru,
  dropout,
  max_pool,
  flatten,
  concat_merge,
  input,
  output,
};

std::string to_string(OpKind op);
std::optional<OpKind> op_kind_from_string(const std::string& s);

// attrs is a JSON object; required keys depend on op_kind:
//   conv1d/conv2d: filters, kernel_size, activation, initializer (strides optional, default 1)
//   dense:         units, activation, initializer
//   lstm/gru:      units, activation, initializer
//   dropout:       rate in [0, 1)
//   max_pool:      pool_size (optional, default 2)
//   input:         shape (list of positive dims, batch excluded)
//   output:        units, activation
// Any layer may carry "share_group": layers with equal group and equal
// parameter shapes count one parameter block when weight sharing is on.
struct LayerSpec {
  std::string id;
  OpKind op = OpKind::dense;
  nlohmann::json attrs = nlohmann::json::object();
  std::vector<std::string> inbound;
};

struct NetworkGraph {
  std::vector<LayerSpec> layers;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  HyperparameterTable globals;
  bool weight_sharing = false;

  const LayerSpec* find(const std::string& id) const;
};

// Batch dimension excluded. Rank 1 = features, rank 2 = (time, features),
// rank 3 = (height, width, channels).
struct TensorShape {
  std::vector<std::int64_t> dims;

  std::size_t rank() const { return dims.size(); }
  std::int64_t features() const { return dims.empty() ? 0 : dims.back(); }
  std::int64_t elements() const;
  bool operator==(const TensorShape&) const = default;
};

std::string to_string(const TensorShape& shape);

// All violations: cycles, dangling or duplicate ids, unreachable layers,
// missing attrs and shape conflicts. Empty means valid.
std::vector<std::string> validate_dag(const NetworkGraph& network);

// Layer ids in a topological order (stable with respect to the layer list).
// Throws NetworkError on a cycle or unknown inbound id.
std::vector<std::string> topological_layer_order(const NetworkGraph& network);

// Same-padding, stride 1 except pooling (which halves time/space, rounding up).
// Throws NetworkError naming the offending layer. `input_shape` overrides the
// input layer's declared shape when the network has a single input.
std::map<std::string, TensorShape> infer_shapes(
    const NetworkGraph& network, const std::optional<TensorShape>& input_shape = std::nullopt);

// Trainable parameters of one layer given its inbound shape.
std::int64_t layer_parameters(const LayerSpec& layer, const TensorShape& in);

std::int64_t count_parameters(const NetworkGraph& network,
                              const std::optional<TensorShape>& input_shape = std::nullopt);

// Canonical interchange JSON: sorted keys, layers in topological order.
std::string serialize_network(const NetworkGraph& network);
nlohmann::json network_to_json(const NetworkGraph& network);
NetworkGraph deserialize_network(const std::string& bytes);
NetworkGraph network_from_json(const nlohmann::json& j);

// Multiplies conv filters and dense units by `scale`, rounding up. Throws
// NetworkError when scale < 1.
NetworkGraph augment_filters(const NetworkGraph& network, double scale);

inline constexpr const char* kInterchangeFormatVersion = "1";

}  // namespace coevo
