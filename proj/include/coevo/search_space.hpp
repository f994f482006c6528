#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "coevo/rng.hpp"
#include "json.hpp"

namespace coevo {

enum class ParamKind { real, integer, categorical, boolean };

std::string to_string(ParamKind kind);
ParamKind param_kind_from_string(const std::string& s);

using ParamValue = std::variant<double, std::int64_t, bool, std::string>;

struct HyperparameterSpec {
  std::string name;
  ParamKind kind = ParamKind::real;
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::string> choices;
  double mutation_sigma_fraction = 0.1;

  static HyperparameterSpec real(std::string name, double lo, double hi, double sigma = 0.1);
  static HyperparameterSpec integer(std::string name, std::int64_t lo, std::int64_t hi,
                                    double sigma = 0.1);
  static HyperparameterSpec categorical(std::string name, std::vector<std::string> choices);
  static HyperparameterSpec boolean(std::string name);

  // Empty when the spec itself is well-formed.
  std::vector<std::string> problems() const;
  bool admits(const ParamValue& value) const;

  ParamValue sample(Rng& rng) const;

  // Gaussian perturbation for ranged kinds (sigma = fraction * range width,
  // clamped, integers rounded to nearest), bit flip for booleans and uniform
  // resampling for categoricals.
  ParamValue mutate(const ParamValue& value, Rng& rng) const;

  // Distance normalized to [0, 1]: |a - b| / width for ranged kinds, 0/1
  // mismatch otherwise.
  double distance(const ParamValue& a, const ParamValue& b) const;
};

using HyperparameterTable = std::map<std::string, ParamValue>;

// Node-level and network-level search space for one problem domain.
struct SearchSpace {
  std::vector<HyperparameterSpec> node_params;
  std::vector<HyperparameterSpec> global_params;
  std::vector<std::int64_t> input_shape{32, 32, 3};
  std::int64_t output_units = 2;
  int min_pooling_layers = 0;
  bool weight_sharing = false;

  const HyperparameterSpec* find_node_param(const std::string& name) const;
  const HyperparameterSpec* find_global_param(const std::string& name) const;

  std::vector<std::string> problems() const;

  // Values outside the table's specs, unknown keys and missing keys.
  std::vector<std::string> check_table(const HyperparameterTable& table, bool globals) const;
};

HyperparameterTable sample_table(const std::vector<HyperparameterSpec>& specs, Rng& rng);

// Each parameter mutates independently with probability `per_param_prob`.
HyperparameterTable mutate_table(const HyperparameterTable& table,
                                 const std::vector<HyperparameterSpec>& specs,
                                 double per_param_prob, Rng& rng);

// Mean normalized distance over the specs; 0 for an empty spec list.
double table_distance(const HyperparameterTable& a, const HyperparameterTable& b,
                      const std::vector<HyperparameterSpec>& specs);

nlohmann::json to_json(const ParamValue& value);
ParamValue param_value_from_json(const nlohmann::json& j);
nlohmann::json to_json(const HyperparameterTable& table);
HyperparameterTable table_from_json(const nlohmann::json& j);
nlohmann::json to_json(const HyperparameterSpec& spec);
HyperparameterSpec spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SearchSpace& space);
SearchSpace search_space_from_json(const nlohmann::json& j);

std::string format_value(const ParamValue& value);

// Appendix-table search spaces used by the bundled configurations.
SearchSpace text_search_space();
SearchSpace vision_search_space();

}  // namespace coevo
