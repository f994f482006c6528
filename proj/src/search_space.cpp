#include "coevo/search_space.hpp"

#include <algorithm>
#include <cmath>

#include "coevo/errors.hpp"

namespace coevo {

using nlohmann::json;

std::string to_string(ParamKind kind) {
  switch (kind) {
    case ParamKind::real:
      return "real";
    case ParamKind::integer:
      return "integer";
    case ParamKind::categorical:
      return "categorical";
    case ParamKind::boolean:
      return "boolean";
  }
  return "?";
}

ParamKind param_kind_from_string(const std::string& s) {
  if (s == "real") return ParamKind::real;
  if (s == "integer") return ParamKind::integer;
  if (s == "categorical") return ParamKind::categorical;
  if (s == "boolean") return ParamKind::boolean;
  throw ConfigError("unknown hyperparameter kind '" + s + "'");
}

HyperparameterSpec HyperparameterSpec::real(std::string name, double lo, double hi, double sigma) {
  HyperparameterSpec s;
  s.name = std::move(name);
  s.kind = ParamKind::real;
  s.lo = lo;
  s.hi = hi;
  s.mutation_sigma_fraction = sigma;
  return s;
}

HyperparameterSpec HyperparameterSpec::integer(std::string name, std::int64_t lo, std::int64_t hi,
                                               double sigma) {
  HyperparameterSpec s;
  s.name = std::move(name);
  s.kind = ParamKind::integer;
  s.lo = static_cast<double>(lo);
  s.hi = static_cast<double>(hi);
  s.mutation_sigma_fraction = sigma;
  return s;
}

HyperparameterSpec HyperparameterSpec::categorical(std::string name,
                                                   std::vector<std::string> choices) {
  HyperparameterSpec s;
  s.name = std::move(name);
  s.kind = ParamKind::categorical;
  s.choices = std::move(choices);
  return s;
}

HyperparameterSpec HyperparameterSpec::boolean(std::string name) {
  HyperparameterSpec s;
  s.name = std::move(name);
  s.kind = ParamKind::boolean;
  return s;
}

std::vector<std::string> HyperparameterSpec::problems() const {
  std::vector<std::string> out;
  if (name.empty()) out.push_back("hyperparameter with empty name");
  switch (kind) {
    case ParamKind::real:
    case ParamKind::integer:
      if (!(lo < hi)) out.push_back(name + ": range requires lo < hi");
      if (!(mutation_sigma_fraction >= 0.0 && mutation_sigma_fraction <= 1.0))
        out.push_back(name + ": mutation_sigma_fraction must lie in [0, 1]");
      if (kind == ParamKind::integer && (lo != std::floor(lo) || hi != std::floor(hi)))
        out.push_back(name + ": integer range bounds must be integral");
      break;
    case ParamKind::categorical:
      if (choices.empty()) out.push_back(name + ": categorical requires at least one choice");
      break;
    case ParamKind::boolean:
      break;
  }
  return out;
}

bool HyperparameterSpec::admits(const ParamValue& value) const {
  switch (kind) {
    case ParamKind::real: {
      const auto* v = std::get_if<double>(&value);
      return v && *v >= lo && *v <= hi;
    }
    case ParamKind::integer: {
      const auto* v = std::get_if<std::int64_t>(&value);
      return v && static_cast<double>(*v) >= lo && static_cast<double>(*v) <= hi;
    }
    case ParamKind::categorical: {
      const auto* v = std::get_if<std::string>(&value);
      return v && std::find(choices.begin(), choices.end(), *v) != choices.end();
    }
    case ParamKind::boolean:
      return std::holds_alternative<bool>(value);
  }
  return false;
}

ParamValue HyperparameterSpec::sample(Rng& rng) const {
  switch (kind) {
    case ParamKind::real:
      return rng.uniform(lo, hi);
    case ParamKind::integer:
      return rng.uniform_int(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi));
    case ParamKind::categorical:
      return choices[rng.index(choices.size())];
    case ParamKind::boolean:
      return rng.bernoulli(0.5);
  }
  return 0.0;
}

ParamValue HyperparameterSpec::mutate(const ParamValue& value, Rng& rng) const {
  const double sigma = mutation_sigma_fraction * (hi - lo);
  switch (kind) {
    case ParamKind::real: {
      const double v = std::get<double>(value);
      if (sigma <= 0.0) return v;
      return std::clamp(rng.normal(v, sigma), lo, hi);
    }
    case ParamKind::integer: {
      const auto v = std::get<std::int64_t>(value);
      if (sigma <= 0.0) return v;
      const double moved = std::clamp(std::round(rng.normal(static_cast<double>(v), sigma)), lo, hi);
      return static_cast<std::int64_t>(moved);
    }
    case ParamKind::categorical:
      return choices[rng.index(choices.size())];
    case ParamKind::boolean:
      return !std::get<bool>(value);
  }
  return value;
}

double HyperparameterSpec::distance(const ParamValue& a, const ParamValue& b) const {
  switch (kind) {
    case ParamKind::real:
      return std::abs(std::get<double>(a) - std::get<double>(b)) / (hi - lo);
    case ParamKind::integer:
      return std::abs(static_cast<double>(std::get<std::int64_t>(a) - std::get<std::int64_t>(b))) /
             (hi - lo);
    case ParamKind::categorical:
    case ParamKind::boolean:
      return a == b ? 0.0 : 1.0;
  }
  return 0.0;
}

namespace {

const HyperparameterSpec* find_spec(const std::vector<HyperparameterSpec>& specs,
                                    const std::string& name) {
  for (const auto& s : specs)
    if (s.name == name) return &s;
  return nullptr;
}

}  // namespace

const HyperparameterSpec* SearchSpace::find_node_param(const std::string& name) const {
  return find_spec(node_params, name);
}

const HyperparameterSpec* SearchSpace::find_global_param(const std::string& name) const {
  return find_spec(global_params, name);
}

std::vector<std::string> SearchSpace::problems() const {
  std::vector<std::string> out;
  auto collect = [&](const std::vector<HyperparameterSpec>& specs, const std::string& where) {
    std::vector<std::string> seen;
    for (const auto& s : specs) {
      for (auto& p : s.problems()) out.push_back(where + "." + p);
      if (std::find(seen.begin(), seen.end(), s.name) != seen.end())
        out.push_back(where + ": duplicate hyperparameter '" + s.name + "'");
      seen.push_back(s.name);
    }
  };
  collect(node_params, "node_params");
  collect(global_params, "global_params");
  if (input_shape.empty()) out.push_back("input_shape: must not be empty");
  for (auto d : input_shape)
    if (d <= 0) out.push_back("input_shape: dimensions must be positive");
  if (output_units <= 0) out.push_back("output_units: must be positive");
  if (min_pooling_layers < 0) out.push_back("min_pooling_layers: must be >= 0");
  return out;
}

std::vector<std::string> SearchSpace::check_table(const HyperparameterTable& table,
                                                  bool globals) const {
  const auto& specs = globals ? global_params : node_params;
  std::vector<std::string> out;
  for (const auto& [name, value] : table) {
    const auto* spec = find_spec(specs, name);
    if (!spec)
      out.push_back("unknown hyperparameter '" + name + "'");
    else if (!spec->admits(value))
      out.push_back("hyperparameter '" + name + "' value " + format_value(value) +
                    " outside its range");
  }
  for (const auto& s : specs)
    if (!table.contains(s.name)) out.push_back("missing hyperparameter '" + s.name + "'");
  return out;
}

HyperparameterTable sample_table(const std::vector<HyperparameterSpec>& specs, Rng& rng) {
  HyperparameterTable t;
  for (const auto& s : specs) t[s.name] = s.sample(rng);
  return t;
}

HyperparameterTable mutate_table(const HyperparameterTable& table,
                                 const std::vector<HyperparameterSpec>& specs,
                                 double per_param_prob, Rng& rng) {
  HyperparameterTable out = table;
  for (const auto& s : specs) {
    if (!rng.bernoulli(per_param_prob)) continue;
    auto it = out.find(s.name);
    if (it == out.end()) continue;
    it->second = s.mutate(it->second, rng);
  }
  return out;
}

double table_distance(const HyperparameterTable& a, const HyperparameterTable& b,
                      const std::vector<HyperparameterSpec>& specs) {
  if (specs.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : specs) {
    auto ia = a.find(s.name);
    auto ib = b.find(s.name);
    if (ia == a.end() || ib == b.end()) {
      sum += (ia == ib) ? 0.0 : 1.0;
      continue;
    }
    sum += s.distance(ia->second, ib->second);
  }
  return sum / static_cast<double>(specs.size());
}

json to_json(const ParamValue& value) {
  return std::visit([](const auto& v) { return json(v); }, value);
}

ParamValue param_value_from_json(const json& j) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  throw std::runtime_error("hyperparameter value must be a number, boolean or string");
}

json to_json(const HyperparameterTable& table) {
  json j = json::object();
  for (const auto& [k, v] : table) j[k] = to_json(v);
  return j;
}

HyperparameterTable table_from_json(const json& j) {
  HyperparameterTable t;
  for (const auto& [k, v] : j.items()) t[k] = param_value_from_json(v);
  return t;
}

json to_json(const HyperparameterSpec& spec) {
  json j{{"name", spec.name}, {"kind", to_string(spec.kind)}};
  switch (spec.kind) {
    case ParamKind::real:
      j["range"] = {spec.lo, spec.hi};
      j["mutation_sigma_fraction"] = spec.mutation_sigma_fraction;
      break;
    case ParamKind::integer:
      j["range"] = {static_cast<std::int64_t>(spec.lo), static_cast<std::int64_t>(spec.hi)};
      j["mutation_sigma_fraction"] = spec.mutation_sigma_fraction;
      break;
    case ParamKind::categorical:
      j["choices"] = spec.choices;
      break;
    case ParamKind::boolean:
      break;
  }
  return j;
}

HyperparameterSpec spec_from_json(const json& j) {
  HyperparameterSpec s;
  s.name = j.at("name").get<std::string>();
  s.kind = param_kind_from_string(j.at("kind").get<std::string>());
  if (s.kind == ParamKind::real || s.kind == ParamKind::integer) {
    const auto& r = j.at("range");
    if (!r.is_array() || r.size() != 2)
      throw ConfigError(s.name + ": range must be [lo, hi]");
    s.lo = r[0].get<double>();
    s.hi = r[1].get<double>();
    s.mutation_sigma_fraction = j.value("mutation_sigma_fraction", 0.1);
  }
  if (s.kind == ParamKind::categorical) {
    for (const auto& c : j.at("choices")) {
      // Numeric choices (kernel sizes) are stored as their decimal token.
      s.choices.push_back(c.is_string() ? c.get<std::string>() : c.dump());
    }
  }
  return s;
}

json to_json(const SearchSpace& space) {
  json node = json::array();
  for (const auto& s : space.node_params) node.push_back(to_json(s));
  json global = json::array();
  for (const auto& s : space.global_params) global.push_back(to_json(s));
  return json{{"node_params", node},
              {"global_params", global},
              {"input_shape", space.input_shape},
              {"output_units", space.output_units},
              {"min_pooling_layers", space.min_pooling_layers},
              {"weight_sharing", space.weight_sharing}};
}

SearchSpace search_space_from_json(const json& j) {
  SearchSpace s;
  s.node_params.clear();
  s.global_params.clear();
  for (const auto& p : j.value("node_params", json::array())) s.node_params.push_back(spec_from_json(p));
  for (const auto& p : j.value("global_params", json::array()))
    s.global_params.push_back(spec_from_json(p));
  if (j.contains("input_shape")) s.input_shape = j.at("input_shape").get<std::vector<std::int64_t>>();
  s.output_units = j.value("output_units", s.output_units);
  s.min_pooling_layers = j.value("min_pooling_layers", s.min_pooling_layers);
  s.weight_sharing = j.value("weight_sharing", s.weight_sharing);
  return s;
}

std::string format_value(const ParamValue& value) { return to_json(value).dump(); }

namespace {

std::vector<HyperparameterSpec> default_globals() {
  return {HyperparameterSpec::real("learning_rate", 1e-4, 1e-2),
          HyperparameterSpec::categorical("optimizer", {"adam", "sgd", "rmsprop"}),
          HyperparameterSpec::real("weight_decay", 1e-9, 1e-3)};
}

}  // namespace

SearchSpace text_search_space() {
  SearchSpace s;
  s.node_params = {
      HyperparameterSpec::categorical("layer_type", {"conv1d", "lstm", "gru", "dropout"}),
      HyperparameterSpec::integer("width", 64, 192),
      HyperparameterSpec::categorical("kernel_size", {"1", "3", "5", "7"}),
      HyperparameterSpec::categorical("activation", {"relu", "linear", "elu", "selu"}),
      HyperparameterSpec::categorical("initializer", {"glorot", "he"}),
      HyperparameterSpec::real("dropout_rate", 0.0, 0.5),
  };
  s.global_params = default_globals();
  s.input_shape = {128, 32};
  s.output_units = 2;
  s.min_pooling_layers = 5;
  s.weight_sharing = false;
  return s;
}

SearchSpace vision_search_space() {
  SearchSpace s;
  s.node_params = {
      HyperparameterSpec::categorical("layer_type", {"conv2d", "dropout"}),
      HyperparameterSpec::integer("width", 16, 64),
      HyperparameterSpec::categorical("kernel_size", {"1", "3"}),
      HyperparameterSpec::categorical("activation", {"relu", "linear", "elu", "selu"}),
      HyperparameterSpec::categorical("initializer", {"glorot", "he"}),
      HyperparameterSpec::real("dropout_rate", 0.0, 0.7),
  };
  s.global_params = default_globals();
  s.input_shape = {224, 224, 3};
  s.output_units = 14;
  s.min_pooling_layers = 4;
  s.weight_sharing = true;
  return s;
}

}  // namespace coevo
