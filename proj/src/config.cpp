#include "coevo/config.hpp"

#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "coevo/errors.hpp"

namespace coevo {

using nlohmann::json;

std::string to_string(EvaluatorKind kind) {
  switch (kind) {
    case EvaluatorKind::surrogate: return "surrogate";
    case EvaluatorKind::noisy_surrogate: return "noisy_surrogate";
    case EvaluatorKind::remote: return "remote";
  }
  return "?";
}

namespace {

// One JSON object being read; records diagnostics instead of throwing.
class Section {
 public:
  Section(const json& j, std::string path, std::vector<std::string>& diag)
      : j_(j), path_(std::move(path)), diag_(diag) {
    if (!j_.is_object()) {
      diag_.push_back(where() + ": must be an object");
      ok_ = false;
    }
  }

  ~Section() {
    if (!ok_) return;
    for (const auto& [key, value] : j_.items())
      if (!known_.contains(key)) diag_.push_back(where(key) + ": unknown field");
  }

  std::string where(const std::string& key = "") const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  const json* find(const std::string& key) {
    known_.insert(key);
    if (!ok_) return nullptr;
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  Section sub(const std::string& key) {
    const json* v = find(key);
    return Section(v ? *v : empty(), where(key), diag_);
  }

  void read(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (v->is_number()) out = v->get<double>();
      else diag_.push_back(where(key) + ": must be a number");
    }
  }
  void read(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      const bool fits = v->is_number_unsigned() ? v->get<std::uint64_t>() <= std::numeric_limits<int>::max()
                        : v->is_number_integer() && v->get<std::int64_t>() >= std::numeric_limits<int>::min() &&
                              v->get<std::int64_t>() <= std::numeric_limits<int>::max();
      if (fits) out = v->get<int>();
      else diag_.push_back(where(key) + ": must be an integer");
    }
  }
  void read(const std::string& key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (v->is_number_unsigned() || (v->is_number_integer() && v->get<std::int64_t>() >= 0))
        out = v->get<std::uint64_t>();
      else diag_.push_back(where(key) + ": must be a non-negative integer");
    }
  }
  void read(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (v->is_boolean()) out = v->get<bool>();
      else diag_.push_back(where(key) + ": must be true or false");
    }
  }
  void read(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (v->is_string()) out = v->get<std::string>();
      else diag_.push_back(where(key) + ": must be a string");
    }
  }

  std::vector<std::string>& diagnostics() { return diag_; }

 private:
  static const json& empty() {
    static const json e = json::object();
    return e;
  }

  const json& j_;
  std::string path_;
  std::vector<std::string>& diag_;
  std::set<std::string> known_;
  bool ok_ = true;
};

void read_specs(Section& s, const std::string& key, std::vector<HyperparameterSpec>& out) {
  const json* v = s.find(key);
  if (!v) return;
  if (!v->is_array()) {
    s.diagnostics().push_back(s.where(key) + ": must be an array");
    return;
  }
  out.clear();
  for (std::size_t i = 0; i < v->size(); ++i) {
    const std::string path = s.where(key) + "[" + std::to_string(i) + "]";
    try {
      HyperparameterSpec spec = spec_from_json((*v)[i]);
      for (const auto& p : spec.problems()) s.diagnostics().push_back(path + ": " + p);
      out.push_back(std::move(spec));
    } catch (const std::exception& e) {
      s.diagnostics().push_back(path + ": " + e.what());
    }
  }
}

void read_search_space(Section s, SearchSpace& space) {
  std::string preset = "text";
  s.read("preset", preset);
  if (preset == "text") space = text_search_space();
  else if (preset == "vision") space = vision_search_space();
  else if (preset != "custom") s.diagnostics().push_back(s.where("preset") + ": must be text, vision or custom");
  read_specs(s, "node_params", space.node_params);
  read_specs(s, "global_params", space.global_params);
  if (const json* v = s.find("input_shape")) {
    bool valid = v->is_array() && !v->empty();
    if (valid)
      for (const auto& d : *v) valid = valid && d.is_number_integer() && d.get<std::int64_t>() > 0;
    if (valid) space.input_shape = v->get<std::vector<std::int64_t>>();
    else s.diagnostics().push_back(s.where("input_shape") + ": must be a non-empty array of positive integers");
  }
  int units = static_cast<int>(space.output_units);
  s.read("output_units", units);
  if (units < 1) s.diagnostics().push_back(s.where("output_units") + ": must be >= 1");
  space.output_units = units;
  s.read("min_pooling_layers", space.min_pooling_layers);
  if (space.min_pooling_layers < 0)
    s.diagnostics().push_back(s.where("min_pooling_layers") + ": must be >= 0");
  s.read("weight_sharing", space.weight_sharing);
}

void read_population(Section& s, const std::string& name, PopulationSettings& p) {
  s.read(name + "_population_size", p.size);
  s.read(name + "_species_size", p.species_target);
  s.read("add_" + name + "_node_prob", p.add_node_prob);
  s.read("add_" + name + "_connection_prob", p.add_connection_prob);
  s.read(name + "_mutate_params_prob", p.mutate_params_prob);
  s.read(name + "_crossover_prob", p.crossover_prob);
}

void read_evolution(Section s, RunConfig& c) {
  auto& e = c.evolution;
  read_population(s, "module", e.modules);
  read_population(s, "blueprint", e.blueprints);
  s.read("assembled_population_size", e.assembled_population_size);
  s.read("generations", c.generations);
  s.read("seed", e.seed);
  s.read("truncation_fraction", e.truncation_fraction);
  s.read("tournament_size", e.tournament_size);
  s.read("per_param_mutation_prob", e.per_param_mutation_prob);
  s.read("species_pointer_mutation_prob", e.species_pointer_mutation_prob);
  s.read("disabled_carryover", e.disabled_carryover);
  s.read("staleness_limit", e.staleness_limit);
  s.read("failure_fitness", e.failure_fitness);
  s.read("hyperparameter_only", e.hyperparameter_only);
  s.read("checkpoint_every", c.checkpoint_every);
  Section comp = s.sub("compatibility");
  comp.read("excess_disjoint", e.compatibility.excess_disjoint);
  comp.read("node_params", e.compatibility.node_params);
  comp.read("globals", e.compatibility.globals);
  comp.read("initial_threshold", e.initial_compatibility_threshold);
  comp.read("threshold_step", e.threshold_step);
}

void read_objectives(Section s, EvolutionSettings& e) {
  std::string mode = e.ranking == RankingMode::multiobjective ? "multi" : "single";
  s.read("mode", mode);
  if (mode == "single") e.ranking = RankingMode::single_objective;
  else if (mode == "multi") e.ranking = RankingMode::multiobjective;
  else s.diagnostics().push_back(s.where("mode") + ": must be single or multi");
  s.read("secondary_sort", e.secondary_sort);
}

void read_weights(Section s, SurrogateWeights& w) {
  s.read("depth", w.depth);
  s.read("diversity", w.diversity);
  s.read("branching", w.branching);
  s.read("params", w.params);
  s.read("depth_target", w.depth_target);
  s.read("branching_target", w.branching_target);
  s.read("params_target", w.params_target);
  s.read("op_kinds_target", w.op_kinds_target);
  s.read("activations_target", w.activations_target);
}

void read_evaluator(Section s, RunConfig& c) {
  std::string kind = to_string(c.evaluator);
  s.read("kind", kind);
  if (kind == "surrogate") c.evaluator = EvaluatorKind::surrogate;
  else if (kind == "noisy_surrogate") c.evaluator = EvaluatorKind::noisy_surrogate;
  else if (kind == "remote") c.evaluator = EvaluatorKind::remote;
  else s.diagnostics().push_back(s.where("kind") + ": must be surrogate, noisy_surrogate or remote");
  read_weights(s.sub("surrogate"), c.surrogate);
  s.read("noise_sigma", c.noise_sigma);
  s.read("parallelism", c.parallelism);
  if (const json* v = s.find("train_config")) {
    if (v->is_object()) c.evolution.train_config = *v;
    else s.diagnostics().push_back(s.where("train_config") + ": must be an object");
  }
}

void read_distrib(Section s, distrib::RemoteSettings& d) {
  s.read("host", d.server.host);
  s.read("port", d.server.port);
  s.read("idle_timeout", d.server.idle_timeout);
  s.read("task_timeout", d.queue.task_timeout);
  s.read("max_retries", d.queue.max_retries);
  s.read("unreachable_timeout", d.unreachable_timeout);
}

}  // namespace

std::vector<std::string> RunConfig::problems() const {
  std::vector<std::string> out;
  for (const auto& p : evolution.problems()) {
    out.push_back(p.starts_with("search_space.") ? p : "evolution." + p);
  }
  if (generations < 0) out.push_back("evolution.generations: must be >= 0");
  if (checkpoint_every < 1) out.push_back("evolution.checkpoint_every: must be >= 1");
  if (!(noise_sigma >= 0.0)) out.push_back("evaluator.noise_sigma: must be >= 0");
  if (parallelism < 1) out.push_back("evaluator.parallelism: must be >= 1");
  const std::pair<const char*, double> weights[] = {{"depth", surrogate.depth},
                                                    {"diversity", surrogate.diversity},
                                                    {"branching", surrogate.branching},
                                                    {"params", surrogate.params}};
  for (const auto& [name, w] : weights)
    if (!(w >= 0.0)) out.push_back(std::string("evaluator.surrogate.") + name + ": must be >= 0");
  if (!(surrogate.depth + surrogate.diversity + surrogate.branching + surrogate.params > 0.0))
    out.push_back("evaluator.surrogate: weights must not all be zero");
  if (!(surrogate.depth_target > 0.0)) out.push_back("evaluator.surrogate.depth_target: must be > 0");
  if (!(surrogate.branching_target > 0.0)) out.push_back("evaluator.surrogate.branching_target: must be > 0");
  if (!(surrogate.params_target > 0.0)) out.push_back("evaluator.surrogate.params_target: must be > 0");
  if (surrogate.op_kinds_target < 1) out.push_back("evaluator.surrogate.op_kinds_target: must be >= 1");
  if (surrogate.activations_target < 1) out.push_back("evaluator.surrogate.activations_target: must be >= 1");
  if (distrib.server.port < 0 || distrib.server.port > 65535) out.push_back("distrib.port: must lie in [0, 65535]");
  if (!(distrib.server.idle_timeout > 0.0)) out.push_back("distrib.idle_timeout: must be > 0");
  if (!(distrib.queue.task_timeout > 0.0)) out.push_back("distrib.task_timeout: must be > 0");
  if (distrib.queue.max_retries < 0) out.push_back("distrib.max_retries: must be >= 0");
  if (!(distrib.unreachable_timeout > 0.0)) out.push_back("distrib.unreachable_timeout: must be > 0");
  if (output_dir.empty()) out.push_back("output_dir: must not be empty");
  return out;
}

RunConfig parse_run_config(const json& document) {
  RunConfig c;
  std::vector<std::string> diag;
  {
    Section root(document, "", diag);
    read_search_space(root.sub("search_space"), c.evolution.space);
    read_evolution(root.sub("evolution"), c);
    read_objectives(root.sub("objectives"), c.evolution);
    read_evaluator(root.sub("evaluator"), c);
    read_distrib(root.sub("distrib"), c.distrib);
    root.read("output_dir", c.output_dir);
  }
  for (auto& p : c.problems()) diag.push_back(std::move(p));
  if (!diag.empty()) throw ConfigError(std::move(diag));
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(std::vector<std::string>{path.string() + ": cannot be read"});
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError(std::vector<std::string>{path.string() + ": not valid JSON"});
  return parse_run_config(doc);
}

json effective_config_json(const RunConfig& c) {
  const auto& e = c.evolution;
  json space = to_json(e.space);
  space["preset"] = "custom";
  json evolution = {
      {"module_population_size", e.modules.size},
      {"module_species_size", e.modules.species_target},
      {"add_module_node_prob", e.modules.add_node_prob},
      {"add_module_connection_prob", e.modules.add_connection_prob},
      {"module_mutate_params_prob", e.modules.mutate_params_prob},
      {"module_crossover_prob", e.modules.crossover_prob},
      {"blueprint_population_size", e.blueprints.size},
      {"blueprint_species_size", e.blueprints.species_target},
      {"add_blueprint_node_prob", e.blueprints.add_node_prob},
      {"add_blueprint_connection_prob", e.blueprints.add_connection_prob},
      {"blueprint_mutate_params_prob", e.blueprints.mutate_params_prob},
      {"blueprint_crossover_prob", e.blueprints.crossover_prob},
      {"assembled_population_size", e.assembled_population_size},
      {"generations", c.generations},
      {"seed", e.seed},
      {"truncation_fraction", e.truncation_fraction},
      {"tournament_size", e.tournament_size},
      {"per_param_mutation_prob", e.per_param_mutation_prob},
      {"species_pointer_mutation_prob", e.species_pointer_mutation_prob},
      {"disabled_carryover", e.disabled_carryover},
      {"staleness_limit", e.staleness_limit},
      {"failure_fitness", e.failure_fitness},
      {"hyperparameter_only", e.hyperparameter_only},
      {"checkpoint_every", c.checkpoint_every},
      {"compatibility",
       {{"excess_disjoint", e.compatibility.excess_disjoint},
        {"node_params", e.compatibility.node_params},
        {"globals", e.compatibility.globals},
        {"initial_threshold", e.initial_compatibility_threshold},
        {"threshold_step", e.threshold_step}}}};
  json objectives = {{"mode", e.ranking == RankingMode::multiobjective ? "multi" : "single"},
                     {"secondary_sort", e.secondary_sort}};
  json evaluator = {{"kind", to_string(c.evaluator)},
                    {"surrogate", to_json(c.surrogate)},
                    {"noise_sigma", c.noise_sigma},
                    {"parallelism", c.parallelism},
                    {"train_config", e.train_config}};
  json distrib = {{"host", c.distrib.server.host},
                  {"port", c.distrib.server.port},
                  {"idle_timeout", c.distrib.server.idle_timeout},
                  {"task_timeout", c.distrib.queue.task_timeout},
                  {"max_retries", c.distrib.queue.max_retries},
                  {"unreachable_timeout", c.distrib.unreachable_timeout}};
  return {{"search_space", space}, {"evolution", evolution}, {"objectives", objectives},
          {"evaluator", evaluator}, {"distrib", distrib},     {"output_dir", c.output_dir}};
}

std::shared_ptr<const Evaluator> make_local_evaluator(const RunConfig& c) {
  auto base = std::make_shared<SurrogateEvaluator>(c.surrogate);
  switch (c.evaluator) {
    case EvaluatorKind::surrogate: return base;
    case EvaluatorKind::noisy_surrogate: return noisy_wrapper(base, c.noise_sigma, c.evolution.seed);
    case EvaluatorKind::remote: break;
  }
  throw ConfigError(std::vector<std::string>{"evaluator.kind: remote has no local evaluator"});
}

}  // namespace coevo
