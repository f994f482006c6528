#include "coevo/runner.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <regex>
#include <sstream>

#include "coevo/errors.hpp"
#include "coevo/log.hpp"

namespace coevo {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Records the time spent waiting on each batch.
class TimedBackend : public EvaluationBackend {
 public:
  explicit TimedBackend(std::shared_ptr<EvaluationBackend> inner) : inner_(std::move(inner)) {}
  std::vector<EvaluationResult> evaluate_batch(const std::vector<EvaluationTask>& tasks) override {
    const auto start = std::chrono::steady_clock::now();
    auto results = inner_->evaluate_batch(tasks);
    last_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return results;
  }
  double last() const { return last_; }

 private:
  std::shared_ptr<EvaluationBackend> inner_;
  double last_ = 0.0;
};

std::shared_ptr<EvaluationBackend> make_backend(const RunConfig& config, const RunOptions& options) {
  if (options.backend) return options.backend;
  if (config.evaluator == EvaluatorKind::remote) {
    auto backend = std::make_shared<distrib::RemoteBackend>(config.distrib);
    log::warn("waiting for workers on {}:{}", config.distrib.server.host, backend->port());
    return backend;
  }
  return std::make_shared<LocalBackend>(make_local_evaluator(config), config.parallelism);
}

constexpr const char* kParetoHeader =
    "generation,network_id,blueprint_id,primary,raw_secondary,secondary,front_index,failed";

std::string number(double v) { return json(v).dump(); }

void write_atomically(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

void append_line(const fs::path& path, const std::string& line) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + path.string());
  out << line << '\n';
  out.flush();
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::vector<std::string> lines;
  std::ifstream in(path, std::ios::binary);
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) lines.push_back(line);
  return lines;
}

void keep_first_lines(const fs::path& path, std::size_t n) {
  if (!fs::exists(path)) return;
  auto lines = read_lines(path);
  if (lines.size() > n) lines.resize(n);
  std::string content;
  for (const auto& l : lines) content += l + '\n';
  write_atomically(path, content);
}

fs::path checkpoint_path(const fs::path& dir, int n) {
  return dir / ("checkpoint_" + std::to_string(n) + ".json");
}

std::optional<int> numbered(const fs::path& p, const std::string& prefix, const std::string& ext) {
  static const std::regex digits("[0-9]+");
  const std::string name = p.filename().string();
  if (!name.starts_with(prefix) || !name.ends_with(ext)) return std::nullopt;
  const std::string mid = name.substr(prefix.size(), name.size() - prefix.size() - ext.size());
  if (!std::regex_match(mid, digits)) return std::nullopt;
  return std::stoi(mid);
}

void write_checkpoint(const fs::path& dir, const RunConfig& config, const EvolutionState& state) {
  json j = {{"format_version", kCheckpointVersion},
            {"completed", state.generation},
            {"config", effective_config_json(config)},
            {"state", state_to_json(state)}};
  write_atomically(checkpoint_path(dir, state.generation), j.dump());
  log::debug("checkpoint {} written", state.generation);
}

void write_best(const fs::path& dir, const EvolutionState& state) {
  if (!state.best) return;
  write_atomically(dir / "best_network.json", state.best->network_json + "\n");
}

RunSummary evolve_loop(const RunConfig& config, EvolutionState& state, const fs::path& dir,
                       const RunOptions& options) {
  RunSummary summary;
  if (state.generation >= config.generations) {
    write_best(dir, state);
    summary.completed = state.generation;
    summary.finished = true;
    summary.best = state.best;
    return summary;
  }
  auto backend = std::make_shared<TimedBackend>(make_backend(config, options));
  while (state.generation < config.generations) {
    if (options.stop_after && summary.generations_run >= *options.stop_after) break;
    GenerationOutcome outcome = evolve_generation(state, config.evolution, *backend);
    const auto& r = outcome.report;
    append_line(dir / "generations.jsonl", to_json(r).dump());
    append_line(dir / "timing.jsonl", json{{"generation", r.generation},
                                          {"wall_time", r.wall_time},
                                          {"evaluation_time", backend->last()}}
                                         .dump());
    write_atomically(dir / ("pareto_gen_" + std::to_string(r.generation) + ".csv"), pareto_csv(outcome));
    if (state.generation % config.checkpoint_every == 0 || state.generation == config.generations)
      write_checkpoint(dir, config, state);
    log::info("generation {}: best {:.6f} mean {:.6f} best so far {:.6f} ({} failures)", r.generation,
              r.best_fitness, r.mean_fitness, r.best_so_far, r.evaluation_failures);
    ++summary.generations_run;
  }
  write_best(dir, state);
  summary.completed = state.generation;
  summary.finished = state.generation >= config.generations;
  summary.best = state.best;
  return summary;
}

// Settings that shape the population; a resume must not change them.
json population_shaping(const RunConfig& config) {
  json j = effective_config_json(config);
  j["evolution"].erase("generations");
  j["evolution"].erase("checkpoint_every");
  return json{{"search_space", j["search_space"]},
              {"evolution", j["evolution"]},
              {"objectives", j["objectives"]}};
}

void diff_json(const json& a, const json& b, const std::string& path, std::vector<std::string>& out) {
  if (a.is_object() && b.is_object()) {
    for (const auto& [k, v] : a.items()) {
      const std::string p = path.empty() ? k : path + "." + k;
      if (!b.contains(k)) out.push_back(p + ": missing in the new configuration");
      else diff_json(v, b[k], p, out);
    }
    for (const auto& [k, v] : b.items())
      if (!a.contains(k)) out.push_back((path.empty() ? k : path + "." + k) + ": not in the checkpoint");
    return;
  }
  if (a != b) out.push_back(path + ": checkpoint has " + a.dump() + ", configuration has " + b.dump());
}

}  // namespace

std::string pareto_csv(const GenerationOutcome& outcome) {
  std::ostringstream out;
  out << kParetoHeader << '\n';
  for (std::size_t i = 0; i < outcome.networks.size(); ++i) {
    const auto& n = outcome.networks[i];
    if (!n.objectives) continue;
    out << outcome.report.generation << ',' << n.network_id << ',' << n.blueprint_id << ',' << number(n.objectives->primary) << ','
        << number(n.objectives->raw_secondary) << ',' << number(n.objectives->secondary) << ','
        << outcome.front_index.at(i) << ',' << (n.failed ? 1 : 0) << '\n';
  }
  return out.str();
}

RunSummary run_experiment(const RunConfig& config, const fs::path& out_dir, const RunOptions& options) {
  if (auto problems = config.problems(); !problems.empty()) throw ConfigError(problems);
  fs::create_directories(out_dir);
  for (const auto& entry : fs::directory_iterator(out_dir)) {
    const fs::path& p = entry.path();
    if (numbered(p, "checkpoint_", ".json") || numbered(p, "pareto_gen_", ".csv")) fs::remove(p);
  }
  for (const char* name : {"generations.jsonl", "timing.jsonl", "best_network.json", "pareto_history.csv"})
    fs::remove(out_dir / name);
  write_atomically(out_dir / "effective_config.json", effective_config_json(config).dump(2) + "\n");
  EvolutionState state = initialize_state(config.evolution);
  write_checkpoint(out_dir, config, state);
  return evolve_loop(config, state, out_dir, options);
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint " + path.string() + " cannot be read");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw CheckpointError("checkpoint " + path.string() + " is not valid JSON");
  if (j.value("format_version", -1) != kCheckpointVersion)
    throw CheckpointError("checkpoint " + path.string() + " has unsupported format_version " +
                          (j.contains("format_version") ? j["format_version"].dump() : "(missing)"));
  Checkpoint c;
  try {
    c.completed = j.at("completed").get<int>();
    c.config = parse_run_config(j.at("config"));
    c.state = state_from_json(j.at("state"));
  } catch (const ConfigError& e) {
    throw CheckpointError("checkpoint " + path.string() + " has an invalid configuration: " + e.what());
  } catch (const std::exception& e) {
    throw CheckpointError("checkpoint " + path.string() + " is corrupt: " + e.what());
  }
  if (c.state.generation != c.completed)
    throw CheckpointError("checkpoint " + path.string() + " is inconsistent: completed " +
                          std::to_string(c.completed) + " but state generation " +
                          std::to_string(c.state.generation));
  return c;
}

fs::path latest_checkpoint(const fs::path& run_dir) {
  std::optional<int> best;
  if (fs::is_directory(run_dir))
    for (const auto& entry : fs::directory_iterator(run_dir))
      if (auto n = numbered(entry.path(), "checkpoint_", ".json"); n && (!best || *n > *best)) best = n;
  if (!best) throw CheckpointError("no checkpoint found in " + run_dir.string());
  return checkpoint_path(run_dir, *best);
}

RunSummary resume_experiment(const fs::path& checkpoint, const std::optional<RunConfig>& config,
                             const RunOptions& options) {
  const fs::path file = fs::is_directory(checkpoint) ? latest_checkpoint(checkpoint) : checkpoint;
  Checkpoint cp = load_checkpoint(file);
  const fs::path dir = file.parent_path().empty() ? fs::path(".") : file.parent_path();
  RunConfig effective = cp.config;
  if (config) {
    std::vector<std::string> diffs;
    diff_json(population_shaping(cp.config), population_shaping(*config), "", diffs);
    if (!diffs.empty()) {
      std::string msg = "configuration is incompatible with the checkpoint";
      for (const auto& d : diffs) msg += "\n  " + d;
      throw CheckpointError(msg);
    }
    effective = *config;
    if (auto problems = effective.problems(); !problems.empty()) throw ConfigError(problems);
  }
  log::info("resuming from {} at generation {}", file.string(), cp.completed);
  // Drop records written after the checkpoint so the logs stay aligned.
  keep_first_lines(dir / "generations.jsonl", static_cast<std::size_t>(cp.completed));
  keep_first_lines(dir / "timing.jsonl", static_cast<std::size_t>(cp.completed));
  for (const auto& entry : fs::directory_iterator(dir)) {
    const fs::path& p = entry.path();
    if (auto n = numbered(p, "checkpoint_", ".json"); n && *n > cp.completed) fs::remove(p);
    if (auto n = numbered(p, "pareto_gen_", ".csv"); n && *n >= cp.completed) fs::remove(p);
  }
  if (config) write_atomically(dir / "effective_config.json", effective_config_json(effective).dump(2) + "\n");
  return evolve_loop(effective, cp.state, dir, options);
}

std::vector<ReportRow> report_run(const fs::path& run_dir, std::ostream& out) {
  const fs::path log_path = run_dir / "generations.jsonl";
  if (!fs::exists(log_path)) throw std::runtime_error("no generations.jsonl in " + run_dir.string());
  std::map<int, double> eval_time;
  for (const auto& line : read_lines(run_dir / "timing.jsonl")) {
    json t = json::parse(line, nullptr, false);
    if (t.is_object() && t.contains("generation"))
      eval_time[t["generation"].get<int>()] = t.value("evaluation_time", 0.0);
  }
  std::vector<ReportRow> rows;
  double cumulative = 0.0;
  for (const auto& line : read_lines(log_path)) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw std::runtime_error("corrupt line in " + log_path.string());
    GenerationReport r = generation_report_from_json(j);
    ReportRow row;
    row.generation = r.generation;
    row.best_fitness = r.best_fitness;
    row.best_so_far = r.best_so_far;
    row.evaluation_time = eval_time.count(r.generation) ? eval_time[r.generation] : 0.0;
    cumulative += row.evaluation_time;
    row.cumulative_evaluation_time = cumulative;
    rows.push_back(row);
  }
  if (rows.empty()) throw std::runtime_error("generations.jsonl in " + run_dir.string() + " is empty");

  out << "generation  best_fitness  best_so_far  eval_time_s  cumulative_eval_time_s\n";
  for (const auto& r : rows) {
    out << std::setw(10) << r.generation << "  " << std::fixed << std::setprecision(6) << std::setw(12)
        << r.best_fitness << "  " << std::setw(11) << r.best_so_far << "  " << std::setprecision(3)
        << std::setw(11) << r.evaluation_time << "  " << std::setw(22) << r.cumulative_evaluation_time << '\n';
  }
  out << "generations: " << rows.size() << "  best so far: " << std::setprecision(6)
      << rows.back().best_so_far << '\n';
  out.unsetf(std::ios::floatfield);

  std::string history = std::string(kParetoHeader) + "\n";
  for (const auto& r : rows) {
    const fs::path csv = run_dir / ("pareto_gen_" + std::to_string(r.generation) + ".csv");
    auto lines = read_lines(csv);
    for (std::size_t i = 1; i < lines.size(); ++i) history += lines[i] + "\n";
  }
  write_atomically(run_dir / "pareto_history.csv", history);
  return rows;
}

}  // namespace coevo
