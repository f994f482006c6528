#include <atomic>
#include <csignal>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "coevo/config.hpp"
#include "coevo/distrib/transport.hpp"
#include "coevo/errors.hpp"
#include "coevo/log.hpp"
#include "coevo/runner.hpp"

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

enum Exit { kOk = 0, kFailure = 1, kBadConfig = 2, kBadCheckpoint = 3, kUnreachable = 4 };

coevo::RunConfig load_with_overrides(const std::string& path, std::optional<std::uint64_t> seed,
                                     const std::string& out) {
  coevo::RunConfig config = path.empty() ? coevo::parse_run_config(nlohmann::json::object())
                                         : coevo::load_run_config(path);
  if (seed) config.evolution.seed = *seed;
  if (!out.empty()) config.output_dir = out;
  return config;
}

void print_summary(const coevo::RunSummary& s) {
  std::cout << "completed " << s.completed << " generations (" << s.generations_run << " this run)";
  if (s.best)
    std::cout << "; best " << s.best->network_id << " primary " << s.best->objectives.primary
              << " parameters " << static_cast<long long>(s.best->objectives.raw_secondary);
  std::cout << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  coevo::log::configure_from_env();
  CLI::App app{"Coevolutionary neural architecture search"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;

  auto* run = app.add_subcommand("run", "Start a new evolution run");
  std::optional<int> stop_after;
  run->add_option("--config", config_path, "Run configuration JSON")->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Override the configured seed");
  run->add_option("--out", out, "Output directory (overrides output_dir)");
  run->add_option("--stop-after", stop_after, "Stop after this many generations, leaving the run resumable");

  auto* resume = app.add_subcommand("resume", "Continue a run from its newest or a given checkpoint");
  std::string checkpoint;
  resume->add_option("--checkpoint", checkpoint, "Checkpoint file or run directory");
  resume->add_option("--out", out, "Run directory to resume");
  resume->add_option("--config", config_path, "Configuration to continue with (population must match)")
      ->check(CLI::ExistingFile);
  resume->add_option("--seed", seed, "Seed of the resumed configuration (must match the checkpoint)");
  resume->add_option("--stop-after", stop_after, "Stop after this many more generations");

  auto* report = app.add_subcommand("report", "Summarize a run directory");
  report->add_option("--out", out, "Run directory")->required();

  auto* worker = app.add_subcommand("worker", "Serve surrogate evaluations to a queue server");
  std::string host = "127.0.0.1";
  int port = 0;
  std::string worker_id = "surrogate-worker";
  int max_tasks = -1;
  worker->add_option("--host", host, "Queue server host");
  worker->add_option("--port", port, "Queue server port")->required();
  worker->add_option("--worker-id", worker_id, "Worker identifier");
  worker->add_option("--config", config_path, "Configuration supplying surrogate weights")
      ->check(CLI::ExistingFile);
  worker->add_option("--seed", seed, "Seed for the noisy surrogate and back-off jitter");
  worker->add_option("--max-tasks", max_tasks, "Exit after this many tasks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      coevo::RunConfig config = load_with_overrides(config_path, seed, out);
      coevo::RunOptions options;
      options.stop_after = stop_after;
      print_summary(coevo::run_experiment(config, config.output_dir, options));
      return kOk;
    }
    if (*resume) {
      const std::string target = !checkpoint.empty() ? checkpoint : out;
      if (target.empty()) throw CLI::RequiredError("--checkpoint or --out");
      std::optional<coevo::RunConfig> config;
      if (!config_path.empty() || seed) {
        const auto file = std::filesystem::is_directory(target) ? coevo::latest_checkpoint(target)
                                                                : std::filesystem::path(target);
        config = config_path.empty() ? coevo::load_checkpoint(file).config : coevo::load_run_config(config_path);
        if (seed) config->evolution.seed = *seed;
      }
      coevo::RunOptions options;
      options.stop_after = stop_after;
      print_summary(coevo::resume_experiment(target, config, options));
      return kOk;
    }
    if (*report) {
      coevo::report_run(out, std::cout);
      return kOk;
    }
    if (*worker) {
      coevo::RunConfig config = load_with_overrides(config_path, seed, "");
      if (config.evaluator == coevo::EvaluatorKind::remote) config.evaluator = coevo::EvaluatorKind::surrogate;
      auto evaluator = coevo::make_local_evaluator(config);
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      coevo::distrib::WorkerSettings settings;
      settings.worker_id = worker_id;
      settings.max_tasks = max_tasks;
      settings.seed = config.evolution.seed;
      const int done = coevo::distrib::run_worker(
          [&] { return coevo::distrib::SocketConnection::connect(host, port, std::chrono::seconds(5)); },
          *evaluator, settings, g_stop);
      std::cout << "worker " << worker_id << " returned " << done << " results\n";
      return kOk;
    }
  } catch (const coevo::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kBadConfig;
  } catch (const coevo::CheckpointError& e) {
    std::cerr << "resume refused: " << e.what() << "\n";
    return kBadCheckpoint;
  } catch (const coevo::EvaluatorUnavailable& e) {
    std::cerr << "evaluator unreachable, run aborted (checkpoints intact): " << e.what() << "\n";
    return kUnreachable;
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
