#include "epinet_bandit/harness/experiment.h"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "epinet_bandit/agents/agent.h"
#include "epinet_bandit/env/environment.h"
#include "epinet_bandit/env/interaction_log.h"
#include "epinet_bandit/errors.h"
#include "epinet_bandit/nn/rng.h"

namespace epinet_bandit::harness {
namespace {

namespace fs = std::filesystem;

struct Task {
  std::uint64_t seed;
  std::string arm;
  agents::AgentKind kind;
};

std::vector<Task> make_tasks(const ExperimentConfig& config) {
  std::vector<Task> tasks;
  for (auto seed : config.run.seeds) {
    tasks.push_back({seed, kTreatmentArm, config.treatment});
    tasks.push_back({seed, kControlArm, config.control});
  }
  return tasks;
}

fs::path log_path(const fs::path& dir, const std::string& arm, std::uint64_t seed) {
  return dir / "logs" / (arm + "_seed" + std::to_string(seed) + ".tsv");
}

}  // namespace

SeedRoots seed_roots(std::uint64_t seed) {
  return SeedRoots{seed, nn::derive_seed(seed, "env"), nn::derive_seed(seed, "agent")};
}

ArmRun run_arm(const ExperimentConfig& config, const std::string& arm, agents::AgentKind kind, std::uint64_t seed,
               std::ostream* log) {
  const SeedRoots roots = seed_roots(seed);
  env::Environment environment(config.env, roots.env_root);
  agents::AgentConfig agent_config = config.agent;
  agent_config.kind = kind;
  agents::Agent agent(agent_config, roots.agent_root);

  MetricAccumulator metrics(arm, seed, BucketSpec(config.run.bucket_boundaries));
  ArmRun result;
  result.step_regret.reserve(static_cast<std::size_t>(config.run.horizon));
  SummaryRow& summary = result.summary;
  summary.arm = arm;
  summary.seed = seed;
  if (log) *log << env::log_header() << '\n';

  const double slate = static_cast<double>(config.env.slate_size);
  for (long t = 0; t < config.run.horizon; ++t) {
    const env::Action action = agent.act(environment.current_user().features, environment.pool());
    const env::StepOutcome outcome = environment.step(action);
    for (std::size_t i = 0; i < outcome.interactions.size(); ++i) {
      const double share = outcome.oracle_value / slate - outcome.expected_rewards[i];
      const env::LogRecord record = env::make_log_record(outcome.interactions[i], share);
      metrics.add(record);
      if (log) *log << env::format_log_record(record) << '\n';
    }
    summary.impressions += static_cast<long>(outcome.interactions.size());
    summary.cumulative_reward += outcome.realized_reward;
    summary.cumulative_expected_reward += outcome.expected_reward;
    summary.cumulative_regret += outcome.regret();
    result.step_regret.push_back(outcome.regret());
    agent.observe_and_update(outcome.interactions);
  }
  summary.steps = config.run.horizon;
  if (!result.step_regret.empty()) {
    const auto n = result.step_regret.size();
    const auto window = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(config.run.final_window * static_cast<double>(n))));
    double late = 0.0;
    for (std::size_t i = n - window; i < n; ++i) late += result.step_regret[i];
    summary.final_window_regret = late / static_cast<double>(window);
  }
  result.metrics = metrics.rows();
  return result;
}

std::size_t resolve_thread_count(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("EPINET_BANDIT_THREADS")) {
    char* end = nullptr;
    const long value = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && value > 0) return static_cast<std::size_t>(value);
    throw ConfigError("EPINET_BANDIT_THREADS must be a positive integer");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string manifest_json(const ExperimentConfig& config) {
  nlohmann::ordered_json m;
  m["code_version"] = EPINET_BANDIT_VERSION;
  m["config_fingerprint"] = fingerprint(config);
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& key : config_keys()) cfg[key.key] = get_key(config, key.key);
  m["config"] = cfg;
  m["arms"] = {{kTreatmentArm, agents::to_string(config.treatment)}, {kControlArm, agents::to_string(config.control)}};
  nlohmann::ordered_json seeds = nlohmann::ordered_json::array();
  for (auto seed : config.run.seeds) {
    const SeedRoots roots = seed_roots(seed);
    seeds.push_back({{"seed", std::to_string(roots.seed)},
                     {"env_root", std::to_string(roots.env_root)},
                     {"agent_root", std::to_string(roots.agent_root)}});
  }
  m["seeds"] = seeds;
  nlohmann::ordered_json files = {"metrics.csv", "summary.csv"};
  if (config.run.log_interactions) {
    for (const auto& task : make_tasks(config))
      files.push_back(log_path("", task.arm, task.seed).generic_string());
  }
  m["files"] = files;
  return m.dump(2) + "\n";
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  validate(config);
  const fs::path dir = config.run.output_dir;
  if (options.write_files) {
    fs::create_directories(dir);
    if (config.run.log_interactions) fs::create_directories(dir / "logs");
  }

  const std::vector<Task> tasks = make_tasks(config);
  std::vector<ArmRun> runs(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};

  const auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const Task& task = tasks[i];
      try {
        if (options.write_files && config.run.log_interactions) {
          std::ofstream log(log_path(dir, task.arm, task.seed), std::ios::binary);
          if (!log) throw ConfigError("cannot write interaction log in " + dir.string());
          runs[i] = run_arm(config, task.arm, task.kind, task.seed, &log);
        } else {
          runs[i] = run_arm(config, task.arm, task.kind, task.seed, nullptr);
        }
        if (options.on_task_done) options.on_task_done(task.arm, task.seed);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  const std::size_t threads = std::min(resolve_thread_count(options.threads), tasks.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  ExperimentResult result;
  for (const auto& run : runs) {
    result.metrics.insert(result.metrics.end(), run.metrics.begin(), run.metrics.end());
    result.summaries.push_back(run.summary);
  }
  result.manifest = manifest_json(config);
  if (options.write_files) {
    write_text_file(dir / "manifest.json", result.manifest);
    write_text_file(dir / "metrics.csv", format_metrics_csv(result.metrics));
    write_text_file(dir / "summary.csv", format_summary_csv(result.summaries));
  }
  return result;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AnalysisError("cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw ConfigError("cannot write " + path.string());
}

}  // namespace epinet_bandit::harness
