#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "epinet_bandit/harness/config.h"
#include "epinet_bandit/harness/metrics.h"

namespace epinet_bandit::harness {

inline constexpr const char* kTreatmentArm = "treatment";
inline constexpr const char* kControlArm = "control";

// Rng roots for one seed. Both arms share the environment root, so they face
// the same users, items and label noise draws.
struct SeedRoots {
  std::uint64_t seed = 0;
  std::uint64_t env_root = 0;
  std::uint64_t agent_root = 0;
};
SeedRoots seed_roots(std::uint64_t seed);

struct ArmRun {
  std::vector<MetricRow> metrics;
  SummaryRow summary;
  std::vector<double> step_regret;  // one entry per step
};

// Runs one arm for one seed. Each served slot is appended to `log` when given.
ArmRun run_arm(const ExperimentConfig& config, const std::string& arm, agents::AgentKind kind, std::uint64_t seed,
               std::ostream* log = nullptr);

struct RunOptions {
  // 0 means EPINET_BANDIT_THREADS, falling back to the hardware count.
  std::size_t threads = 0;
  bool write_files = true;
  std::function<void(const std::string& arm, std::uint64_t seed)> on_task_done;
};

struct ExperimentResult {
  std::vector<MetricRow> metrics;     // ordered by (seed, arm)
  std::vector<SummaryRow> summaries;  // ordered by (seed, arm)
  std::string manifest;               // JSON text
};

std::size_t resolve_thread_count(std::size_t requested);

// Validates, runs every (seed, arm) task, and writes manifest.json,
// metrics.csv, summary.csv and logs/ under config.run.output_dir.
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

std::string manifest_json(const ExperimentConfig& config);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace epinet_bandit::harness
