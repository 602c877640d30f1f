#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "epinet_bandit/agents/agent.h"
#include "epinet_bandit/env/environment.h"

namespace epinet_bandit::harness {

struct RunSettings {
  long horizon = 5000;
  std::vector<std::uint64_t> seeds;  // default 1..20
  std::string output_dir = "runs/default";
  bool log_interactions = true;
  // Impression-count bucket boundaries; the last bucket is open-ended.
  std::vector<long> bucket_boundaries = {0, 100, 200, 400, 1000, 2000, 3000, 4000, 5000, 10000};
  double final_window = 0.1;  // fraction of steps used for the late-regret summary
  std::string ci_method = "bootstrap";  // or "t"
  std::size_t bootstrap_resamples = 10000;
  double ci_level = 0.95;
};

struct CalibrationSettings {
  double like_rate_target = 0.01;
  double share_rate_target = 0.002;
  std::size_t serves = 100000;
};

// Both arms share the model/optimizer hyperparameters in `agent`; only the
// kind differs.
struct ExperimentConfig {
  env::EnvConfig env;
  agents::AgentConfig agent;
  agents::AgentKind treatment = agents::AgentKind::kEpinetTs;
  agents::AgentKind control = agents::AgentKind::kGreedyPoint;
  RunSettings run;
  CalibrationSettings calibration;
};

ExperimentConfig default_config();
// Larger architecture: d=128, overarch hidden [384, 256], index dim 5.
void apply_paper_preset(ExperimentConfig& config);

// Keeps derived fields consistent (feature dims and slate size shared
// between env and agent, head input dim from the towers).
void sync_derived(ExperimentConfig& config);

struct KeyInfo {
  std::string key;
  std::string doc;
};
const std::vector<KeyInfo>& config_keys();

// Sets one dotted key from its text value. Throws ConfigError for unknown
// keys or unparsable values.
void set_key(ExperimentConfig& config, std::string_view key, std::string_view value);
std::string get_key(const ExperimentConfig& config, std::string_view key);

// Parses `key = value` lines ('#' starts a comment) on top of `config`.
// Collects every bad line before throwing one ConfigError.
void apply_config_text(ExperimentConfig& config, std::string_view text);
void apply_config_file(ExperimentConfig& config, const std::string& path);

// Every key with its current value, one per line, in registry order.
std::string canonical_text(const ExperimentConfig& config);
// Content hash of canonical_text (FNV-1a, 16 hex digits).
std::string fingerprint(const ExperimentConfig& config);

// Throws ConfigError listing every violated constraint.
void validate(const ExperimentConfig& config);

}  // namespace epinet_bandit::harness
