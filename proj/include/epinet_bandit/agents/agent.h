#pragma once

#include <array>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "epinet_bandit/enn/checkpoint.h"
#include "epinet_bandit/env/environment.h"
#include "epinet_bandit/model/two_tower.h"
#include "epinet_bandit/nn/optimizer.h"

namespace epinet_bandit::agents {

enum class AgentKind { kEpinetTs, kGreedyPoint, kEpsilonGreedy, kEnsembleTs };

const char* to_string(AgentKind kind);
AgentKind agent_kind_from_string(std::string_view name);

struct AgentConfig {
  AgentKind kind = AgentKind::kEpinetTs;
  std::size_t slate_size = 10;
  model::TowerConfig towers;
  enn::EpinetConfig head;  // input_dim is derived from the towers
  model::Task epinet_task = model::Task::kWs;
  // Greedy score weights on sigmoid(embedding logits) for the point-estimate agents.
  std::array<double, model::kNumTasks> control_weights = {1.0, 0.0, 0.0, 0.0};
  bool index_per_example = false;  // one z per minibatch row instead of per minibatch
  nn::OptimizerConfig optimizer;
  std::size_t batch_size = 32;
  std::size_t train_every = 1;  // 0 = never train
  std::size_t buffer_capacity = 4096;
  double epsilon = 0.1;
  std::size_t ensemble_size = 10;
};

// Throws ConfigError listing every violated constraint.
void validate(const AgentConfig& config);

// Stateful bandit policy: picks slates and learns from served interactions.
class Agent {
 public:
  Agent(AgentConfig config, std::uint64_t seed);

  const AgentConfig& config() const { return config_; }
  AgentKind kind() const { return config_.kind; }

  // Top-M live items by score, ties broken by lower id. epinet_ts draws one
  // index per call; ensemble_ts one particle per call; epsilon_greedy fills
  // each slot at random with probability epsilon.
  env::Action act(const nn::Vector& user_features, const env::ItemPool& pool);

  // Buffers the interactions and, every train_every calls, takes one
  // optimizer step on a minibatch drawn from the buffer.
  void observe_and_update(std::span<const env::Interaction> interactions);

  // Scores the current model assigns to every live item (under `z` for the
  // epinet agent, particle 1 for the ensemble).
  nn::Vector greedy_scores(const nn::Vector& user_features, const nn::Tensor2& item_features) const;

  long steps() const { return steps_; }
  long updates() const { return updates_; }
  std::size_t buffer_size() const { return buffer_.size(); }
  const std::optional<model::LossBreakdown>& last_loss() const { return last_loss_; }

  model::EpinetRecommender* treatment() { return treatment_ ? &*treatment_ : nullptr; }
  const model::EpinetRecommender* treatment() const { return treatment_ ? &*treatment_ : nullptr; }
  model::PointEstimateRecommender& control(std::size_t particle = 0) { return controls_.at(particle); }
  std::size_t particle_count() const { return controls_.size(); }

  std::vector<const nn::ParameterStore*> all_stores() const;
  std::vector<nn::ParameterStore*> trainable_stores();

  // Full state: parameters, optimizer moments, replay buffer, counters, rng streams.
  enn::Checkpoint snapshot() const;
  // Throws LoadError (version or kind mismatch, missing tensors) without
  // returning a partially built agent.
  static Agent restore(const enn::Checkpoint& checkpoint);

 private:
  struct Row {
    nn::Vector user;
    nn::Vector item;
    env::Labels labels;
  };

  model::Batch sample_batch();
  void train_step();

  AgentConfig config_;
  std::uint64_t seed_;
  nn::Rng index_rng_;
  nn::Rng replay_rng_;
  std::optional<model::EpinetRecommender> treatment_;
  std::vector<model::PointEstimateRecommender> controls_;
  nn::Optimizer optimizer_;
  std::deque<Row> buffer_;
  long steps_ = 0;
  long updates_ = 0;
  std::optional<model::LossBreakdown> last_loss_;
};

// Indices of the m largest scores, ordered by (score desc, id asc).
std::vector<std::size_t> top_m(const nn::Vector& scores, std::span<const env::ItemId> ids, std::size_t m);

inline constexpr int kSnapshotVersion = 1;

}  // namespace epinet_bandit::agents
