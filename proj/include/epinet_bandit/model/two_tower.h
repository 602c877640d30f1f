#pragma once

#include <array>
#include <string>
#include <vector>

#include "epinet_bandit/enn/epinet.h"
#include "epinet_bandit/nn/dense_net.h"

namespace epinet_bandit::model {

// Supervision signals, in label-vector order.
enum class Task : std::size_t { kWs = 0, kLike = 1, kShare = 2, kVvs = 3 };
inline constexpr std::size_t kNumTasks = 4;

const char* to_string(Task task);
Task task_from_string(std::string_view name);

inline constexpr std::size_t overarch_input_dim(std::size_t embedding_dim, std::size_t num_tasks) {
  return embedding_dim * (2 * num_tasks + 1);
}

// Overarch input for one (user, item) pair, layout
//   [user_1 .. user_K | item | item*user_1 .. item*user_K]
// `user_embeddings` is d x K (one column per task), `item_embedding` has length d.
nn::Vector build_overarch_input(const nn::Tensor2& user_embeddings, const nn::Vector& item_embedding);
// Batched form: `user_flat` rows are d*K (task k occupies columns [k*d, (k+1)*d)),
// `items` rows are d. Returns rows of width d*(2K+1).
nn::Tensor2 build_overarch_inputs(const nn::Tensor2& user_flat, const nn::Tensor2& items, std::size_t num_tasks);

// logit_k = <item, user column k>.
nn::Vector embedding_logits(const nn::Tensor2& user_embeddings, const nn::Vector& item_embedding);

struct TowerConfig {
  std::size_t user_feature_dim = 32;
  std::size_t item_feature_dim = 33;
  std::size_t embedding_dim = 16;
  std::size_t num_tasks = kNumTasks;
  std::vector<std::size_t> hidden = {64, 64};
};

// User tower: F_u -> d*K. Item tower: F_i -> d.
class TwoTowerModel {
 public:
  // `name_prefix` is prepended to every parameter name (e.g. "particle2/").
  TwoTowerModel(const TowerConfig& config, nn::Rng& init_rng, const std::string& name_prefix = "");

  const TowerConfig& config() const { return config_; }
  std::size_t embedding_dim() const { return config_.embedding_dim; }
  std::size_t num_tasks() const { return config_.num_tasks; }
  std::size_t overarch_dim() const { return config_.embedding_dim * (2 * config_.num_tasks + 1); }

  nn::DenseNet& user_tower() { return user_; }
  const nn::DenseNet& user_tower() const { return user_; }
  nn::DenseNet& item_tower() { return item_; }
  const nn::DenseNet& item_tower() const { return item_; }

  // d x K view of one user's flat embedding row.
  nn::Tensor2 user_embedding_matrix(const nn::Vector& user_features) const;

  std::vector<nn::ParameterStore*> stores() { return {&user_.params(), &item_.params()}; }
  std::vector<const nn::ParameterStore*> stores() const { return {&user_.params(), &item_.params()}; }

 private:
  TowerConfig config_;
  nn::DenseNet user_;
  nn::DenseNet item_;
};

// A minibatch of served (user, item, labels) rows.
struct Batch {
  nn::Tensor2 user_features;  // B x F_u
  nn::Tensor2 item_features;  // B x F_i
  nn::Tensor2 labels;         // B x K, in Task order
};

struct LossBreakdown {
  double embedding = 0.0;
  double epinet = 0.0;
  double total = 0.0;
};

// Forward/backward of the minibatch-averaged embedding loss
// (1/B) sum_b sum_k BCE(y_bk, <item_b, user_b,k>) on a tower pair.
// Accumulates tower gradients; returns the loss and the per-row embeddings
// (flat user rows, item rows) for callers that build overarch inputs.
struct EmbeddingPass {
  double loss = 0.0;
  nn::Tensor2 user_flat;
  nn::Tensor2 items;
};
EmbeddingPass embedding_loss_and_grads(TwoTowerModel& towers, const Batch& batch);

// Treatment model: two towers plus an epinet overarch trained on one task.
class EpinetRecommender {
 public:
  EpinetRecommender(const TowerConfig& towers, const enn::EpinetConfig& head, Task epinet_task, nn::Rng& init_rng);

  TwoTowerModel& towers() { return towers_; }
  const TwoTowerModel& towers() const { return towers_; }
  enn::EpinetHead& head() { return head_; }
  const enn::EpinetHead& head() const { return head_; }
  Task epinet_task() const { return epinet_task_; }

  // Embedding loss + epinet loss, both averaged over the batch, with
  // gradients accumulated. `indices` is 1 x d_z (one index for the batch)
  // or B x d_z (one per row). The epinet term sees the overarch input as a
  // constant, so tower gradients come from the embedding term alone.
  LossBreakdown total_loss(const Batch& batch, const nn::Tensor2& indices);

  // Logit f(x_a, z) for every item row under a single index z.
  nn::Vector score_items(const nn::Vector& user_features, const nn::Tensor2& item_features, const nn::Vector& z) const;
  // Reference path: builds every x_a explicitly and calls the head.
  nn::Vector score_items_reference(const nn::Vector& user_features, const nn::Tensor2& item_features,
                                   const nn::Vector& z) const;

  std::vector<nn::ParameterStore*> trainable_stores();
  std::vector<const nn::ParameterStore*> all_stores() const;

 private:
  TwoTowerModel towers_;
  enn::EpinetHead head_;
  Task epinet_task_;
};

// Control model: towers only, greedy on a weighted sum of sigmoid(embedding logits).
class PointEstimateRecommender {
 public:
  PointEstimateRecommender(const TowerConfig& towers, std::array<double, kNumTasks> task_weights, nn::Rng& init_rng,
                           const std::string& name_prefix = "");

  TwoTowerModel& towers() { return towers_; }
  const TwoTowerModel& towers() const { return towers_; }
  const std::array<double, kNumTasks>& task_weights() const { return weights_; }

  LossBreakdown total_loss(const Batch& batch);
  nn::Vector score_items(const nn::Vector& user_features, const nn::Tensor2& item_features) const;

  std::vector<nn::ParameterStore*> trainable_stores() { return towers_.stores(); }
  std::vector<const nn::ParameterStore*> all_stores() const { return towers_.stores(); }

 private:
  TwoTowerModel towers_;
  std::array<double, kNumTasks> weights_;
};

}  // namespace epinet_bandit::model
