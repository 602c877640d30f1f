#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "epinet_bandit/nn/rng.h"
#include "epinet_bandit/nn/tensor.h"

namespace epinet_bandit::env {

using ItemId = std::uint64_t;
inline constexpr std::size_t kNumLabels = 4;  // ws, like, share, vvs
using Labels = std::array<double, kNumLabels>;

// M distinct live item ids, in slot order.
struct Action {
  std::vector<ItemId> item_ids;
};

struct Item {
  ItemId id = 0;
  nn::Vector features;  // phi, visible to agents
  nn::Vector latent;    // v*, hidden
  double quality = 0.0;  // hidden item-level affinity offset
  double video_length = 0.0;
  long birth_step = 0;
  long impressions = 0;
};

// Live items ordered by id (ids are never reused).
class ItemPool {
 public:
  const std::vector<Item>& live() const { return live_; }
  std::size_t size() const { return live_.size(); }
  const Item* find(ItemId id) const;
  std::vector<ItemId> live_ids() const;
  // size() x F_i, rows in live() order.
  nn::Tensor2 feature_matrix() const;
  std::size_t retired_count() const { return retired_; }

 private:
  friend class Environment;
  Item* find_mutable(ItemId id);

  std::vector<Item> live_;
  std::size_t retired_ = 0;
};

struct UserContext {
  std::uint64_t id = 0;
  nn::Vector features;  // psi, visible to agents
  nn::Vector latent;    // u*, hidden
};

// One served (user, item) pair and its outcome.
struct Interaction {
  long step = 0;
  std::uint64_t user_id = 0;
  nn::Vector user_features;
  ItemId item_id = 0;
  nn::Vector item_features;
  long impression_count = 0;  // before this serve
  Labels labels{};            // ws, like, share, vvs
  double watch_seconds = 0.0;
  double video_length = 0.0;
  int completed_count = 0;
};

// Hidden engagement model. Item quality q is N(0, quality_sd^2), plus
// breakout_boost with probability breakout_probability. With
// aff = personalization * <u*, v*> / sqrt(L) + quality_scale * q:
//   P(like)  = sigmoid(like_slope * aff + like_bias)
//   P(share) = sigmoid(share_slope * aff + share_bias)
//   watch time W ~ LogNormal(watch_log_mean + watch_slope * aff, watch_log_sd),
//   capped at max_loops * video_length; completions = floor(watch / length).
struct GroundTruthParams {
  double personalization = 1.0;
  double quality_scale = 1.0;
  double quality_sd = 0.1;
  double breakout_probability = 0.02;
  double breakout_boost = 4.0;
  double like_slope = 1.0;
  double like_bias = -5.6085;
  double share_slope = 1.0;
  double share_bias = -7.3909;
  double watch_log_mean = 1.5;
  double watch_slope = 0.8;
  double watch_log_sd = 1.0;
  double max_loops = 3.0;
};

struct EnvConfig {
  std::size_t num_items = 500;
  std::size_t slate_size = 10;
  long impression_cap = 10000;  // 0 disables
  long max_age = 0;             // steps; 0 disables
  std::size_t refresh_per_step = 1;
  std::size_t user_feature_dim = 32;
  std::size_t item_feature_dim = 33;
  std::size_t latent_dim = 8;
  double feature_noise = 0.5;
  std::vector<double> video_lengths = {5, 15, 30, 60, 90, 120};
  GroundTruthParams truth;
  Labels reward_weights = {1.0, 0.0, 0.0, 0.0};
  // When non-empty: a fixed pool with these item qualities (num_items is
  // taken from the size), useful for stationary scenarios.
  std::vector<double> fixed_item_qualities;
};

// Throws ConfigError listing every violated constraint.
void validate(const EnvConfig& config);

// Expected label values for one (user, item) pair.
struct ExpectedLabels {
  double ws = 0.0;
  double like = 0.0;
  double share = 0.0;
  double vvs = 0.0;
  double dot(const Labels& w) const { return w[0] * ws + w[1] * like + w[2] * share + w[3] * vvs; }
};

struct StepOutcome {
  std::vector<Interaction> interactions;
  std::vector<double> expected_rewards;  // per served item, w^T E[y]
  double oracle_value = 0.0;             // best achievable expected reward this step
  double expected_reward = 0.0;          // sum of expected_rewards
  double realized_reward = 0.0;          // sum of w^T y
  double regret() const { return oracle_value - expected_reward; }
};

class Environment {
 public:
  Environment(EnvConfig config, std::uint64_t seed);

  const EnvConfig& config() const { return config_; }
  const ItemPool& pool() const { return pool_; }
  const UserContext& current_user() const { return user_; }
  long step_count() const { return step_; }

  // Serves the action to the current user, applies the item lifecycle and
  // draws the next user. Throws EnvironmentError on an invalid action.
  StepOutcome step(const Action& action);

  ExpectedLabels expected_labels(const UserContext& user, const Item& item) const;
  double expected_reward(const UserContext& user, const Item& item) const;
  // Expected reward of the best M items for `user` in `pool`.
  double oracle_value(const UserContext& user, const ItemPool& pool) const;

  double affinity(const UserContext& user, const Item& item) const;

 private:
  double draw_quality();
  Item make_item(double quality);
  UserContext make_user();
  Interaction serve(const Item& item);
  void apply_lifecycle();

  EnvConfig config_;
  nn::Rng world_rng_;
  nn::Rng item_rng_;
  nn::Rng user_rng_;
  nn::Rng label_rng_;
  nn::Tensor2 user_projection_;  // F_u x L
  nn::Tensor2 item_projection_;  // (F_i - 1) x (L + 1)
  ItemPool pool_;
  UserContext user_;
  ItemId next_id_ = 0;
  long step_ = 0;
};

// Fixed pool, no turnover and no personalisation: P(like) = sigmoid(q_i)
// with the default like slope; used for stationary bandit checks.
EnvConfig stationary_scenario(std::vector<double> item_qualities, std::size_t slate_size = 1);

}  // namespace epinet_bandit::env
