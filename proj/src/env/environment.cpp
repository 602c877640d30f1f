#include "epinet_bandit/env/environment.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "epinet_bandit/env/labels.h"
#include "epinet_bandit/errors.h"
#include "epinet_bandit/nn/loss.h"

namespace epinet_bandit::env {
namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// P(W >= threshold) for W ~ LogNormal(mu, sd).
double lognormal_tail(double mu, double sd, double threshold) {
  return normal_cdf((mu - std::log(threshold)) / sd);
}

nn::Tensor2 gaussian_matrix(nn::Rng& rng, std::size_t rows, std::size_t cols, double scale) {
  nn::Tensor2 m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

}  // namespace

// --- pool -------------------------------------------------------------------

const Item* ItemPool::find(ItemId id) const {
  auto it = std::lower_bound(live_.begin(), live_.end(), id, [](const Item& a, ItemId v) { return a.id < v; });
  return (it != live_.end() && it->id == id) ? &*it : nullptr;
}

Item* ItemPool::find_mutable(ItemId id) { return const_cast<Item*>(std::as_const(*this).find(id)); }

std::vector<ItemId> ItemPool::live_ids() const {
  std::vector<ItemId> ids;
  ids.reserve(live_.size());
  for (const auto& item : live_) ids.push_back(item.id);
  return ids;
}

nn::Tensor2 ItemPool::feature_matrix() const {
  if (live_.empty()) return {};
  nn::Tensor2 m(static_cast<Eigen::Index>(live_.size()), live_.front().features.size());
  for (std::size_t i = 0; i < live_.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = live_[i].features.transpose();
  return m;
}

// --- config -----------------------------------------------------------------

void validate(const EnvConfig& c) {
  std::vector<std::string> errors;
  const std::size_t n = c.fixed_item_qualities.empty() ? c.num_items : c.fixed_item_qualities.size();
  if (n == 0) errors.push_back("env.num_items must be >= 1");
  if (c.slate_size == 0) errors.push_back("env.slate_size must be >= 1");
  if (c.slate_size > n) errors.push_back("env.slate_size must not exceed env.num_items");
  if (c.impression_cap < 0) errors.push_back("env.impression_cap must be >= 0");
  if (c.max_age < 0) errors.push_back("env.max_age must be >= 0");
  if (c.refresh_per_step > n) errors.push_back("env.refresh_per_step must not exceed env.num_items");
  if (c.user_feature_dim == 0) errors.push_back("env.user_feature_dim must be >= 1");
  if (c.item_feature_dim < 2) errors.push_back("env.item_feature_dim must be >= 2");
  if (c.latent_dim == 0) errors.push_back("env.latent_dim must be >= 1");
  if (!(c.feature_noise >= 0.0)) errors.push_back("env.feature_noise must be >= 0");
  if (c.video_lengths.empty()) errors.push_back("env.video_lengths must not be empty");
  for (double len : c.video_lengths)
    if (!(len > 0.0)) errors.push_back("env.video_lengths entries must be > 0");
  if (!c.fixed_item_qualities.empty() && (c.impression_cap > 0 || c.max_age > 0 || c.refresh_per_step > 0))
    errors.push_back("a fixed item pool needs impression_cap = max_age = refresh_per_step = 0");
  if (!(c.truth.watch_log_sd > 0.0)) errors.push_back("env.watch_log_sd must be > 0");
  if (!(c.truth.max_loops >= 1.0)) errors.push_back("env.max_loops must be >= 1");
  for (double w : c.reward_weights)
    if (!(w >= 0.0)) errors.push_back("env.reward_weights entries must be >= 0");
  if (!errors.empty()) {
    std::ostringstream os;
    os << "invalid environment configuration:";
    for (const auto& e : errors) os << "\n  " << e;
    throw ConfigError(os.str());
  }
}

EnvConfig stationary_scenario(std::vector<double> item_qualities, std::size_t slate_size) {
  EnvConfig c;
  c.num_items = item_qualities.size();
  c.fixed_item_qualities = std::move(item_qualities);
  c.slate_size = slate_size;
  c.impression_cap = 0;
  c.refresh_per_step = 0;
  c.truth.personalization = 0.0;
  c.truth.quality_scale = 1.0;
  c.truth.like_slope = 1.0;
  c.truth.like_bias = 0.0;
  c.truth.share_slope = 1.0;
  c.truth.share_bias = -2.0;
  return c;
}

// --- environment ------------------------------------------------------------

Environment::Environment(EnvConfig config, std::uint64_t seed)
    : config_(std::move(config)),
      world_rng_(nn::Rng::stream(seed, "env.world")),
      item_rng_(nn::Rng::stream(seed, "env.items")),
      user_rng_(nn::Rng::stream(seed, "env.users")),
      label_rng_(nn::Rng::stream(seed, "env.labels")) {
  if (!config_.fixed_item_qualities.empty()) config_.num_items = config_.fixed_item_qualities.size();
  validate(config_);
  const std::size_t latent = config_.latent_dim;
  user_projection_ =
      gaussian_matrix(world_rng_, config_.user_feature_dim, latent, 1.0 / std::sqrt(static_cast<double>(latent)));
  item_projection_ = gaussian_matrix(world_rng_, config_.item_feature_dim - 1, latent + 1,
                                     1.0 / std::sqrt(static_cast<double>(latent + 1)));
  for (std::size_t i = 0; i < config_.num_items; ++i) {
    const double q = config_.fixed_item_qualities.empty() ? draw_quality() : config_.fixed_item_qualities[i];
    pool_.live_.push_back(make_item(q));
  }
  user_ = make_user();
}

double Environment::draw_quality() {
  const auto& t = config_.truth;
  double q = t.quality_sd * item_rng_.normal();
  if (item_rng_.bernoulli(t.breakout_probability)) q += t.breakout_boost;
  return q;
}

Item Environment::make_item(double quality) {
  Item item;
  item.id = next_id_++;
  item.birth_step = step_;
  item.quality = quality;
  item.latent.resize(static_cast<Eigen::Index>(config_.latent_dim));
  for (Eigen::Index i = 0; i < item.latent.size(); ++i) item.latent[i] = item_rng_.normal();
  item.video_length = config_.video_lengths[item_rng_.uniform_index(config_.video_lengths.size())];

  nn::Vector source(item.latent.size() + 1);
  source << item.latent, quality;
  item.features.resize(static_cast<Eigen::Index>(config_.item_feature_dim));
  const auto projected = static_cast<Eigen::Index>(config_.item_feature_dim - 1);
  item.features.head(projected) = item_projection_ * source;
  for (Eigen::Index i = 0; i < projected; ++i) item.features[i] += config_.feature_noise * item_rng_.normal();
  item.features[projected] = item.video_length / 60.0;
  return item;
}

UserContext Environment::make_user() {
  UserContext user;
  user.id = static_cast<std::uint64_t>(step_);
  user.latent.resize(static_cast<Eigen::Index>(config_.latent_dim));
  for (Eigen::Index i = 0; i < user.latent.size(); ++i) user.latent[i] = user_rng_.normal();
  user.features = user_projection_ * user.latent;
  for (Eigen::Index i = 0; i < user.features.size(); ++i) user.features[i] += config_.feature_noise * user_rng_.normal();
  return user;
}

double Environment::affinity(const UserContext& user, const Item& item) const {
  const double personal = user.latent.dot(item.latent) / std::sqrt(static_cast<double>(config_.latent_dim));
  return config_.truth.personalization * personal + config_.truth.quality_scale * item.quality;
}

ExpectedLabels Environment::expected_labels(const UserContext& user, const Item& item) const {
  const auto& t = config_.truth;
  const double aff = affinity(user, item);
  const double mu = t.watch_log_mean + t.watch_slope * aff;
  const double length = item.video_length;
  const double cap = t.max_loops * length;

  ExpectedLabels e;
  e.like = nn::sigmoid(t.like_slope * aff + t.like_bias);
  e.share = nn::sigmoid(t.share_slope * aff + t.share_bias);
  // Watch-score threshold on W for each length band.
  double threshold;
  if (length < 10.0)
    threshold = 2.0 * length;
  else if (length < 20.0)
    threshold = length;
  else
    threshold = 20.0;
  e.ws = threshold <= cap ? lognormal_tail(mu, t.watch_log_sd, threshold) : 0.0;
  // E[vvs] = (1/9) sum_k P(min(W, cap) >= 10k).
  for (int k = 1; k <= 9; ++k) {
    const double level = 10.0 * k;
    if (level <= cap) e.vvs += lognormal_tail(mu, t.watch_log_sd, level) / 9.0;
  }
  return e;
}

double Environment::expected_reward(const UserContext& user, const Item& item) const {
  return expected_labels(user, item).dot(config_.reward_weights);
}

double Environment::oracle_value(const UserContext& user, const ItemPool& pool) const {
  std::vector<double> values;
  values.reserve(pool.size());
  for (const auto& item : pool.live()) values.push_back(expected_reward(user, item));
  const std::size_t m = std::min(config_.slate_size, values.size());
  std::partial_sort(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(m), values.end(), std::greater<>());
  // Sum in sorted order so the value does not depend on pool order.
  return std::accumulate(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(m), 0.0);
}

Interaction Environment::serve(const Item& item) {
  const auto& t = config_.truth;
  const double aff = affinity(user_, item);
  Interaction out;
  out.step = step_;
  out.user_id = user_.id;
  out.user_features = user_.features;
  out.item_id = item.id;
  out.item_features = item.features;
  out.impression_count = item.impressions;
  out.video_length = item.video_length;

  const double mu = t.watch_log_mean + t.watch_slope * aff;
  const double watch = std::exp(mu + t.watch_log_sd * label_rng_.normal());
  out.watch_seconds = std::min(watch, t.max_loops * item.video_length);
  out.completed_count = static_cast<int>(std::floor(out.watch_seconds / item.video_length));
  const bool like = label_rng_.bernoulli(nn::sigmoid(t.like_slope * aff + t.like_bias));
  const bool share = label_rng_.bernoulli(nn::sigmoid(t.share_slope * aff + t.share_bias));

  out.labels[0] = watch_score(out.video_length, out.watch_seconds, out.completed_count);
  out.labels[1] = like ? 1.0 : 0.0;
  out.labels[2] = share ? 1.0 : 0.0;
  out.labels[3] = vvs(out.watch_seconds);
  return out;
}

StepOutcome Environment::step(const Action& action) {
  if (action.item_ids.size() != config_.slate_size)
    throw EnvironmentError("action has " + std::to_string(action.item_ids.size()) + " items, expected " +
                           std::to_string(config_.slate_size));
  for (std::size_t i = 0; i < action.item_ids.size(); ++i) {
    if (pool_.find(action.item_ids[i]) == nullptr)
      throw EnvironmentError("item " + std::to_string(action.item_ids[i]) + " is not in the live pool");
    for (std::size_t j = 0; j < i; ++j)
      if (action.item_ids[j] == action.item_ids[i])
        throw EnvironmentError("item " + std::to_string(action.item_ids[i]) + " proposed twice");
  }

  StepOutcome out;
  out.oracle_value = oracle_value(user_, pool_);
  for (ItemId id : action.item_ids) {
    Item* item = pool_.find_mutable(id);
    const double expected = expected_reward(user_, *item);
    out.expected_rewards.push_back(expected);
    out.expected_reward += expected;
    Interaction interaction = serve(*item);
    for (std::size_t k = 0; k < kNumLabels; ++k) out.realized_reward += config_.reward_weights[k] * interaction.labels[k];
    out.interactions.push_back(std::move(interaction));
    ++item->impressions;
  }
  ++step_;
  apply_lifecycle();
  user_ = make_user();
  return out;
}

void Environment::apply_lifecycle() {
  auto& live = pool_.live_;
  const std::size_t before = live.size();
  std::erase_if(live, [&](const Item& item) {
    const bool capped = config_.impression_cap > 0 && item.impressions >= config_.impression_cap;
    const bool aged = config_.max_age > 0 && step_ - item.birth_step >= config_.max_age;
    return capped || aged;
  });
  // Oldest items sit at the front (ids increase with birth).
  const std::size_t refresh = std::min(config_.refresh_per_step, live.size());
  live.erase(live.begin(), live.begin() + static_cast<std::ptrdiff_t>(refresh));
  pool_.retired_ += before - live.size();
  if (!config_.fixed_item_qualities.empty()) return;
  while (live.size() < config_.num_items) live.push_back(make_item(draw_quality()));
}

}  // namespace epinet_bandit::env
