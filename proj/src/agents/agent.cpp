#include "epinet_bandit/agents/agent.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "epinet_bandit/errors.h"

namespace epinet_bandit::agents {
namespace {

using nlohmann::json;

const char* optimizer_name(nn::OptimizerKind kind) { return kind == nn::OptimizerKind::kAdam ? "adam" : "sgd"; }

json config_to_json(const AgentConfig& c) {
  return {{"kind", to_string(c.kind)},
          {"slate_size", c.slate_size},
          {"user_feature_dim", c.towers.user_feature_dim},
          {"item_feature_dim", c.towers.item_feature_dim},
          {"embedding_dim", c.towers.embedding_dim},
          {"num_tasks", c.towers.num_tasks},
          {"tower_hidden", c.towers.hidden},
          {"base_hidden", c.head.base_hidden},
          {"epinet_hidden", c.head.epinet_hidden},
          {"index_dim", c.head.index_dim},
          {"prior_scale", c.head.prior_scale},
          {"epinet_task", model::to_string(c.epinet_task)},
          {"control_weights", c.control_weights},
          {"index_per_example", c.index_per_example},
          {"optimizer", optimizer_name(c.optimizer.kind)},
          {"learning_rate", c.optimizer.learning_rate},
          {"batch_size", c.batch_size},
          {"train_every", c.train_every},
          {"buffer_capacity", c.buffer_capacity},
          {"epsilon", c.epsilon},
          {"ensemble_size", c.ensemble_size}};
}

AgentConfig config_from_json(const json& j) {
  AgentConfig c;
  c.kind = agent_kind_from_string(j.at("kind").get<std::string>());
  c.slate_size = j.at("slate_size").get<std::size_t>();
  c.towers.user_feature_dim = j.at("user_feature_dim").get<std::size_t>();
  c.towers.item_feature_dim = j.at("item_feature_dim").get<std::size_t>();
  c.towers.embedding_dim = j.at("embedding_dim").get<std::size_t>();
  c.towers.num_tasks = j.at("num_tasks").get<std::size_t>();
  c.towers.hidden = j.at("tower_hidden").get<std::vector<std::size_t>>();
  c.head.base_hidden = j.at("base_hidden").get<std::vector<std::size_t>>();
  c.head.epinet_hidden = j.at("epinet_hidden").get<std::vector<std::size_t>>();
  c.head.index_dim = j.at("index_dim").get<std::size_t>();
  c.head.prior_scale = j.at("prior_scale").get<double>();
  c.epinet_task = model::task_from_string(j.at("epinet_task").get<std::string>());
  c.control_weights = j.at("control_weights").get<std::array<double, model::kNumTasks>>();
  c.index_per_example = j.at("index_per_example").get<bool>();
  c.optimizer.kind = j.at("optimizer").get<std::string>() == "adam" ? nn::OptimizerKind::kAdam : nn::OptimizerKind::kSgd;
  c.optimizer.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.train_every = j.at("train_every").get<std::size_t>();
  c.buffer_capacity = j.at("buffer_capacity").get<std::size_t>();
  c.epsilon = j.at("epsilon").get<double>();
  c.ensemble_size = j.at("ensemble_size").get<std::size_t>();
  return c;
}

json rng_to_json(const nn::Rng& rng) {
  json state = json::array();
  for (auto s : rng.state()) state.push_back(std::to_string(s));
  return state;
}

nn::Rng::State rng_from_json(const json& j) {
  nn::Rng::State state{};
  if (j.size() != state.size()) throw LoadError("snapshot rng state has the wrong length");
  for (std::size_t i = 0; i < state.size(); ++i) state[i] = std::stoull(j.at(i).get<std::string>());
  return state;
}

}  // namespace

const char* to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::kEpinetTs:
      return "epinet_ts";
    case AgentKind::kGreedyPoint:
      return "greedy_point";
    case AgentKind::kEpsilonGreedy:
      return "epsilon_greedy";
    case AgentKind::kEnsembleTs:
      return "ensemble_ts";
  }
  return "unknown";
}

AgentKind agent_kind_from_string(std::string_view name) {
  if (name == "epinet_ts") return AgentKind::kEpinetTs;
  if (name == "greedy_point") return AgentKind::kGreedyPoint;
  if (name == "epsilon_greedy") return AgentKind::kEpsilonGreedy;
  if (name == "ensemble_ts") return AgentKind::kEnsembleTs;
  throw ConfigError("unknown agent kind '" + std::string(name) +
                    "' (expected epinet_ts, greedy_point, epsilon_greedy or ensemble_ts)");
}

void validate(const AgentConfig& c) {
  std::vector<std::string> errors;
  if (c.slate_size == 0) errors.push_back("slate size must be >= 1");
  if (c.towers.num_tasks != model::kNumTasks) errors.push_back("model.num_tasks must be 4");
  if (c.towers.embedding_dim == 0) errors.push_back("model.embedding_dim must be >= 1");
  if (c.head.index_dim == 0) errors.push_back("model.index_dim must be >= 1");
  if (!(c.head.prior_scale >= 0.0)) errors.push_back("model.prior_scale must be >= 0");
  if (!(c.optimizer.learning_rate >= 0.0)) errors.push_back("agent.learning_rate must be >= 0");
  if (c.batch_size == 0) errors.push_back("agent.batch_size must be >= 1");
  if (c.buffer_capacity == 0) errors.push_back("agent.buffer_capacity must be >= 1");
  if (!(c.epsilon >= 0.0 && c.epsilon <= 1.0)) errors.push_back("agent.epsilon must lie in [0, 1]");
  if (c.ensemble_size == 0) errors.push_back("agent.ensemble_size must be >= 1");
  for (double w : c.control_weights)
    if (!(w >= 0.0)) errors.push_back("model.control_weights entries must be >= 0");
  if (!errors.empty()) {
    std::ostringstream os;
    os << "invalid agent configuration:";
    for (const auto& e : errors) os << "\n  " << e;
    throw ConfigError(os.str());
  }
}

std::vector<std::size_t> top_m(const nn::Vector& scores, std::span<const env::ItemId> ids, std::size_t m) {
  if (static_cast<std::size_t>(scores.size()) != ids.size()) throw ConfigError("scores and ids differ in length");
  if (m > ids.size()) throw EnvironmentError("pool has fewer items than the slate size");
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    if (std::isnan(scores[i])) throw NumericalError("NaN item score");
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto better = [&](std::size_t a, std::size_t b) {
    if (scores[static_cast<Eigen::Index>(a)] != scores[static_cast<Eigen::Index>(b)])
      return scores[static_cast<Eigen::Index>(a)] > scores[static_cast<Eigen::Index>(b)];
    return ids[a] < ids[b];
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m), order.end(), better);
  order.resize(m);
  return order;
}

Agent::Agent(AgentConfig config, std::uint64_t seed)
    : config_(std::move(config)),
      seed_(seed),
      index_rng_(nn::Rng::stream(seed, "agent.index")),
      replay_rng_(nn::Rng::stream(seed, "agent.replay")),
      optimizer_(config_.optimizer) {
  validate(config_);
  nn::Rng init_rng = nn::Rng::stream(seed, "agent.init");
  switch (config_.kind) {
    case AgentKind::kEpinetTs:
      treatment_.emplace(config_.towers, config_.head, config_.epinet_task, init_rng);
      break;
    case AgentKind::kGreedyPoint:
    case AgentKind::kEpsilonGreedy:
      controls_.emplace_back(config_.towers, config_.control_weights, init_rng);
      break;
    case AgentKind::kEnsembleTs:
      for (std::size_t p = 0; p < config_.ensemble_size; ++p)
        controls_.emplace_back(config_.towers, config_.control_weights, init_rng,
                               "particle" + std::to_string(p + 1) + "/");
      break;
  }
}

nn::Vector Agent::greedy_scores(const nn::Vector& user_features, const nn::Tensor2& item_features) const {
  if (treatment_) return treatment_->score_items(user_features, item_features, nn::Vector::Zero(config_.head.index_dim));
  return controls_.front().score_items(user_features, item_features);
}

env::Action Agent::act(const nn::Vector& user_features, const env::ItemPool& pool) {
  const std::size_t m = config_.slate_size;
  if (pool.size() < m)
    throw EnvironmentError("live pool has " + std::to_string(pool.size()) + " items, slate needs " + std::to_string(m));
  const auto ids = pool.live_ids();
  const nn::Tensor2 features = pool.feature_matrix();

  nn::Vector scores;
  switch (config_.kind) {
    case AgentKind::kEpinetTs: {
      nn::Vector z(static_cast<Eigen::Index>(config_.head.index_dim));
      for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = index_rng_.normal();
      scores = treatment_->score_items(user_features, features, z);
      break;
    }
    case AgentKind::kGreedyPoint:
    case AgentKind::kEpsilonGreedy:
      scores = controls_.front().score_items(user_features, features);
      break;
    case AgentKind::kEnsembleTs:
      scores = controls_[index_rng_.uniform_index(controls_.size())].score_items(user_features, features);
      break;
  }

  env::Action action;
  if (config_.kind != AgentKind::kEpsilonGreedy) {
    for (std::size_t i : top_m(scores, ids, m)) action.item_ids.push_back(ids[i]);
    return action;
  }

  // Greedy order over the whole pool; each slot is either the best remaining
  // item or, with probability epsilon, a uniform draw from the remaining ones.
  std::vector<std::size_t> ranked = top_m(scores, ids, ids.size());
  for (std::size_t slot = 0; slot < m; ++slot) {
    std::size_t pick = 0;
    if (index_rng_.bernoulli(config_.epsilon)) pick = index_rng_.uniform_index(ranked.size());
    action.item_ids.push_back(ids[ranked[pick]]);
    ranked.erase(ranked.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return action;
}

void Agent::observe_and_update(std::span<const env::Interaction> interactions) {
  for (const auto& it : interactions) {
    buffer_.push_back(Row{it.user_features, it.item_features, it.labels});
    if (buffer_.size() > config_.buffer_capacity) buffer_.pop_front();
  }
  ++steps_;
  if (config_.train_every == 0 || buffer_.empty()) return;
  if (steps_ % static_cast<long>(config_.train_every) != 0) return;
  train_step();
}

model::Batch Agent::sample_batch() {
  const auto rows = static_cast<Eigen::Index>(config_.batch_size);
  const auto& first = buffer_.front();
  model::Batch batch{nn::Tensor2(rows, first.user.size()), nn::Tensor2(rows, first.item.size()),
                     nn::Tensor2(rows, static_cast<Eigen::Index>(model::kNumTasks))};
  for (Eigen::Index b = 0; b < rows; ++b) {
    const Row& row = buffer_[replay_rng_.uniform_index(buffer_.size())];
    batch.user_features.row(b) = row.user.transpose();
    batch.item_features.row(b) = row.item.transpose();
    for (std::size_t k = 0; k < model::kNumTasks; ++k) batch.labels(b, static_cast<Eigen::Index>(k)) = row.labels[k];
  }
  return batch;
}

void Agent::train_step() {
  if (treatment_) {
    const model::Batch batch = sample_batch();
    const auto index_rows = config_.index_per_example ? static_cast<Eigen::Index>(config_.batch_size) : 1;
    nn::Tensor2 indices(index_rows, static_cast<Eigen::Index>(config_.head.index_dim));
    for (Eigen::Index i = 0; i < indices.size(); ++i) indices.data()[i] = replay_rng_.normal();
    last_loss_ = treatment_->total_loss(batch, indices);
  } else {
    // Ensemble particles each see their own minibatch.
    model::LossBreakdown sum;
    for (auto& control : controls_) {
      const auto loss = control.total_loss(sample_batch());
      sum.embedding += loss.embedding;
      sum.total += loss.total;
    }
    last_loss_ = sum;
  }
  auto stores = trainable_stores();
  optimizer_.step(stores);
  ++updates_;
}

std::vector<const nn::ParameterStore*> Agent::all_stores() const {
  if (treatment_) return treatment_->all_stores();
  std::vector<const nn::ParameterStore*> out;
  for (const auto& c : controls_)
    for (const auto* s : c.all_stores()) out.push_back(s);
  return out;
}

std::vector<nn::ParameterStore*> Agent::trainable_stores() {
  if (treatment_) return treatment_->trainable_stores();
  std::vector<nn::ParameterStore*> out;
  for (auto& c : controls_)
    for (auto* s : c.trainable_stores()) out.push_back(s);
  return out;
}

enn::Checkpoint Agent::snapshot() const {
  enn::Checkpoint c;
  c.meta = {{"snapshot_version", kSnapshotVersion},
            {"config", config_to_json(config_)},
            {"seed", std::to_string(seed_)},
            {"steps", steps_},
            {"updates", updates_},
            {"optimizer_steps", optimizer_.steps_taken()},
            {"index_rng", rng_to_json(index_rng_)},
            {"replay_rng", rng_to_json(replay_rng_)},
            {"buffer_rows", buffer_.size()}};
  enn::append_stores(c, all_stores());

  std::vector<std::string> moment_names;
  for (const auto& [name, m] : optimizer_.moments()) moment_names.push_back(name);
  std::sort(moment_names.begin(), moment_names.end());
  for (const auto& name : moment_names) {
    const auto& m = optimizer_.moments().at(name);
    c.tensors.push_back({"adam_m/" + name, m.first});
    c.tensors.push_back({"adam_v/" + name, m.second});
  }
  c.meta["adam_moments"] = moment_names;

  if (!buffer_.empty()) {
    const auto rows = static_cast<Eigen::Index>(buffer_.size());
    nn::Tensor2 users(rows, buffer_.front().user.size());
    nn::Tensor2 items(rows, buffer_.front().item.size());
    nn::Tensor2 labels(rows, static_cast<Eigen::Index>(env::kNumLabels));
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto& row = buffer_[static_cast<std::size_t>(r)];
      users.row(r) = row.user.transpose();
      items.row(r) = row.item.transpose();
      for (std::size_t k = 0; k < env::kNumLabels; ++k) labels(r, static_cast<Eigen::Index>(k)) = row.labels[k];
    }
    c.tensors.push_back({"buffer/user_features", std::move(users)});
    c.tensors.push_back({"buffer/item_features", std::move(items)});
    c.tensors.push_back({"buffer/labels", std::move(labels)});
  }
  return c;
}

Agent Agent::restore(const enn::Checkpoint& checkpoint) {
  const auto& meta = checkpoint.meta;
  try {
    if (!meta.contains("snapshot_version") || meta.at("snapshot_version").get<int>() != kSnapshotVersion)
      throw LoadError("agent snapshot version mismatch");
    Agent agent(config_from_json(meta.at("config")), std::stoull(meta.at("seed").get<std::string>()));
    auto stores = agent.trainable_stores();
    if (agent.treatment_) stores.push_back(&agent.treatment_->head().mutable_prior_net().params());
    enn::restore_stores(checkpoint, stores);

    for (const auto& name : meta.at("adam_moments")) {
      const auto key = name.get<std::string>();
      const auto* m = checkpoint.find("adam_m/" + key);
      const auto* v = checkpoint.find("adam_v/" + key);
      if (m == nullptr || v == nullptr) throw LoadError("snapshot is missing Adam moments for '" + key + "'");
      agent.optimizer_.moments()[key] = {m->value, v->value};
    }
    agent.optimizer_.set_steps_taken(meta.at("optimizer_steps").get<long long>());

    const auto rows = meta.at("buffer_rows").get<std::size_t>();
    if (rows > 0) {
      const auto* users = checkpoint.find("buffer/user_features");
      const auto* items = checkpoint.find("buffer/item_features");
      const auto* labels = checkpoint.find("buffer/labels");
      if (users == nullptr || items == nullptr || labels == nullptr ||
          static_cast<std::size_t>(users->value.rows()) != rows || items->value.rows() != users->value.rows() ||
          labels->value.rows() != users->value.rows() || labels->value.cols() != static_cast<Eigen::Index>(env::kNumLabels))
        throw LoadError("snapshot replay buffer is inconsistent");
      for (std::size_t r = 0; r < rows; ++r) {
        Row row;
        row.user = users->value.row(static_cast<Eigen::Index>(r)).transpose();
        row.item = items->value.row(static_cast<Eigen::Index>(r)).transpose();
        for (std::size_t k = 0; k < env::kNumLabels; ++k)
          row.labels[k] = labels->value(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k));
        agent.buffer_.push_back(std::move(row));
      }
    }
    agent.steps_ = meta.at("steps").get<long>();
    agent.updates_ = meta.at("updates").get<long>();
    agent.index_rng_.set_state(rng_from_json(meta.at("index_rng")));
    agent.replay_rng_.set_state(rng_from_json(meta.at("replay_rng")));
    return agent;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("agent snapshot meta is malformed: ") + e.what());
  } catch (const ConfigError& e) {
    throw LoadError(std::string("agent snapshot config is invalid: ") + e.what());
  }
}

}  // namespace epinet_bandit::agents
