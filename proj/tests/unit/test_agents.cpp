#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "epinet_bandit/agents/agent.h"
#include "epinet_bandit/errors.h"
#include "epinet_bandit/model/two_tower.h"

namespace agents = epinet_bandit::agents;
namespace env = epinet_bandit::env;
namespace model = epinet_bandit::model;
namespace nn = epinet_bandit::nn;
using epinet_bandit::EnvironmentError;
using epinet_bandit::LoadError;

namespace {

agents::AgentConfig agent_for(const env::EnvConfig& e, agents::AgentKind kind) {
  agents::AgentConfig c;
  c.kind = kind;
  c.slate_size = e.slate_size;
  c.towers.user_feature_dim = e.user_feature_dim;
  c.towers.item_feature_dim = e.item_feature_dim;
  c.towers.embedding_dim = 4;
  c.towers.hidden = {16};
  c.head.input_dim = model::overarch_input_dim(c.towers.embedding_dim, c.towers.num_tasks);
  c.head.base_hidden = {16, 8};
  c.head.epinet_hidden = {16, 8};
  c.head.index_dim = 4;
  c.ensemble_size = 3;
  return c;
}

env::EnvConfig small_env(std::size_t items = 12, std::size_t slate = 3) {
  env::EnvConfig c;
  c.num_items = items;
  c.slate_size = slate;
  c.impression_cap = 0;
  c.refresh_per_step = 0;
  c.user_feature_dim = 6;
  c.item_feature_dim = 5;
  c.latent_dim = 3;
  return c;
}

constexpr agents::AgentKind kAllKinds[] = {agents::AgentKind::kEpinetTs, agents::AgentKind::kGreedyPoint,
                                           agents::AgentKind::kEpsilonGreedy, agents::AgentKind::kEnsembleTs};

std::vector<std::uint64_t> hashes(const agents::Agent& a) {
  std::vector<std::uint64_t> out;
  for (const auto* s : a.all_stores()) out.push_back(s->hash());
  return out;
}

void run_steps(agents::Agent& agent, env::Environment& e, int steps) {
  for (int t = 0; t < steps; ++t) {
    const auto action = agent.act(e.current_user().features, e.pool());
    const auto out = e.step(action);
    agent.observe_and_update(out.interactions);
  }
}

}  // namespace

TEST(TopM, MatchesFullSortWithIdTieBreak) {
  nn::Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 30;
    nn::Vector scores(n);
    std::vector<env::ItemId> ids(n);
    for (int i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(rng.uniform_index(6));  // plenty of ties
      ids[i] = 1000 - 7 * i + static_cast<env::ItemId>(rng.uniform_index(3));
    }
    std::vector<std::size_t> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return scores[a] != scores[b] ? scores[a] > scores[b] : ids[a] < ids[b];
    });
    order.resize(8);
    EXPECT_EQ(agents::top_m(scores, ids, 8), order);
  }
}

TEST(TopM, ErrorsOnShortPoolAndNaN) {
  nn::Vector s(2);
  s << 1.0, 2.0;
  const std::vector<env::ItemId> ids = {1, 2};
  EXPECT_THROW(agents::top_m(s, ids, 3), EnvironmentError);
  s[0] = std::nan("");
  EXPECT_THROW(agents::top_m(s, ids, 1), epinet_bandit::NumericalError);
}

TEST(Act, WholePoolSlateReturnsEveryItem) {
  const auto ec = small_env(5, 5);
  env::Environment e(ec, 1);
  for (auto kind : kAllKinds) {
    agents::Agent agent(agent_for(ec, kind), 2);
    const auto a = agent.act(e.current_user().features, e.pool());
    std::set<env::ItemId> got(a.item_ids.begin(), a.item_ids.end());
    const auto ids = e.pool().live_ids();
    EXPECT_EQ(got, std::set<env::ItemId>(ids.begin(), ids.end())) << agents::to_string(kind);
    EXPECT_EQ(a.item_ids.size(), 5u);
  }
}

TEST(Act, PoolSmallerThanSlateIsAnEnvironmentError) {
  const auto ec = small_env(5, 5);
  env::Environment e(ec, 1);
  auto big = ec;
  big.slate_size = 6;
  for (auto kind : kAllKinds) {
    agents::Agent agent(agent_for(big, kind), 2);
    EXPECT_THROW(agent.act(e.current_user().features, e.pool()), EnvironmentError);
  }
}

TEST(Act, SlatesAreDistinctLiveItems) {
  const auto ec = small_env(12, 4);
  env::Environment e(ec, 3);
  for (auto kind : kAllKinds) {
    agents::Agent agent(agent_for(ec, kind), 4);
    for (int t = 0; t < 20; ++t) {
      const auto a = agent.act(e.current_user().features, e.pool());
      std::set<env::ItemId> unique(a.item_ids.begin(), a.item_ids.end());
      EXPECT_EQ(unique.size(), 4u);
      for (auto id : a.item_ids) EXPECT_NE(e.pool().find(id), nullptr);
    }
  }
}

TEST(Act, EpsilonOneIsUniform) {
  auto ec = small_env(10, 1);
  env::Environment e(ec, 5);
  auto cfg = agent_for(ec, agents::AgentKind::kEpsilonGreedy);
  cfg.epsilon = 1.0;
  agents::Agent agent(cfg, 6);
  const auto ids = e.pool().live_ids();
  std::vector<double> counts(10, 0.0);
  const int n = 100000;
  for (int t = 0; t < n; ++t) {
    const auto a = agent.act(e.current_user().features, e.pool());
    counts[std::find(ids.begin(), ids.end(), a.item_ids[0]) - ids.begin()] += 1.0;
  }
  double chi2 = 0.0;
  for (double c : counts) {
    EXPECT_NEAR(c / n, 0.1, 0.02);
    chi2 += (c - n / 10.0) * (c - n / 10.0) / (n / 10.0);
  }
  // 99.9th percentile of chi-square with 9 degrees of freedom.
  EXPECT_LT(chi2, 27.877);
}

TEST(Act, EpsilonZeroIsGreedy) {
  const auto ec = small_env(12, 3);
  env::Environment e(ec, 7);
  auto cfg = agent_for(ec, agents::AgentKind::kEpsilonGreedy);
  cfg.epsilon = 0.0;
  agents::Agent eps(cfg, 8);
  cfg.kind = agents::AgentKind::kGreedyPoint;
  agents::Agent greedy(cfg, 8);
  for (int t = 0; t < 10; ++t) {
    EXPECT_EQ(eps.act(e.current_user().features, e.pool()).item_ids,
              greedy.act(e.current_user().features, e.pool()).item_ids);
    e.step(greedy.act(e.current_user().features, e.pool()));
  }
}

TEST(Act, GreedyIsAPureFunctionOfUserAndPool) {
  const auto ec = small_env(20, 4);
  env::Environment e(ec, 9);
  agents::Agent a(agent_for(ec, agents::AgentKind::kGreedyPoint), 10);
  agents::Agent b(agent_for(ec, agents::AgentKind::kGreedyPoint), 10);
  const auto& user = e.current_user().features;
  const auto first = a.act(user, e.pool());
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.act(user, e.pool()).item_ids, first.item_ids);
  EXPECT_EQ(b.act(user, e.pool()).item_ids, first.item_ids);
}

TEST(Act, NoPriorAndZeroLearnableNetIsGreedyOnTheBaseNet) {
  const auto ec = small_env(20, 4);
  env::Environment e(ec, 11);
  auto cfg = agent_for(ec, agents::AgentKind::kEpinetTs);
  cfg.head.prior_scale = 0.0;
  agents::Agent agent(cfg, 12);
  for (auto& p : agent.treatment()->head().learnable_net().params()) p.value.setZero();
  const auto& user = e.current_user().features;
  const auto ids = e.pool().live_ids();
  const nn::Vector base_scores = agent.greedy_scores(user, e.pool().feature_matrix());
  std::vector<env::ItemId> expected;
  for (auto i : agents::top_m(base_scores, ids, 4)) expected.push_back(ids[i]);
  for (int t = 0; t < 20; ++t) EXPECT_EQ(agent.act(user, e.pool()).item_ids, expected);
}

TEST(Act, ThompsonSamplingVariesAtInitialisation) {
  // Fixed 50-item pool and user; default-sized model.
  env::EnvConfig ec;
  ec.num_items = 50;
  ec.slate_size = 1;
  ec.impression_cap = 0;
  ec.refresh_per_step = 0;
  double distinct = 0.0;
  const int seeds = 5;
  for (int seed = 1; seed <= seeds; ++seed) {
    env::Environment e(ec, seed);
    agents::AgentConfig cfg;
    cfg.slate_size = 1;
    cfg.head.input_dim = model::overarch_input_dim(cfg.towers.embedding_dim, cfg.towers.num_tasks);
    agents::Agent agent(cfg, 100 + seed);
    std::set<env::ItemId> top;
    for (int t = 0; t < 100; ++t) top.insert(agent.act(e.current_user().features, e.pool()).item_ids[0]);
    distinct += static_cast<double>(top.size()) / seeds;
  }
  EXPECT_GE(distinct, 2.0);
}

TEST(Update, NeverTrainingLeavesParametersAlone) {
  const auto ec = small_env(12, 3);
  for (auto kind : kAllKinds) {
    env::Environment e(ec, 13);
    auto cfg = agent_for(ec, kind);
    cfg.train_every = 0;
    agents::Agent agent(cfg, 14);
    const auto before = hashes(agent);
    run_steps(agent, e, 30);
    EXPECT_EQ(hashes(agent), before) << agents::to_string(kind);
    EXPECT_EQ(agent.updates(), 0);
    EXPECT_EQ(agent.steps(), 30);
  }
}

TEST(Update, ZeroLearningRateLeavesParametersAlone) {
  const auto ec = small_env(12, 3);
  for (auto kind : kAllKinds) {
    env::Environment e(ec, 15);
    auto cfg = agent_for(ec, kind);
    cfg.optimizer.learning_rate = 0.0;
    agents::Agent agent(cfg, 16);
    const auto before = hashes(agent);
    run_steps(agent, e, 1);
    EXPECT_EQ(agent.updates(), 1);
    EXPECT_EQ(hashes(agent), before) << agents::to_string(kind);
  }
}

TEST(Update, TrainingChangesParametersButNeverThePrior) {
  const auto ec = small_env(12, 3);
  env::Environment e(ec, 17);
  agents::Agent agent(agent_for(ec, agents::AgentKind::kEpinetTs), 18);
  const auto prior = agent.treatment()->head().prior_net().params().hash();
  const auto before = hashes(agent);
  run_steps(agent, e, 20);
  EXPECT_NE(hashes(agent), before);
  EXPECT_EQ(agent.treatment()->head().prior_net().params().hash(), prior);
  ASSERT_TRUE(agent.last_loss().has_value());
  EXPECT_GT(agent.last_loss()->epinet, 0.0);
}

TEST(Update, BufferIsBoundedFifo) {
  const auto ec = small_env(12, 3);
  env::Environment e(ec, 19);
  auto cfg = agent_for(ec, agents::AgentKind::kGreedyPoint);
  cfg.buffer_capacity = 10;
  agents::Agent agent(cfg, 20);
  run_steps(agent, e, 2);
  EXPECT_EQ(agent.buffer_size(), 6u);
  run_steps(agent, e, 5);
  EXPECT_EQ(agent.buffer_size(), 10u);
}

TEST(Update, TrainEveryControlsCadence) {
  const auto ec = small_env(12, 3);
  env::Environment e(ec, 21);
  auto cfg = agent_for(ec, agents::AgentKind::kGreedyPoint);
  cfg.train_every = 4;
  agents::Agent agent(cfg, 22);
  run_steps(agent, e, 17);
  EXPECT_EQ(agent.updates(), 4);
}

TEST(Update, DoesNotTouchThePool) {
  const auto ec = small_env(12, 3);
  env::Environment e(ec, 23);
  agents::Agent agent(agent_for(ec, agents::AgentKind::kEpinetTs), 24);
  const auto out = e.step(agent.act(e.current_user().features, e.pool()));
  const auto ids = e.pool().live_ids();
  std::vector<long> impressions;
  for (const auto& item : e.pool().live()) impressions.push_back(item.impressions);
  agent.observe_and_update(out.interactions);
  EXPECT_EQ(e.pool().live_ids(), ids);
  for (std::size_t i = 0; i < impressions.size(); ++i) EXPECT_EQ(e.pool().live()[i].impressions, impressions[i]);
}

TEST(Convergence, EpinetFindsTheDominantItem) {
  // Like probability 0.9 for one item and 0.1 for the other nineteen.
  const double hi = std::log(0.9 / 0.1);
  std::vector<double> qualities(20, -hi);
  qualities[13] = hi;
  auto ec = env::stationary_scenario(qualities, 1);
  ec.reward_weights = {0.0, 1.0, 0.0, 0.0};
  double share = 0.0;
  const int seeds = 5;
  for (int seed = 1; seed <= seeds; ++seed) {
    env::Environment e(ec, seed);
    const env::ItemId best = e.pool().live()[13].id;
    auto cfg = agent_for(ec, agents::AgentKind::kEpinetTs);
    cfg.epinet_task = model::Task::kLike;
    cfg.optimizer.learning_rate = 0.03;
    agents::Agent agent(cfg, 1000 + seed);
    run_steps(agent, e, 400);
    int hits = 0;
    for (int t = 0; t < 100; ++t) {
      const auto action = agent.act(e.current_user().features, e.pool());
      hits += action.item_ids[0] == best;
      agent.observe_and_update(e.step(action).interactions);
    }
    share += hits / 100.0 / seeds;
  }
  EXPECT_GE(share, 0.8);
}

// --- snapshots ---------------------------------------------------------------

TEST(Snapshot, RoundTripReproducesDecisionsAndTraining) {
  const auto ec = small_env(15, 3);
  for (auto kind : kAllKinds) {
    env::Environment e(ec, 25);
    auto cfg = agent_for(ec, kind);
    cfg.optimizer.kind = nn::OptimizerKind::kAdam;
    agents::Agent agent(cfg, 26);
    run_steps(agent, e, 12);

    const std::string bytes = epinet_bandit::enn::encode_checkpoint(agent.snapshot());
    agents::Agent back = agents::Agent::restore(epinet_bandit::enn::decode_checkpoint(bytes));
    EXPECT_EQ(back.steps(), agent.steps());
    EXPECT_EQ(back.updates(), agent.updates());
    EXPECT_EQ(back.buffer_size(), agent.buffer_size());
    EXPECT_EQ(hashes(back), hashes(agent));

    env::Environment e2 = e;
    for (int t = 0; t < 8; ++t) {
      const auto a1 = agent.act(e.current_user().features, e.pool());
      const auto a2 = back.act(e2.current_user().features, e2.pool());
      ASSERT_EQ(a1.item_ids, a2.item_ids) << agents::to_string(kind) << " step " << t;
      agent.observe_and_update(e.step(a1).interactions);
      back.observe_and_update(e2.step(a2).interactions);
    }
    EXPECT_EQ(hashes(back), hashes(agent)) << agents::to_string(kind);
  }
}

TEST(Snapshot, RestoresIntoADifferentPoolSize) {
  const auto ec = small_env(15, 3);
  env::Environment e(ec, 27);
  agents::Agent agent(agent_for(ec, agents::AgentKind::kEpinetTs), 28);
  run_steps(agent, e, 5);
  agents::Agent back = agents::Agent::restore(agent.snapshot());
  env::Environment larger(small_env(40, 3), 29);
  const auto a = back.act(larger.current_user().features, larger.pool());
  EXPECT_EQ(a.item_ids.size(), 3u);
}

TEST(Snapshot, CorruptionAndVersionMismatchAreLoadErrors) {
  const auto ec = small_env(10, 2);
  agents::Agent agent(agent_for(ec, agents::AgentKind::kGreedyPoint), 30);
  auto snap = agent.snapshot();

  auto wrong_version = snap;
  wrong_version.meta["snapshot_version"] = agents::kSnapshotVersion + 1;
  EXPECT_THROW(agents::Agent::restore(wrong_version), LoadError);

  auto no_config = snap;
  no_config.meta.erase("config");
  EXPECT_THROW(agents::Agent::restore(no_config), LoadError);

  auto bad_kind = snap;
  bad_kind.meta["config"]["kind"] = 17;
  EXPECT_THROW(agents::Agent::restore(bad_kind), LoadError);

  auto missing_tensor = snap;
  missing_tensor.tensors.erase(missing_tensor.tensors.begin());
  EXPECT_THROW(agents::Agent::restore(missing_tensor), LoadError);

  std::string bytes = epinet_bandit::enn::encode_checkpoint(snap);
  bytes[24] = '[';
  EXPECT_THROW(agents::Agent::restore(epinet_bandit::enn::decode_checkpoint(bytes)), LoadError);
}

TEST(Kinds, NamesRoundTrip) {
  for (auto kind : kAllKinds) EXPECT_EQ(agents::agent_kind_from_string(agents::to_string(kind)), kind);
  EXPECT_THROW(agents::agent_kind_from_string("ucb"), epinet_bandit::ConfigError);
}

TEST(Kinds, InvalidConfigurationIsRejected) {
  auto cfg = agent_for(small_env(), agents::AgentKind::kEpsilonGreedy);
  cfg.epsilon = 1.5;
  EXPECT_THROW(agents::Agent(cfg, 1), epinet_bandit::ConfigError);
  cfg.epsilon = 0.1;
  cfg.batch_size = 0;
  EXPECT_THROW(agents::Agent(cfg, 1), epinet_bandit::ConfigError);
}
