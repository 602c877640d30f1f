#include "epinet_bandit/harness/calibrate.h"

#include <algorithm>
#include <numeric>

#include "epinet_bandit/errors.h"
#include "epinet_bandit/nn/loss.h"
#include "epinet_bandit/nn/rng.h"

namespace epinet_bandit::harness {
namespace {

env::Action random_slate(const env::ItemPool& pool, std::size_t m, nn::Rng& rng) {
  std::vector<env::ItemId> ids = pool.live_ids();
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < m; ++i) std::swap(ids[i], ids[i + rng.uniform_index(ids.size() - i)]);
  ids.resize(m);
  return env::Action{ids};
}

// Bias b with mean_i sigmoid(slope * a_i + b) = target.
double fit_bias(const std::vector<double>& affinities, double slope, double target) {
  const auto rate = [&](double b) {
    double s = 0.0;
    for (double a : affinities) s += nn::sigmoid(slope * a + b);
    return s / static_cast<double>(affinities.size());
  };
  double lo = -50.0;
  double hi = 50.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (rate(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

MarginalRates measure_random_serves(const env::EnvConfig& config, std::uint64_t seed, std::size_t serves) {
  env::Environment environment(config, nn::derive_seed(seed, "calibrate.env"));
  nn::Rng policy = nn::Rng::stream(seed, "calibrate.policy");
  MarginalRates rates;
  const std::size_t m = config.slate_size;
  while (static_cast<std::size_t>(rates.serves) < serves) {
    const auto outcome = environment.step(random_slate(environment.pool(), m, policy));
    for (const auto& it : outcome.interactions) {
      if (static_cast<std::size_t>(rates.serves) == serves) break;
      ++rates.serves;
      rates.ws += it.labels[0];
      rates.like += it.labels[1];
      rates.share += it.labels[2];
      rates.vvs += it.labels[3];
      rates.completion += it.completed_count >= 1 ? 1.0 : 0.0;
    }
  }
  const auto n = static_cast<double>(rates.serves);
  rates.ws /= n;
  rates.like /= n;
  rates.share /= n;
  rates.vvs /= n;
  rates.completion /= n;
  return rates;
}

CalibrationResult calibrate(const ExperimentConfig& config, std::uint64_t seed) {
  validate(config);
  // Affinities of random (user, item) pairs from an independent stream.
  env::Environment environment(config.env, nn::derive_seed(seed, "calibrate.fit"));
  nn::Rng policy = nn::Rng::stream(seed, "calibrate.fit_policy");
  std::vector<double> affinities;
  affinities.reserve(config.calibration.serves);
  while (affinities.size() < config.calibration.serves) {
    const env::Action action = random_slate(environment.pool(), config.env.slate_size, policy);
    for (auto id : action.item_ids)
      affinities.push_back(environment.affinity(environment.current_user(), *environment.pool().find(id)));
    environment.step(action);
  }
  CalibrationResult result;
  const auto& truth = config.env.truth;
  result.like_bias = fit_bias(affinities, truth.like_slope, config.calibration.like_rate_target);
  result.share_bias = fit_bias(affinities, truth.share_slope, config.calibration.share_rate_target);

  env::EnvConfig fitted = config.env;
  fitted.truth.like_bias = result.like_bias;
  fitted.truth.share_bias = result.share_bias;
  result.achieved = measure_random_serves(fitted, seed, config.calibration.serves);
  return result;
}

}  // namespace epinet_bandit::harness
