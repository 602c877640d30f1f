#pragma once

#include <cstdint>

#include "epinet_bandit/env/environment.h"
#include "epinet_bandit/harness/config.h"

namespace epinet_bandit::harness {

// Label averages over uniformly random slates.
struct MarginalRates {
  long serves = 0;
  double like = 0.0;
  double share = 0.0;
  double ws = 0.0;
  double vvs = 0.0;
  double completion = 0.0;
};

// Serves `serves` random items (uniform slates over the live pool) and
// averages the realized labels.
MarginalRates measure_random_serves(const env::EnvConfig& env, std::uint64_t seed, std::size_t serves);

struct CalibrationResult {
  double like_bias = 0.0;
  double share_bias = 0.0;
  MarginalRates achieved;  // realized, with the fitted biases
};

// Fits like_bias and share_bias so the expected marginal rates under random
// serving hit the targets, then measures the realized rates on fresh draws.
CalibrationResult calibrate(const ExperimentConfig& config, std::uint64_t seed = 1);

}  // namespace epinet_bandit::harness
