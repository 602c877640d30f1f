#include "epinet_bandit/nn/loss.h"

#include <cmath>

namespace epinet_bandit::nn {

double sigmoid(double logit) {
  if (logit >= 0.0) return 1.0 / (1.0 + std::exp(-logit));
  const double e = std::exp(logit);
  return e / (1.0 + e);
}

BceResult bce_with_logit(double label, double logit) {
  const double loss = std::max(logit, 0.0) - logit * label + std::log1p(std::exp(-std::abs(logit)));
  // sigmoid(l) - y written so neither term cancels catastrophically at large |l|.
  const double grad = (1.0 - label) * sigmoid(logit) - label * sigmoid(-logit);
  return {loss, grad};
}

}  // namespace epinet_bandit::nn
