#pragma once

namespace epinet_bandit::nn {

struct BceResult {
  double loss;
  double dloss_dlogit;
};

double sigmoid(double logit);

// Binary cross entropy on a logit, in the overflow-free form
// max(l,0) - l*y + log1p(exp(-|l|)). Label may be fractional.
BceResult bce_with_logit(double label, double logit);

}  // namespace epinet_bandit::nn
