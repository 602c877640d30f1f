#pragma once

#include <span>
#include <string>
#include <unordered_map>

#include "epinet_bandit/nn/parameter_store.h"

namespace epinet_bandit::nn {

// p <- p - lr * grad for every trainable entry, then zero all grads.
// Throws NumericalError naming the first parameter with a non-finite grad;
// nothing is modified in that case.
void sgd_step(ParameterStore& params, double learning_rate);

enum class OptimizerKind { kSgd, kAdam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kSgd;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config = {}) : config_(config) {}

  void step(std::span<ParameterStore* const> stores);
  void step(ParameterStore& store) {
    ParameterStore* one[] = {&store};
    step(one);
  }

  const OptimizerConfig& config() const { return config_; }
  long long steps_taken() const { return steps_; }

  // Adam moments, keyed by parameter name. Exposed for snapshots.
  struct Moments {
    Tensor2 first;
    Tensor2 second;
  };
  std::unordered_map<std::string, Moments>& moments() { return moments_; }
  const std::unordered_map<std::string, Moments>& moments() const { return moments_; }
  void set_steps_taken(long long steps) { steps_ = steps; }

 private:
  OptimizerConfig config_;
  long long steps_ = 0;
  std::unordered_map<std::string, Moments> moments_;
};

}  // namespace epinet_bandit::nn
