#include "epinet_bandit/nn/optimizer.h"

#include <cmath>

#include "epinet_bandit/errors.h"

namespace epinet_bandit::nn {
namespace {

void check_finite_grads(const ParameterStore& store) {
  for (const auto& p : store)
    if (p.trainable && !p.grad.allFinite())
      throw NumericalError("non-finite gradient in parameter '" + p.name + "'");
}

}  // namespace

void sgd_step(ParameterStore& params, double learning_rate) {
  check_finite_grads(params);
  for (auto& p : params)
    if (p.trainable) p.value.noalias() -= learning_rate * p.grad;
  params.zero_grads();
}

void Optimizer::step(std::span<ParameterStore* const> stores) {
  for (const auto* store : stores) check_finite_grads(*store);
  ++steps_;
  if (config_.kind == OptimizerKind::kSgd) {
    for (auto* store : stores) sgd_step(*store, config_.learning_rate);
    return;
  }
  const double bias1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double bias2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (auto* store : stores) {
    for (auto& p : *store) {
      if (!p.trainable) continue;
      auto [it, inserted] = moments_.try_emplace(p.name);
      if (inserted) {
        it->second.first = Tensor2::Zero(p.value.rows(), p.value.cols());
        it->second.second = Tensor2::Zero(p.value.rows(), p.value.cols());
      }
      auto& m = it->second;
      m.first = config_.beta1 * m.first + (1.0 - config_.beta1) * p.grad;
      m.second = config_.beta2 * m.second + (1.0 - config_.beta2) * p.grad.cwiseAbs2();
      p.value.array() -= config_.learning_rate * (m.first.array() / bias1) /
                         ((m.second.array() / bias2).sqrt() + config_.epsilon);
    }
    store->zero_grads();
  }
}

}  // namespace epinet_bandit::nn
