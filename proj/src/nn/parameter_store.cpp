#include "epinet_bandit/nn/parameter_store.h"

#include "epinet_bandit/errors.h"
#include "epinet_bandit/nn/rng.h"

namespace epinet_bandit::nn {

Parameter& ParameterStore::add(std::string name, Tensor2 value, bool trainable) {
  if (find(name) != nullptr) throw ConfigError("duplicate parameter name '" + name + "'");
  Tensor2 grad = Tensor2::Zero(value.rows(), value.cols());
  params_.push_back(Parameter{std::move(name), std::move(value), std::move(grad), trainable});
  return params_.back();
}

Parameter* ParameterStore::find(std::string_view name) {
  for (auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

const Parameter* ParameterStore::find(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

void ParameterStore::zero_grads() {
  for (auto& p : params_) p.grad.setZero();
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

std::uint64_t ParameterStore::hash() const {
  std::uint64_t h = fnv1a64("");
  for (const auto& p : params_) {
    h = fnv1a64(p.name.data(), p.name.size(), h);
    const std::int64_t shape[2] = {p.value.rows(), p.value.cols()};
    h = fnv1a64(shape, sizeof(shape), h);
    h = fnv1a64(p.value.data(), sizeof(double) * static_cast<std::size_t>(p.value.size()), h);
  }
  return h;
}

}  // namespace epinet_bandit::nn
