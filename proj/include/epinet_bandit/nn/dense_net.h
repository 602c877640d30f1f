#pragma once

#include <string>
#include <vector>

#include "epinet_bandit/nn/parameter_store.h"
#include "epinet_bandit/nn/rng.h"
#include "epinet_bandit/nn/tensor.h"

namespace epinet_bandit::nn {

// Uniform Glorot draw on [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))].
Tensor2 glorot_init(Rng& rng, std::size_t fan_in, std::size_t fan_out);

// Fully connected network: ReLU on hidden layers, identity on the output.
// Parameters are named "<name>/layer<i>/weight" (fan_in x fan_out) and
// "<name>/layer<i>/bias" (1 x fan_out).
class DenseNet {
 public:
  // Glorot weights, zero biases.
  DenseNet(std::string name, std::vector<std::size_t> layer_dims, Rng& init_rng, bool trainable = true);
  // All-zero parameters.
  DenseNet(std::string name, std::vector<std::size_t> layer_dims, bool trainable = true);

  // Batched forward pass; caches activations for backward().
  const Tensor2& forward(const Tensor2& input);
  // Same arithmetic as forward() without touching the cache.
  Tensor2 predict(const Tensor2& input) const;
  // Continues a prediction from the first layer's pre-activation (bias included).
  Tensor2 predict_from_first_preactivation(Tensor2 pre) const;

  // Accumulates parameter gradients and returns d(loss)/d(input).
  Tensor2 backward(const Tensor2& upstream);

  const std::string& name() const { return name_; }
  const std::vector<std::size_t>& layer_dims() const { return dims_; }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  std::size_t num_layers() const { return dims_.size() - 1; }

  Tensor2& weight(std::size_t layer) { return params_[2 * layer].value; }
  const Tensor2& weight(std::size_t layer) const { return params_[2 * layer].value; }
  Tensor2& bias(std::size_t layer) { return params_[2 * layer + 1].value; }
  const Tensor2& bias(std::size_t layer) const { return params_[2 * layer + 1].value; }
  Tensor2& weight_grad(std::size_t layer) { return params_[2 * layer].grad; }
  Tensor2& bias_grad(std::size_t layer) { return params_[2 * layer + 1].grad; }

  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  bool has_cache() const { return !pre_.empty(); }
  void clear_cache();

 private:
  std::string name_;
  std::vector<std::size_t> dims_;
  ParameterStore params_;
  std::vector<Tensor2> inputs_;  // input to each layer
  std::vector<Tensor2> pre_;     // pre-activation of each layer
};

}  // namespace epinet_bandit::nn
