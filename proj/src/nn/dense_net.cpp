#include "epinet_bandit/nn/dense_net.h"

#include <cmath>

#include "epinet_bandit/errors.h"

namespace epinet_bandit::nn {
namespace {

void validate_dims(const std::vector<std::size_t>& dims) {
  if (dims.size() < 2) throw ConfigError("DenseNet needs at least an input and an output dimension");
  for (auto d : dims)
    if (d == 0) throw ConfigError("DenseNet layer dimensions must be positive");
}

std::string param_name(const std::string& net, std::size_t layer, const char* what) {
  return net + "/layer" + std::to_string(layer) + "/" + what;
}

}  // namespace

Tensor2 glorot_init(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  if (fan_in == 0 || fan_out == 0) throw ConfigError("glorot_init: fan_in and fan_out must be >= 1");
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor2 w(fan_in, fan_out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-limit, limit);
  return w;
}

DenseNet::DenseNet(std::string name, std::vector<std::size_t> layer_dims, Rng& init_rng, bool trainable)
    : name_(std::move(name)), dims_(std::move(layer_dims)) {
  validate_dims(dims_);
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    params_.add(param_name(name_, l, "weight"), glorot_init(init_rng, dims_[l], dims_[l + 1]), trainable);
    params_.add(param_name(name_, l, "bias"), Tensor2::Zero(1, dims_[l + 1]), trainable);
  }
}

DenseNet::DenseNet(std::string name, std::vector<std::size_t> layer_dims, bool trainable)
    : name_(std::move(name)), dims_(std::move(layer_dims)) {
  validate_dims(dims_);
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    params_.add(param_name(name_, l, "weight"), Tensor2::Zero(dims_[l], dims_[l + 1]), trainable);
    params_.add(param_name(name_, l, "bias"), Tensor2::Zero(1, dims_[l + 1]), trainable);
  }
}

const Tensor2& DenseNet::forward(const Tensor2& input) {
  if (static_cast<std::size_t>(input.cols()) != input_dim())
    throw ConfigError(name_ + ": input has " + std::to_string(input.cols()) + " columns, expected " +
                      std::to_string(input_dim()));
  const std::size_t layers = num_layers();
  inputs_.resize(layers);
  pre_.resize(layers);
  inputs_[0] = input;
  for (std::size_t l = 0; l < layers; ++l) {
    pre_[l].noalias() = inputs_[l] * weight(l);
    pre_[l].rowwise() += bias(l).row(0);
    if (l + 1 < layers) inputs_[l + 1] = pre_[l].cwiseMax(0.0);
  }
  return pre_.back();
}

Tensor2 DenseNet::predict(const Tensor2& input) const {
  if (static_cast<std::size_t>(input.cols()) != input_dim())
    throw ConfigError(name_ + ": input has " + std::to_string(input.cols()) + " columns, expected " +
                      std::to_string(input_dim()));
  Tensor2 pre;
  pre.noalias() = input * weight(0);
  pre.rowwise() += bias(0).row(0);
  return predict_from_first_preactivation(std::move(pre));
}

Tensor2 DenseNet::predict_from_first_preactivation(Tensor2 pre) const {
  if (static_cast<std::size_t>(pre.cols()) != dims_[1])
    throw ConfigError(name_ + ": first pre-activation has wrong width");
  for (std::size_t l = 1; l < num_layers(); ++l) {
    Tensor2 next;
    next.noalias() = pre.cwiseMax(0.0) * weight(l);
    next.rowwise() += bias(l).row(0);
    pre = std::move(next);
  }
  return pre;
}

Tensor2 DenseNet::backward(const Tensor2& upstream) {
  if (!has_cache()) throw StateError(name_ + ": backward called before forward");
  if (upstream.rows() != pre_.back().rows() || upstream.cols() != pre_.back().cols())
    throw ConfigError(name_ + ": upstream gradient shape does not match output");
  Tensor2 delta = upstream;
  for (std::size_t l = num_layers(); l-- > 0;) {
    weight_grad(l).noalias() += inputs_[l].transpose() * delta;
    bias_grad(l) += delta.colwise().sum();
    Tensor2 d_input;
    d_input.noalias() = delta * weight(l).transpose();
    if (l == 0) return d_input;
    delta = d_input.cwiseProduct((pre_[l - 1].array() > 0.0).cast<double>().matrix());
  }
  return delta;  // unreachable: num_layers() >= 1
}

void DenseNet::clear_cache() {
  inputs_.clear();
  pre_.clear();
}

}  // namespace epinet_bandit::nn
