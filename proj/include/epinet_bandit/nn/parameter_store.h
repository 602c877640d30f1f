#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "epinet_bandit/nn/tensor.h"

namespace epinet_bandit::nn {

struct Parameter {
  std::string name;
  Tensor2 value;
  Tensor2 grad;
  bool trainable = true;
};

// Ordered collection of named arrays with matching gradient buffers.
class ParameterStore {
 public:
  Parameter& add(std::string name, Tensor2 value, bool trainable = true);

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grads();
  std::size_t scalar_count() const;
  // Content hash over names, shapes and value bytes.
  std::uint64_t hash() const;

 private:
  std::vector<Parameter> params_;
};

}  // namespace epinet_bandit::nn
