#pragma once

#include <functional>
#include <string>
#include <vector>

#include "epinet_bandit/nn/parameter_store.h"

namespace epinet_bandit::harness {

struct GradcheckOptions {
  double step = 1e-5;
  double rel_tolerance = 1e-4;
  double abs_floor = 1e-7;
  std::uint64_t seed = 7;
  // Parameters whose name contains this string get a perturbed analytic
  // gradient, to confirm the checker catches a wrong backward pass.
  std::string inject_fault;
};

struct TensorCheck {
  std::string component;
  std::string parameter;
  std::size_t count = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  bool passed = true;
};

struct GradcheckReport {
  std::vector<TensorCheck> tensors;
  bool passed() const;
  std::string format() const;
};

// Compares the gradients already accumulated in `stores` (the analytic
// pass) against central differences of `loss` for every trainable entry.
// `loss` must be a pure function of the parameter values.
std::vector<TensorCheck> check_gradients(const std::string& component, const std::vector<nn::ParameterStore*>& stores,
                                         const std::function<double()>& loss, const GradcheckOptions& options);

// Dense nets, the epinet head and the full two-tower model with its overarch.
GradcheckReport run_gradcheck(const GradcheckOptions& options = {});

}  // namespace epinet_bandit::harness
