#pragma once

#include <vector>

#include "epinet_bandit/enn/epistemic_net.h"

namespace epinet_bandit::enn {

struct EpinetConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> base_hidden = {64, 32};
  std::vector<std::size_t> epinet_hidden = {64, 32};
  std::size_t index_dim = 5;
  double prior_scale = 1.0;
};

// Additive epinet head:
//   f(x, z) = base(x) + learnable([x, z])^T z + prior_scale * prior([x, z])^T z
// The prior network has the learnable network's shape, its own Glorot draw,
// and is never updated. Gradients are not propagated into x.
class EpinetHead final : public EpistemicNet {
 public:
  EpinetHead(const EpinetConfig& config, nn::Rng& init_rng);

  EnnVariant variant() const override { return EnnVariant::kEpinet; }
  const ReferenceDistribution& reference() const override { return reference_; }
  std::size_t input_dim() const override { return config_.input_dim; }
  std::size_t index_dim() const { return config_.index_dim; }
  double prior_scale() const { return config_.prior_scale; }
  void set_prior_scale(double scale) { config_.prior_scale = scale; }
  const EpinetConfig& config() const { return config_; }

  nn::Vector forward(const nn::Tensor2& input, const EpistemicIndex& z) override;
  nn::Vector predict(const nn::Tensor2& input, const EpistemicIndex& z) const override;
  // Always returns an all-zero input gradient (stop-gradient on x).
  nn::Tensor2 backward(const EpistemicIndex& z, const nn::Vector& upstream) override;

  // Variants taking one index per row (rows x index_dim).
  nn::Vector forward_rows(const nn::Tensor2& input, const nn::Tensor2& indices);
  nn::Vector predict_rows(const nn::Tensor2& input, const nn::Tensor2& indices) const;
  nn::Tensor2 backward_rows(const nn::Vector& upstream);

  // Scoring entry point when the caller already holds x * W for the
  // x-block of each network's first layer (no bias). `z` is shared by all rows.
  nn::Vector predict_from_input_projections(const nn::Tensor2& base_pre, const nn::Tensor2& learnable_pre,
                                            const nn::Tensor2& prior_pre, const nn::Vector& z) const;

  // The learnable/prior contributions alone: learnable([x,z])^T z and prior([x,z])^T z.
  nn::Vector learnable_term(const nn::Tensor2& input, const nn::Vector& z) const;
  nn::Vector prior_term(const nn::Tensor2& input, const nn::Vector& z) const;

  std::vector<nn::ParameterStore*> trainable_stores() override;
  std::vector<const nn::ParameterStore*> all_stores() const override;

  nn::DenseNet& base_mlp() { return base_; }
  const nn::DenseNet& base_mlp() const { return base_; }
  nn::DenseNet& learnable_net() { return learnable_; }
  const nn::DenseNet& learnable_net() const { return learnable_; }
  const nn::DenseNet& prior_net() const { return prior_; }
  // Tests and checkpoint restore only; the head itself never writes it.
  nn::DenseNet& mutable_prior_net() { return prior_; }

 private:
  nn::Tensor2 index_rows(const EpistemicIndex& z, Eigen::Index rows) const;
  nn::Tensor2 concat(const nn::Tensor2& input, const nn::Tensor2& indices) const;

  EpinetConfig config_;
  ReferenceDistribution reference_;
  nn::DenseNet base_;
  nn::DenseNet learnable_;
  nn::DenseNet prior_;
  nn::Tensor2 cached_indices_;
};

}  // namespace epinet_bandit::enn
