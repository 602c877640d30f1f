#pragma once

#include <memory>
#include <vector>

#include "epinet_bandit/enn/reference.h"
#include "epinet_bandit/nn/dense_net.h"

namespace epinet_bandit::enn {

enum class EnnVariant { kPointEstimate, kMcDropout, kDeepEnsemble, kEpinet };

const char* to_string(EnnVariant variant);

// A network f(x, z) whose scalar output depends on the input batch and an
// epistemic index z drawn from reference().
class EpistemicNet {
 public:
  virtual ~EpistemicNet() = default;

  virtual EnnVariant variant() const = 0;
  virtual const ReferenceDistribution& reference() const = 0;
  virtual std::size_t input_dim() const = 0;

  // One logit per input row. Caches what backward() needs.
  virtual nn::Vector forward(const nn::Tensor2& input, const EpistemicIndex& z) = 0;
  // Same value as forward(), without caching; safe on a shared const net.
  virtual nn::Vector predict(const nn::Tensor2& input, const EpistemicIndex& z) const = 0;
  // Accumulates parameter gradients for d(loss)/d(logit) = upstream and
  // returns the gradient with respect to the input.
  virtual nn::Tensor2 backward(const EpistemicIndex& z, const nn::Vector& upstream) = 0;

  virtual std::vector<nn::ParameterStore*> trainable_stores() = 0;
  virtual std::vector<const nn::ParameterStore*> all_stores() const = 0;

 protected:
  void check_input(const nn::Tensor2& input) const;
};

// f(x, z) = g(x); the index is ignored.
class PointEstimateNet final : public EpistemicNet {
 public:
  explicit PointEstimateNet(nn::DenseNet base);

  EnnVariant variant() const override { return EnnVariant::kPointEstimate; }
  const ReferenceDistribution& reference() const override { return reference_; }
  std::size_t input_dim() const override { return base_.input_dim(); }
  nn::Vector forward(const nn::Tensor2& input, const EpistemicIndex& z) override;
  nn::Vector predict(const nn::Tensor2& input, const EpistemicIndex& z) const override;
  nn::Tensor2 backward(const EpistemicIndex& z, const nn::Vector& upstream) override;
  std::vector<nn::ParameterStore*> trainable_stores() override { return {&base_.params()}; }
  std::vector<const nn::ParameterStore*> all_stores() const override { return {&base_.params()}; }

  nn::DenseNet& base() { return base_; }
  const nn::DenseNet& base() const { return base_; }

 private:
  nn::DenseNet base_;
  // Any distribution works; a one-particle discrete one keeps draws cheap.
  ReferenceDistribution reference_ = ReferenceDistribution::discrete(1);
};

// f(x, z) = g(x * z) with z a uniform binary mask over input features.
class McDropoutNet final : public EpistemicNet {
 public:
  explicit McDropoutNet(nn::DenseNet base);

  EnnVariant variant() const override { return EnnVariant::kMcDropout; }
  const ReferenceDistribution& reference() const override { return reference_; }
  std::size_t input_dim() const override { return base_.input_dim(); }
  nn::Vector forward(const nn::Tensor2& input, const EpistemicIndex& z) override;
  nn::Vector predict(const nn::Tensor2& input, const EpistemicIndex& z) const override;
  nn::Tensor2 backward(const EpistemicIndex& z, const nn::Vector& upstream) override;
  std::vector<nn::ParameterStore*> trainable_stores() override { return {&base_.params()}; }
  std::vector<const nn::ParameterStore*> all_stores() const override { return {&base_.params()}; }

  nn::DenseNet& base() { return base_; }

 private:
  nn::DenseNet base_;
  ReferenceDistribution reference_;
};

// f(x, z) = g_z(x) with z uniform over particles {1..N}.
class DeepEnsembleNet final : public EpistemicNet {
 public:
  explicit DeepEnsembleNet(std::vector<nn::DenseNet> particles);

  EnnVariant variant() const override { return EnnVariant::kDeepEnsemble; }
  const ReferenceDistribution& reference() const override { return reference_; }
  std::size_t input_dim() const override { return particles_.front().input_dim(); }
  nn::Vector forward(const nn::Tensor2& input, const EpistemicIndex& z) override;
  nn::Vector predict(const nn::Tensor2& input, const EpistemicIndex& z) const override;
  nn::Tensor2 backward(const EpistemicIndex& z, const nn::Vector& upstream) override;
  std::vector<nn::ParameterStore*> trainable_stores() override;
  std::vector<const nn::ParameterStore*> all_stores() const override;

  std::size_t size() const { return particles_.size(); }
  nn::DenseNet& particle(std::size_t id) { return particles_.at(id - 1); }

 private:
  std::vector<nn::DenseNet> particles_;
  ReferenceDistribution reference_;
};

struct MarginalPrediction {
  nn::Vector mean;
  nn::Vector variance;
};

// Monte Carlo mean and (population) variance of sigmoid(f(x, z)) over
// `n_samples` fresh indices, per input row.
MarginalPrediction marginal_prediction(const EpistemicNet& net, const nn::Tensor2& input, std::size_t n_samples,
                                       nn::Rng& rng);

}  // namespace epinet_bandit::enn
