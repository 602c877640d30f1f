#include "epinet_bandit/enn/epistemic_net.h"

#include "epinet_bandit/errors.h"
#include "epinet_bandit/nn/loss.h"

namespace epinet_bandit::enn {
namespace {

nn::Vector as_logits(const nn::Tensor2& out) {
  if (out.cols() != 1) throw ConfigError("epistemic nets must have a scalar output");
  return out.col(0);
}

nn::Tensor2 as_column(const nn::Vector& v) { return nn::Tensor2(v); }

}  // namespace

const char* to_string(EnnVariant variant) {
  switch (variant) {
    case EnnVariant::kPointEstimate:
      return "point_estimate";
    case EnnVariant::kMcDropout:
      return "mc_dropout";
    case EnnVariant::kDeepEnsemble:
      return "deep_ensemble";
    case EnnVariant::kEpinet:
      return "epinet";
  }
  return "unknown";
}

void EpistemicNet::check_input(const nn::Tensor2& input) const {
  if (static_cast<std::size_t>(input.cols()) != input_dim())
    throw ConfigError("input has " + std::to_string(input.cols()) + " columns, expected " +
                      std::to_string(input_dim()));
}

// --- point estimate ---------------------------------------------------------

PointEstimateNet::PointEstimateNet(nn::DenseNet base) : base_(std::move(base)) {
  if (base_.output_dim() != 1) throw ConfigError("point estimate base net must have a scalar output");
}

nn::Vector PointEstimateNet::forward(const nn::Tensor2& input, const EpistemicIndex&) {
  check_input(input);
  return as_logits(base_.forward(input));
}

nn::Vector PointEstimateNet::predict(const nn::Tensor2& input, const EpistemicIndex&) const {
  check_input(input);
  return as_logits(base_.predict(input));
}

nn::Tensor2 PointEstimateNet::backward(const EpistemicIndex&, const nn::Vector& upstream) {
  return base_.backward(as_column(upstream));
}

// --- MC dropout -------------------------------------------------------------

McDropoutNet::McDropoutNet(nn::DenseNet base)
    : base_(std::move(base)), reference_(ReferenceDistribution::binary_mask(base_.input_dim())) {
  if (base_.output_dim() != 1) throw ConfigError("dropout base net must have a scalar output");
}

nn::Vector McDropoutNet::forward(const nn::Tensor2& input, const EpistemicIndex& z) {
  check_input(input);
  reference_.check(z);
  const auto& mask = std::get<MaskIndex>(z).mask;
  nn::Tensor2 masked = input * mask.asDiagonal();
  return as_logits(base_.forward(masked));
}

nn::Vector McDropoutNet::predict(const nn::Tensor2& input, const EpistemicIndex& z) const {
  check_input(input);
  reference_.check(z);
  const auto& mask = std::get<MaskIndex>(z).mask;
  nn::Tensor2 masked = input * mask.asDiagonal();
  return as_logits(base_.predict(masked));
}

nn::Tensor2 McDropoutNet::backward(const EpistemicIndex& z, const nn::Vector& upstream) {
  reference_.check(z);
  const auto& mask = std::get<MaskIndex>(z).mask;
  return base_.backward(as_column(upstream)) * mask.asDiagonal();
}

// --- deep ensemble ----------------------------------------------------------

DeepEnsembleNet::DeepEnsembleNet(std::vector<nn::DenseNet> particles)
    : particles_(std::move(particles)), reference_(ReferenceDistribution::discrete(particles_.size())) {
  if (particles_.empty()) throw ConfigError("deep ensemble needs at least one particle");
  for (const auto& p : particles_) {
    if (p.output_dim() != 1) throw ConfigError("ensemble particles must have a scalar output");
    if (p.input_dim() != particles_.front().input_dim())
      throw ConfigError("ensemble particles must share an input dimension");
  }
}

nn::Vector DeepEnsembleNet::forward(const nn::Tensor2& input, const EpistemicIndex& z) {
  check_input(input);
  reference_.check(z);
  return as_logits(particle(std::get<ParticleIndex>(z).id).forward(input));
}

nn::Vector DeepEnsembleNet::predict(const nn::Tensor2& input, const EpistemicIndex& z) const {
  check_input(input);
  reference_.check(z);
  return as_logits(particles_[std::get<ParticleIndex>(z).id - 1].predict(input));
}

nn::Tensor2 DeepEnsembleNet::backward(const EpistemicIndex& z, const nn::Vector& upstream) {
  reference_.check(z);
  return particle(std::get<ParticleIndex>(z).id).backward(as_column(upstream));
}

std::vector<nn::ParameterStore*> DeepEnsembleNet::trainable_stores() {
  std::vector<nn::ParameterStore*> out;
  for (auto& p : particles_) out.push_back(&p.params());
  return out;
}

std::vector<const nn::ParameterStore*> DeepEnsembleNet::all_stores() const {
  std::vector<const nn::ParameterStore*> out;
  for (const auto& p : particles_) out.push_back(&p.params());
  return out;
}

// --- marginal prediction ----------------------------------------------------

MarginalPrediction marginal_prediction(const EpistemicNet& net, const nn::Tensor2& input, std::size_t n_samples,
                                       nn::Rng& rng) {
  if (n_samples == 0) throw ConfigError("marginal_prediction needs n_samples >= 1");
  const Eigen::Index rows = input.rows();
  nn::Vector mean = nn::Vector::Zero(rows);
  nn::Vector m2 = nn::Vector::Zero(rows);
  // Welford: identical samples give exactly zero variance.
  for (std::size_t s = 0; s < n_samples; ++s) {
    const auto z = net.reference().sample(rng);
    const nn::Vector logits = net.predict(input, z);
    const double count = static_cast<double>(s + 1);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double p = nn::sigmoid(logits[r]);
      if (s == 0) {
        mean[r] = p;
        continue;
      }
      const double delta = p - mean[r];
      mean[r] += delta / count;
      m2[r] += delta * (p - mean[r]);
    }
  }
  return {mean, m2 / static_cast<double>(n_samples)};
}

}  // namespace epinet_bandit::enn
