#pragma once

#include <variant>

#include "epinet_bandit/nn/rng.h"
#include "epinet_bandit/nn/tensor.h"

namespace epinet_bandit::enn {

// z ~ N(0, I) of dimension index_dim.
struct GaussianIndex {
  nn::Vector z;
};
// Input mask in {0,1}^d.
struct MaskIndex {
  nn::Vector mask;
};
// Ensemble particle, 1-based.
struct ParticleIndex {
  int id = 1;
};

using EpistemicIndex = std::variant<GaussianIndex, MaskIndex, ParticleIndex>;

enum class IndexKind { kGaussian, kBinaryMask, kDiscrete };

// The distribution P_Z epistemic indices are drawn from.
class ReferenceDistribution {
 public:
  static ReferenceDistribution gaussian(std::size_t dim) { return {IndexKind::kGaussian, dim}; }
  static ReferenceDistribution binary_mask(std::size_t dim) { return {IndexKind::kBinaryMask, dim}; }
  static ReferenceDistribution discrete(std::size_t count) { return {IndexKind::kDiscrete, count}; }

  IndexKind kind() const { return kind_; }
  // Vector length for gaussian/mask, particle count for discrete.
  std::size_t dim() const { return dim_; }

  EpistemicIndex sample(nn::Rng& rng) const;
  bool accepts(const EpistemicIndex& z) const;
  // Throws ConfigError if `z` could not have been drawn from this distribution.
  void check(const EpistemicIndex& z) const;

 private:
  ReferenceDistribution(IndexKind kind, std::size_t dim) : kind_(kind), dim_(dim) {}

  IndexKind kind_;
  std::size_t dim_;
};

}  // namespace epinet_bandit::enn
