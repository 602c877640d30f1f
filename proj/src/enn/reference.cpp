#include "epinet_bandit/enn/reference.h"

#include "epinet_bandit/errors.h"

namespace epinet_bandit::enn {

EpistemicIndex ReferenceDistribution::sample(nn::Rng& rng) const {
  switch (kind_) {
    case IndexKind::kGaussian: {
      nn::Vector z(dim_);
      for (std::size_t i = 0; i < dim_; ++i) z[i] = rng.normal();
      return GaussianIndex{std::move(z)};
    }
    case IndexKind::kBinaryMask: {
      nn::Vector mask(dim_);
      for (std::size_t i = 0; i < dim_; ++i) mask[i] = static_cast<double>(rng() >> 63);
      return MaskIndex{std::move(mask)};
    }
    case IndexKind::kDiscrete:
      return ParticleIndex{static_cast<int>(rng.uniform_index(dim_)) + 1};
  }
  throw ConfigError("unknown reference distribution");
}

bool ReferenceDistribution::accepts(const EpistemicIndex& z) const {
  switch (kind_) {
    case IndexKind::kGaussian: {
      const auto* g = std::get_if<GaussianIndex>(&z);
      return g != nullptr && static_cast<std::size_t>(g->z.size()) == dim_;
    }
    case IndexKind::kBinaryMask: {
      const auto* m = std::get_if<MaskIndex>(&z);
      if (m == nullptr || static_cast<std::size_t>(m->mask.size()) != dim_) return false;
      return ((m->mask.array() == 0.0) || (m->mask.array() == 1.0)).all();
    }
    case IndexKind::kDiscrete: {
      const auto* p = std::get_if<ParticleIndex>(&z);
      return p != nullptr && p->id >= 1 && static_cast<std::size_t>(p->id) <= dim_;
    }
  }
  return false;
}

void ReferenceDistribution::check(const EpistemicIndex& z) const {
  if (!accepts(z)) throw ConfigError("epistemic index does not match the network's reference distribution");
}

}  // namespace epinet_bandit::enn
