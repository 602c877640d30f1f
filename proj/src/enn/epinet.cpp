#include "epinet_bandit/enn/epinet.h"

#include "epinet_bandit/errors.h"

namespace epinet_bandit::enn {
namespace {

std::vector<std::size_t> dims(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> d{in};
  d.insert(d.end(), hidden.begin(), hidden.end());
  d.push_back(out);
  return d;
}

void validate(const EpinetConfig& c) {
  if (c.input_dim == 0) throw ConfigError("epinet input_dim must be >= 1");
  if (c.index_dim == 0) throw ConfigError("epinet index_dim must be >= 1");
  if (!(c.prior_scale >= 0.0)) throw ConfigError("epinet prior_scale must be >= 0");
}

}  // namespace

EpinetHead::EpinetHead(const EpinetConfig& config, nn::Rng& init_rng)
    : config_((validate(config), config)),
      reference_(ReferenceDistribution::gaussian(config.index_dim)),
      base_("base_mlp", dims(config.input_dim, config.base_hidden, 1), init_rng),
      learnable_("epinet_learnable", dims(config.input_dim + config.index_dim, config.epinet_hidden, config.index_dim),
                 init_rng),
      prior_("epinet_prior", dims(config.input_dim + config.index_dim, config.epinet_hidden, config.index_dim),
             init_rng, /*trainable=*/false) {}

nn::Tensor2 EpinetHead::index_rows(const EpistemicIndex& z, Eigen::Index rows) const {
  reference_.check(z);
  const auto& v = std::get<GaussianIndex>(z).z;
  return v.transpose().replicate(rows, 1);
}

nn::Tensor2 EpinetHead::concat(const nn::Tensor2& input, const nn::Tensor2& indices) const {
  if (static_cast<std::size_t>(input.cols()) != config_.input_dim)
    throw ConfigError("epinet input has " + std::to_string(input.cols()) + " columns, expected " +
                      std::to_string(config_.input_dim));
  if (indices.rows() != input.rows() || static_cast<std::size_t>(indices.cols()) != config_.index_dim)
    throw ConfigError("epinet index rows do not match the input batch");
  nn::Tensor2 joined(input.rows(), input.cols() + indices.cols());
  joined << input, indices;
  return joined;
}

nn::Vector EpinetHead::forward(const nn::Tensor2& input, const EpistemicIndex& z) {
  return forward_rows(input, index_rows(z, input.rows()));
}

nn::Vector EpinetHead::predict(const nn::Tensor2& input, const EpistemicIndex& z) const {
  return predict_rows(input, index_rows(z, input.rows()));
}

nn::Tensor2 EpinetHead::backward(const EpistemicIndex& z, const nn::Vector& upstream) {
  reference_.check(z);
  return backward_rows(upstream);
}

nn::Vector EpinetHead::forward_rows(const nn::Tensor2& input, const nn::Tensor2& indices) {
  const nn::Tensor2 joined = concat(input, indices);
  nn::Vector out = base_.forward(input).col(0);
  out += learnable_.forward(joined).cwiseProduct(indices).rowwise().sum();
  if (config_.prior_scale != 0.0)
    out += config_.prior_scale * prior_.predict(joined).cwiseProduct(indices).rowwise().sum();
  cached_indices_ = indices;
  return out;
}

nn::Vector EpinetHead::predict_rows(const nn::Tensor2& input, const nn::Tensor2& indices) const {
  const nn::Tensor2 joined = concat(input, indices);
  nn::Vector out = base_.predict(input).col(0);
  out += learnable_.predict(joined).cwiseProduct(indices).rowwise().sum();
  if (config_.prior_scale != 0.0)
    out += config_.prior_scale * prior_.predict(joined).cwiseProduct(indices).rowwise().sum();
  return out;
}

nn::Tensor2 EpinetHead::backward_rows(const nn::Vector& upstream) {
  if (!base_.has_cache() || !learnable_.has_cache()) throw StateError("epinet backward called before forward");
  if (upstream.size() != cached_indices_.rows()) throw ConfigError("epinet upstream gradient has wrong length");
  base_.backward(nn::Tensor2(upstream));
  // d/d(mlp out)_j of out^T z is z_j.
  learnable_.backward(upstream.asDiagonal() * cached_indices_);
  return nn::Tensor2::Zero(upstream.size(), static_cast<Eigen::Index>(config_.input_dim));
}

nn::Vector EpinetHead::predict_from_input_projections(const nn::Tensor2& base_pre, const nn::Tensor2& learnable_pre,
                                                      const nn::Tensor2& prior_pre, const nn::Vector& z) const {
  if (static_cast<std::size_t>(z.size()) != config_.index_dim) throw ConfigError("epinet index has wrong dimension");
  const auto dz = static_cast<Eigen::Index>(config_.index_dim);

  nn::Tensor2 pre = base_pre;
  pre.rowwise() += base_.bias(0).row(0);
  nn::Vector out = base_.predict_from_first_preactivation(std::move(pre)).col(0);

  const auto head_term = [&](const nn::DenseNet& net, const nn::Tensor2& x_part) {
    // Index block of the first layer is shared by every row.
    nn::RowVector shift = z.transpose() * net.weight(0).bottomRows(dz);
    shift += net.bias(0).row(0);
    nn::Tensor2 first = x_part;
    first.rowwise() += shift;
    return nn::Vector(net.predict_from_first_preactivation(std::move(first)) * z);
  };
  out += head_term(learnable_, learnable_pre);
  if (config_.prior_scale != 0.0) out += config_.prior_scale * head_term(prior_, prior_pre);
  return out;
}

nn::Vector EpinetHead::learnable_term(const nn::Tensor2& input, const nn::Vector& z) const {
  const nn::Tensor2 rows = z.transpose().replicate(input.rows(), 1);
  return learnable_.predict(concat(input, rows)) * z;
}

nn::Vector EpinetHead::prior_term(const nn::Tensor2& input, const nn::Vector& z) const {
  const nn::Tensor2 rows = z.transpose().replicate(input.rows(), 1);
  return prior_.predict(concat(input, rows)) * z;
}

std::vector<nn::ParameterStore*> EpinetHead::trainable_stores() { return {&base_.params(), &learnable_.params()}; }

std::vector<const nn::ParameterStore*> EpinetHead::all_stores() const {
  return {&base_.params(), &learnable_.params(), &prior_.params()};
}

}  // namespace epinet_bandit::enn
