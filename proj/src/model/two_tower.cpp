#include "epinet_bandit/model/two_tower.h"

#include <cmath>

#include "epinet_bandit/errors.h"
#include "epinet_bandit/nn/loss.h"

namespace epinet_bandit::model {
namespace {

std::vector<std::size_t> tower_dims(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> d{in};
  d.insert(d.end(), hidden.begin(), hidden.end());
  d.push_back(out);
  return d;
}

void check_batch(const TwoTowerModel& towers, const Batch& batch) {
  const auto rows = batch.user_features.rows();
  if (batch.item_features.rows() != rows || batch.labels.rows() != rows)
    throw ConfigError("batch parts have different row counts");
  if (static_cast<std::size_t>(batch.labels.cols()) != towers.num_tasks())
    throw ConfigError("batch labels must have one column per task");
  if (rows == 0) throw ConfigError("empty batch");
  if ((batch.labels.array() < 0.0).any() || (batch.labels.array() > 1.0).any())
    throw ConfigError("labels must lie in [0, 1]");
}

// x * W restricted to the x-block of W, computed from the embeddings without
// materialising x. `w` has at least d*(2K+1) rows; only those are used.
nn::Tensor2 project_overarch(const nn::Vector& user_flat, const nn::Tensor2& items, const nn::Tensor2& w,
                             std::size_t d, std::size_t k_tasks) {
  const auto dd = static_cast<Eigen::Index>(d);
  const auto dk = static_cast<Eigen::Index>(d * k_tasks);
  nn::Tensor2 effective = w.middleRows(dk, dd);
  for (std::size_t k = 0; k < k_tasks; ++k) {
    const auto uk = user_flat.segment(static_cast<Eigen::Index>(k) * dd, dd);
    effective.noalias() += uk.asDiagonal() * w.middleRows(dk + dd + static_cast<Eigen::Index>(k) * dd, dd);
  }
  const nn::RowVector shared = user_flat.transpose() * w.topRows(dk);
  nn::Tensor2 out;
  out.noalias() = items * effective;
  out.rowwise() += shared;
  return out;
}

}  // namespace

const char* to_string(Task task) {
  switch (task) {
    case Task::kWs:
      return "ws";
    case Task::kLike:
      return "like";
    case Task::kShare:
      return "share";
    case Task::kVvs:
      return "vvs";
  }
  return "unknown";
}

Task task_from_string(std::string_view name) {
  if (name == "ws") return Task::kWs;
  if (name == "like") return Task::kLike;
  if (name == "share") return Task::kShare;
  if (name == "vvs") return Task::kVvs;
  throw ConfigError("unknown task '" + std::string(name) + "' (expected ws, like, share or vvs)");
}

nn::Vector build_overarch_input(const nn::Tensor2& user_embeddings, const nn::Vector& item_embedding) {
  const auto d = user_embeddings.rows();
  const auto k_tasks = user_embeddings.cols();
  if (item_embedding.size() != d)
    throw ConfigError("item embedding has dimension " + std::to_string(item_embedding.size()) + ", user embeddings " +
                      std::to_string(d));
  nn::Vector x(d * (2 * k_tasks + 1));
  for (Eigen::Index k = 0; k < k_tasks; ++k) {
    x.segment(k * d, d) = user_embeddings.col(k);
    x.segment((k_tasks + 1 + k) * d, d) = item_embedding.cwiseProduct(user_embeddings.col(k));
  }
  x.segment(k_tasks * d, d) = item_embedding;
  return x;
}

nn::Tensor2 build_overarch_inputs(const nn::Tensor2& user_flat, const nn::Tensor2& items, std::size_t num_tasks) {
  const auto d = items.cols();
  const auto k_tasks = static_cast<Eigen::Index>(num_tasks);
  if (user_flat.cols() != d * k_tasks || user_flat.rows() != items.rows())
    throw ConfigError("user and item embedding batches are inconsistent");
  nn::Tensor2 x(items.rows(), d * (2 * k_tasks + 1));
  x.leftCols(d * k_tasks) = user_flat;
  x.middleCols(d * k_tasks, d) = items;
  for (Eigen::Index k = 0; k < k_tasks; ++k)
    x.middleCols((k_tasks + 1 + k) * d, d) = items.cwiseProduct(user_flat.middleCols(k * d, d));
  return x;
}

nn::Vector embedding_logits(const nn::Tensor2& user_embeddings, const nn::Vector& item_embedding) {
  if (item_embedding.size() != user_embeddings.rows())
    throw ConfigError("item embedding and user embeddings disagree on d");
  return user_embeddings.transpose() * item_embedding;
}

// --- towers -----------------------------------------------------------------

TwoTowerModel::TwoTowerModel(const TowerConfig& config, nn::Rng& init_rng, const std::string& name_prefix)
    : config_(config),
      user_(name_prefix + "user_tower", tower_dims(config.user_feature_dim, config.hidden, config.embedding_dim * config.num_tasks),
            init_rng),
      item_(name_prefix + "item_tower", tower_dims(config.item_feature_dim, config.hidden, config.embedding_dim), init_rng) {
  if (config.num_tasks == 0 || config.embedding_dim == 0) throw ConfigError("embedding_dim and num_tasks must be >= 1");
}

nn::Tensor2 TwoTowerModel::user_embedding_matrix(const nn::Vector& user_features) const {
  const nn::RowVector flat = user_.predict(user_features.transpose()).row(0);
  const auto d = static_cast<Eigen::Index>(config_.embedding_dim);
  nn::Tensor2 m(d, static_cast<Eigen::Index>(config_.num_tasks));
  for (Eigen::Index k = 0; k < m.cols(); ++k) m.col(k) = flat.segment(k * d, d).transpose();
  return m;
}

EmbeddingPass embedding_loss_and_grads(TwoTowerModel& towers, const Batch& batch) {
  check_batch(towers, batch);
  const auto rows = batch.user_features.rows();
  const auto d = static_cast<Eigen::Index>(towers.embedding_dim());
  const auto k_tasks = static_cast<Eigen::Index>(towers.num_tasks());
  const double inv_rows = 1.0 / static_cast<double>(rows);

  EmbeddingPass pass;
  pass.user_flat = towers.user_tower().forward(batch.user_features);
  pass.items = towers.item_tower().forward(batch.item_features);

  nn::Tensor2 d_user = nn::Tensor2::Zero(rows, d * k_tasks);
  nn::Tensor2 d_item = nn::Tensor2::Zero(rows, d);
  for (Eigen::Index b = 0; b < rows; ++b) {
    for (Eigen::Index k = 0; k < k_tasks; ++k) {
      const auto uk = pass.user_flat.row(b).segment(k * d, d);
      const double logit = uk.dot(pass.items.row(b));
      const auto bce = nn::bce_with_logit(batch.labels(b, k), logit);
      pass.loss += bce.loss * inv_rows;
      const double g = bce.dloss_dlogit * inv_rows;
      d_user.row(b).segment(k * d, d) += g * pass.items.row(b);
      d_item.row(b) += g * uk;
    }
  }
  towers.user_tower().backward(d_user);
  towers.item_tower().backward(d_item);
  return pass;
}

// --- treatment --------------------------------------------------------------

EpinetRecommender::EpinetRecommender(const TowerConfig& towers, const enn::EpinetConfig& head, Task epinet_task,
                                     nn::Rng& init_rng)
    : towers_(towers, init_rng),
      head_(
          [&] {
            enn::EpinetConfig c = head;
            c.input_dim = towers.embedding_dim * (2 * towers.num_tasks + 1);
            return c;
          }(),
          init_rng),
      epinet_task_(epinet_task) {
  if (static_cast<std::size_t>(epinet_task) >= towers.num_tasks)
    throw ConfigError("epinet task is outside the configured task set");
}

LossBreakdown EpinetRecommender::total_loss(const Batch& batch, const nn::Tensor2& indices) {
  const auto rows = batch.user_features.rows();
  if (static_cast<std::size_t>(indices.cols()) != head_.index_dim() || (indices.rows() != 1 && indices.rows() != rows))
    throw ConfigError("indices must be 1 x d_z or B x d_z");

  LossBreakdown out;
  const EmbeddingPass pass = embedding_loss_and_grads(towers_, batch);
  out.embedding = pass.loss;

  // sg[x]: x is built from the embeddings as plain values.
  const nn::Tensor2 x = build_overarch_inputs(pass.user_flat, pass.items, towers_.num_tasks());
  const nn::Tensor2 z_rows = indices.rows() == rows ? indices : nn::Tensor2(indices.replicate(rows, 1));
  const nn::Vector logits = head_.forward_rows(x, z_rows);
  const double inv_rows = 1.0 / static_cast<double>(rows);
  nn::Vector upstream(rows);
  const auto task = static_cast<Eigen::Index>(epinet_task_);
  for (Eigen::Index b = 0; b < rows; ++b) {
    const auto bce = nn::bce_with_logit(batch.labels(b, task), logits[b]);
    out.epinet += bce.loss * inv_rows;
    upstream[b] = bce.dloss_dlogit * inv_rows;
  }
  head_.backward_rows(upstream);
  out.total = out.embedding + out.epinet;
  if (!std::isfinite(out.total))
    throw NumericalError("non-finite training loss (embedding " + std::to_string(out.embedding) + ", epinet " +
                         std::to_string(out.epinet) + ")");
  return out;
}

nn::Vector EpinetRecommender::score_items(const nn::Vector& user_features, const nn::Tensor2& item_features,
                                          const nn::Vector& z) const {
  const nn::Vector user_flat = towers_.user_tower().predict(user_features.transpose()).row(0).transpose();
  const nn::Tensor2 items = towers_.item_tower().predict(item_features);
  const std::size_t d = towers_.embedding_dim();
  const std::size_t k_tasks = towers_.num_tasks();
  const auto base_pre = project_overarch(user_flat, items, head_.base_mlp().weight(0), d, k_tasks);
  const auto learn_pre = project_overarch(user_flat, items, head_.learnable_net().weight(0), d, k_tasks);
  nn::Tensor2 prior_pre;
  if (head_.prior_scale() != 0.0) prior_pre = project_overarch(user_flat, items, head_.prior_net().weight(0), d, k_tasks);
  return head_.predict_from_input_projections(base_pre, learn_pre, prior_pre, z);
}

nn::Vector EpinetRecommender::score_items_reference(const nn::Vector& user_features, const nn::Tensor2& item_features,
                                                    const nn::Vector& z) const {
  const nn::RowVector user_flat = towers_.user_tower().predict(user_features.transpose()).row(0);
  const nn::Tensor2 items = towers_.item_tower().predict(item_features);
  const nn::Tensor2 users = user_flat.replicate(items.rows(), 1);
  const nn::Tensor2 x = build_overarch_inputs(users, items, towers_.num_tasks());
  return head_.predict(x, enn::GaussianIndex{z});
}

std::vector<nn::ParameterStore*> EpinetRecommender::trainable_stores() {
  auto out = towers_.stores();
  for (auto* s : head_.trainable_stores()) out.push_back(s);
  return out;
}

std::vector<const nn::ParameterStore*> EpinetRecommender::all_stores() const {
  auto out = towers_.stores();
  for (const auto* s : head_.all_stores()) out.push_back(s);
  return out;
}

// --- control ----------------------------------------------------------------

PointEstimateRecommender::PointEstimateRecommender(const TowerConfig& towers, std::array<double, kNumTasks> task_weights,
                                                   nn::Rng& init_rng, const std::string& name_prefix)
    : towers_(towers, init_rng, name_prefix), weights_(task_weights) {
  if (towers.num_tasks != kNumTasks) throw ConfigError("control model expects the four standard tasks");
}

LossBreakdown PointEstimateRecommender::total_loss(const Batch& batch) {
  LossBreakdown out;
  out.embedding = embedding_loss_and_grads(towers_, batch).loss;
  out.total = out.embedding;
  if (!std::isfinite(out.total)) throw NumericalError("non-finite embedding loss");
  return out;
}

nn::Vector PointEstimateRecommender::score_items(const nn::Vector& user_features,
                                                 const nn::Tensor2& item_features) const {
  const nn::RowVector user_flat = towers_.user_tower().predict(user_features.transpose()).row(0);
  const nn::Tensor2 items = towers_.item_tower().predict(item_features);
  const auto d = static_cast<Eigen::Index>(towers_.embedding_dim());
  nn::Vector scores = nn::Vector::Zero(items.rows());
  for (std::size_t k = 0; k < kNumTasks; ++k) {
    if (weights_[k] == 0.0) continue;
    const nn::Vector logits = items * user_flat.segment(static_cast<Eigen::Index>(k) * d, d).transpose();
    for (Eigen::Index a = 0; a < scores.size(); ++a) scores[a] += weights_[k] * nn::sigmoid(logits[a]);
  }
  return scores;
}

}  // namespace epinet_bandit::model
