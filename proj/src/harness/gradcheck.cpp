#include "epinet_bandit/harness/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "epinet_bandit/enn/epinet.h"
#include "epinet_bandit/model/two_tower.h"
#include "epinet_bandit/nn/dense_net.h"
#include "epinet_bandit/nn/loss.h"
#include "epinet_bandit/nn/rng.h"

namespace epinet_bandit::harness {
namespace {

nn::Tensor2 random_matrix(nn::Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  nn::Tensor2 m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

nn::Tensor2 random_labels(nn::Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  nn::Tensor2 m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
  return m;
}

double mean_bce(const nn::Vector& logits, const nn::Vector& labels, nn::Vector* grad) {
  double loss = 0.0;
  const auto n = static_cast<double>(logits.size());
  if (grad) grad->resize(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const auto r = nn::bce_with_logit(labels[i], logits[i]);
    loss += r.loss / n;
    if (grad) (*grad)[i] = r.dloss_dlogit / n;
  }
  return loss;
}

void zero_all(const std::vector<nn::ParameterStore*>& stores) {
  for (auto* s : stores) s->zero_grads();
}

void check_dense_nets(const GradcheckOptions& options, nn::Rng& rng, std::vector<TensorCheck>& out) {
  // Scalar head trained with BCE.
  {
    nn::DenseNet net("dense_bce", {6, 8, 5, 1}, rng);
    const nn::Tensor2 x = random_matrix(rng, 4, 6);
    const nn::Vector y = random_labels(rng, 4, 1).col(0);
    const auto loss = [&] { return mean_bce(net.predict(x).col(0), y, nullptr); };
    net.params().zero_grads();
    nn::Vector g;
    mean_bce(net.forward(x).col(0), y, &g);
    net.backward(g);
    const auto r = check_gradients("nn_core", {&net.params()}, loss, options);
    out.insert(out.end(), r.begin(), r.end());
  }
  // Multi-output net under a fixed linear readout.
  {
    nn::DenseNet net("dense_linear", {5, 7, 3}, rng);
    const nn::Tensor2 x = random_matrix(rng, 3, 5);
    const nn::Tensor2 c = random_matrix(rng, 3, 3);
    const auto loss = [&] { return net.predict(x).cwiseProduct(c).sum(); };
    net.params().zero_grads();
    net.forward(x);
    net.backward(c);
    const auto r = check_gradients("nn_core", {&net.params()}, loss, options);
    out.insert(out.end(), r.begin(), r.end());
  }
}

void check_epinet_head(const GradcheckOptions& options, nn::Rng& rng, std::vector<TensorCheck>& out) {
  enn::EpinetConfig cfg;
  cfg.input_dim = 7;
  cfg.base_hidden = {8, 6};
  cfg.epinet_hidden = {8, 6};
  cfg.index_dim = 3;
  cfg.prior_scale = 1.0;
  enn::EpinetHead head(cfg, rng);
  const nn::Tensor2 x = random_matrix(rng, 5, 7);
  const nn::Vector y = random_labels(rng, 5, 1).col(0);

  // Shared index.
  {
    const enn::GaussianIndex z{random_matrix(rng, 3, 1).col(0)};
    const auto loss = [&] { return mean_bce(head.predict(x, z), y, nullptr); };
    zero_all(head.trainable_stores());
    nn::Vector g;
    mean_bce(head.forward(x, z), y, &g);
    head.backward(z, g);
    auto r = check_gradients("enn", head.trainable_stores(), loss, options);
    out.insert(out.end(), r.begin(), r.end());
  }
  // One index per row.
  {
    const nn::Tensor2 indices = random_matrix(rng, 5, 3);
    const auto loss = [&] { return mean_bce(head.predict_rows(x, indices), y, nullptr); };
    zero_all(head.trainable_stores());
    nn::Vector g;
    mean_bce(head.forward_rows(x, indices), y, &g);
    head.backward_rows(g);
    auto r = check_gradients("enn/per_row_index", head.trainable_stores(), loss, options);
    out.insert(out.end(), r.begin(), r.end());
  }
  // The frozen prior must receive nothing.
  TensorCheck prior{"enn", "epinet_prior (frozen, zero gradient)", 0, 0.0, 0.0, true};
  for (const auto& p : head.prior_net().params()) {
    prior.count += static_cast<std::size_t>(p.grad.size());
    prior.max_abs_error = std::max(prior.max_abs_error, p.grad.cwiseAbs().maxCoeff());
    if (p.trainable) prior.passed = false;
  }
  prior.passed = prior.passed && prior.max_abs_error == 0.0;
  out.push_back(prior);
}

void check_full_model(const GradcheckOptions& options, nn::Rng& rng, std::vector<TensorCheck>& out) {
  model::TowerConfig towers;
  towers.user_feature_dim = 5;
  towers.item_feature_dim = 6;
  towers.embedding_dim = 4;
  towers.num_tasks = 2;
  towers.hidden = {8};
  enn::EpinetConfig head;
  head.input_dim = model::overarch_input_dim(towers.embedding_dim, towers.num_tasks);
  head.base_hidden = {8, 6};
  head.epinet_hidden = {8, 6};
  head.index_dim = 3;
  model::EpinetRecommender rec(towers, head, model::Task::kWs, rng);

  model::Batch batch;
  batch.user_features = random_matrix(rng, 6, 5);
  batch.item_features = random_matrix(rng, 6, 6);
  batch.labels = random_labels(rng, 6, 2);
  const nn::Tensor2 z = random_matrix(rng, 1, 3);

  zero_all(rec.trainable_stores());
  rec.total_loss(batch, z);

  // The overarch input is a stop-gradient constant: towers are checked
  // against the embedding loss, the head against the total loss with the
  // towers held fixed.
  auto& tw = rec.towers();
  const auto tower_loss = [&] {
    model::TwoTowerModel copy = tw;
    return model::embedding_loss_and_grads(copy, batch).loss;
  };
  const auto head_loss = [&] {
    model::EpinetRecommender copy = rec;
    return copy.total_loss(batch, z).total;
  };
  auto r = check_gradients("retrieval_model", tw.stores(), tower_loss, options);
  out.insert(out.end(), r.begin(), r.end());
  r = check_gradients("retrieval_model", rec.head().trainable_stores(), head_loss, options);
  out.insert(out.end(), r.begin(), r.end());

  // Per-row indices through the full model.
  const nn::Tensor2 zs = random_matrix(rng, 6, 3);
  zero_all(rec.trainable_stores());
  rec.total_loss(batch, zs);
  const auto head_loss_rows = [&] {
    model::EpinetRecommender copy = rec;
    return copy.total_loss(batch, zs).total;
  };
  r = check_gradients("retrieval_model/per_row_index", rec.head().trainable_stores(), head_loss_rows, options);
  out.insert(out.end(), r.begin(), r.end());

  // Control model; it always scores the four standard tasks.
  model::TowerConfig control_towers = towers;
  control_towers.num_tasks = model::kNumTasks;
  model::PointEstimateRecommender control(control_towers, {0.4, 0.3, 0.2, 0.1}, rng, "control/");
  model::Batch control_batch = batch;
  control_batch.labels = random_labels(rng, 6, model::kNumTasks);
  zero_all(control.trainable_stores());
  control.total_loss(control_batch);
  const auto control_loss = [&] {
    model::PointEstimateRecommender copy = control;
    return copy.total_loss(control_batch).total;
  };
  r = check_gradients("retrieval_model/control", control.trainable_stores(), control_loss, options);
  out.insert(out.end(), r.begin(), r.end());
}

}  // namespace

std::vector<TensorCheck> check_gradients(const std::string& component, const std::vector<nn::ParameterStore*>& stores,
                                         const std::function<double()>& loss, const GradcheckOptions& options) {
  std::vector<TensorCheck> out;
  for (auto* store : stores) {
    for (auto& p : *store) {
      if (!p.trainable) continue;
      nn::Tensor2 analytic = p.grad;
      if (!options.inject_fault.empty() && p.name.find(options.inject_fault) != std::string::npos)
        analytic.data()[0] += 1e-3 + std::abs(analytic.data()[0]);
      TensorCheck check{component, p.name, static_cast<std::size_t>(p.value.size()), 0.0, 0.0, true};
      for (Eigen::Index i = 0; i < p.value.size(); ++i) {
        const double original = p.value.data()[i];
        p.value.data()[i] = original + options.step;
        const double plus = loss();
        p.value.data()[i] = original - options.step;
        const double minus = loss();
        p.value.data()[i] = original;
        const double numeric = (plus - minus) / (2.0 * options.step);
        const double a = analytic.data()[i];
        const double abs_err = std::abs(a - numeric);
        const double scale = std::max(std::abs(a), std::abs(numeric));
        const double rel_err = scale > 0.0 ? abs_err / scale : 0.0;
        check.max_abs_error = std::max(check.max_abs_error, abs_err);
        if (scale > options.abs_floor) check.max_rel_error = std::max(check.max_rel_error, rel_err);
        if (!(rel_err < options.rel_tolerance || abs_err <= options.abs_floor)) check.passed = false;
      }
      out.push_back(std::move(check));
    }
  }
  return out;
}

bool GradcheckReport::passed() const {
  return !tensors.empty() && std::all_of(tensors.begin(), tensors.end(), [](const auto& t) { return t.passed; });
}

std::string GradcheckReport::format() const {
  std::string out;
  char buf[256];
  for (const auto& t : tensors) {
    std::snprintf(buf, sizeof(buf), "%-4s %-30s %-42s n=%-5zu rel=%.3e abs=%.3e\n", t.passed ? "ok" : "FAIL",
                  t.component.c_str(), t.parameter.c_str(), t.count, t.max_rel_error, t.max_abs_error);
    out += buf;
  }
  return out;
}

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  nn::Rng rng = nn::Rng::stream(options.seed, "gradcheck");
  GradcheckReport report;
  check_dense_nets(options, rng, report.tensors);
  check_epinet_head(options, rng, report.tensors);
  check_full_model(options, rng, report.tensors);
  return report;
}

}  // namespace epinet_bandit::harness
