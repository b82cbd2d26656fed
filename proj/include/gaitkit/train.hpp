#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <utility>
#include <vector>

#include "gaitkit/augment.hpp"
#include "gaitkit/error.hpp"
#include "gaitkit/graph.hpp"
#include "gaitkit/model.hpp"
#include "gaitkit/rng.hpp"
#include "gaitkit/supcon.hpp"

namespace gaitkit {

struct LabeledSequence {
  std::int64_t label = 0;
  NormalizedSequence sequence;
};

using SequenceStore = std::vector<LabeledSequence>;

struct TrainConfig {
  std::size_t ids_per_batch = 8;
  std::size_t views_per_id = 2;
  std::size_t steps = 500;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double temperature = 0.01;
  std::uint64_t seed = 7;

  void validate() const {
    require(ids_per_batch >= 2, ErrorCode::ConfigError, "ids_per_batch must be >= 2");
    require(views_per_id == 2, ErrorCode::ConfigError, "views_per_id is fixed at 2");
    require(learning_rate >= 0.0, ErrorCode::ConfigError, "learning_rate must be >= 0");
    require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0, ErrorCode::ConfigError,
            "invalid optimizer hyperparameters");
    require(temperature > 0.0, ErrorCode::ConfigError, "temperature must be > 0");
  }
};

struct ViewPair {
  std::int64_t label = 0;
  NormalizedSequence view_a;
  NormalizedSequence view_b;
};

/// Distinct labels in ascending order, each with the store indices holding it.
inline std::map<std::int64_t, std::vector<std::size_t>> index_by_label(const SequenceStore& store) {
  std::map<std::int64_t, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < store.size(); ++i) by_label[store[i].label].push_back(i);
  return by_label;
}

/// P distinct identities drawn uniformly without replacement, each yielding
/// two augmented views of one of its sequences.
inline std::vector<ViewPair> sample_batch(const SequenceStore& store, std::size_t ids_per_batch,
                                          const AugmentConfig& aug, Rng& rng) {
  const auto by_label = index_by_label(store);
  if (by_label.size() < ids_per_batch) {
    fail(ErrorCode::InsufficientIdentities, "store has " + std::to_string(by_label.size()) +
                                                " identities, batch needs " + std::to_string(ids_per_batch));
  }
  std::vector<const std::pair<const std::int64_t, std::vector<std::size_t>>*> ids;
  for (const auto& entry : by_label) ids.push_back(&entry);
  // Partial Fisher-Yates: the first P slots end up uniform without replacement.
  for (std::size_t i = 0; i < ids_per_batch; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_int(ids.size() - i));
    std::swap(ids[i], ids[j]);
  }
  std::vector<ViewPair> batch;
  batch.reserve(ids_per_batch);
  for (std::size_t i = 0; i < ids_per_batch; ++i) {
    const auto& [label, members] = *ids[i];
    const auto pick = members[static_cast<std::size_t>(rng.uniform_int(members.size()))];
    auto [a, b] = make_views(store[pick].sequence, aug, rng);
    batch.push_back({label, std::move(a), std::move(b)});
  }
  return batch;
}

/// Adam with bias correction.
template <class S>
class Adam {
 public:
  Adam(const ModelParams<S>& like, const TrainConfig& cfg)
      : cfg_(cfg), m_(ModelParams<S>::zeros(like.config)), v_(ModelParams<S>::zeros(like.config)) {}

  void step(ModelParams<S>& params, const ModelParams<S>& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    auto p = tensors(params);
    auto g = tensors(grad);
    auto m = tensors(m_);
    auto v = tensors(v_);
    const auto b1 = static_cast<S>(cfg_.beta1);
    const auto b2 = static_cast<S>(cfg_.beta2);
    const auto lr = static_cast<S>(cfg_.learning_rate);
    const auto eps = static_cast<S>(cfg_.epsilon);
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i]->array() = b1 * m[i]->array() + (S(1) - b1) * g[i]->array();
      v[i]->array() = b2 * v[i]->array() + (S(1) - b2) * g[i]->array().square();
      p[i]->array() -= lr * (m[i]->array() / static_cast<S>(c1)) /
                       ((v[i]->array() / static_cast<S>(c2)).sqrt() + eps);
    }
  }

 private:
  template <class P>
  static auto tensors(P& params) {
    using Ptr = std::conditional_t<std::is_const_v<P>, const Mat<S>*, Mat<S>*>;
    std::vector<Ptr> out;
    for_each_tensor(params, [&](const std::string&, auto& m) { out.push_back(&m); });
    return out;
  }

  TrainConfig cfg_;
  ModelParams<S> m_;
  ModelParams<S> v_;
  std::uint64_t t_ = 0;
};

struct TrainResult {
  ModelParams<float> params;
  std::vector<double> loss_curve;
};

/// Loss and embedding gradient for one batch; the loss itself is evaluated in
/// 64-bit because logits reach 1/temperature.
inline LossResult<double> batch_loss(const Mat<float>& embeddings, const std::vector<std::int64_t>& labels,
                                     double temperature) {
  return supcon_loss<double>(embeddings.cast<double>(), labels, LossConfig{temperature});
}

inline BatchTensor to_batch(const std::vector<ViewPair>& pairs, std::vector<std::int64_t>& labels) {
  std::vector<NormalizedSequence> seqs;
  labels.clear();
  for (const auto& p : pairs) {
    seqs.push_back(p.view_a);
    seqs.push_back(p.view_b);
    labels.push_back(p.label);
    labels.push_back(p.label);
  }
  return BatchTensor::from_sequences(seqs);
}

/// Single-threaded and fully determined by (store, configs, seed).
inline TrainResult train(const SequenceStore& store, const GraphSpec& graph, const ModelConfig& model_cfg,
                         const AugmentConfig& aug, const TrainConfig& cfg,
                         const std::function<void(std::size_t, double)>& on_step = {}) {
  cfg.validate();
  aug.validate();
  require(aug.window_len == model_cfg.frames, ErrorCode::ConfigError, "augment window_len must equal model frames");
  TrainResult out{init_params<float>(model_cfg, cfg.seed), {}};
  Adam<float> opt(out.params, cfg);
  const Rng root(cfg.seed, 0x747261696eULL);
  std::vector<std::int64_t> labels;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    Rng rng = root.derive(step);
    const auto batch = to_batch(sample_batch(store, cfg.ids_per_batch, aug, rng), labels);
    const auto fwd = forward_with_cache(out.params, graph, batch);
    const auto loss = batch_loss(fwd.embeddings, labels, cfg.temperature);
    if (!std::isfinite(loss.loss)) {
      fail(ErrorCode::NonFiniteLoss, "loss became non-finite at step " + std::to_string(step));
    }
    const auto grad = backward(out.params, graph, fwd, Mat<float>(loss.grad.cast<float>()));
    opt.step(out.params, grad);
    out.loss_curve.push_back(loss.loss);
    if (on_step) on_step(step, loss.loss);
  }
  return out;
}

/// One unit-norm embedding per sequence, from its deterministic centre window.
template <class S>
Mat<S> embed_sequences(const ModelParams<S>& params, const GraphSpec& graph,
                       const std::vector<NormalizedSequence>& seqs, std::size_t chunk = 32) {
  Mat<S> out(static_cast<Eigen::Index>(seqs.size()), static_cast<Eigen::Index>(params.config.embedding_dim));
  for (std::size_t begin = 0; begin < seqs.size(); begin += chunk) {
    const std::size_t end = std::min(seqs.size(), begin + chunk);
    std::vector<NormalizedSequence> windows;
    for (std::size_t i = begin; i < end; ++i) windows.push_back(center_window(seqs[i], params.config.frames));
    out.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin)) =
        forward(params, graph, BatchTensor::from_sequences(windows));
  }
  return out;
}

template <class S>
Mat<S> embed_store(const ModelParams<S>& params, const GraphSpec& graph, const SequenceStore& store) {
  std::vector<NormalizedSequence> seqs;
  seqs.reserve(store.size());
  for (const auto& e : store) seqs.push_back(e.sequence);
  return embed_sequences(params, graph, seqs);
}

}  // namespace gaitkit
