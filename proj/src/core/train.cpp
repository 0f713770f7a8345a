#include "core/train.hpp"

#include <cmath>
#include <numeric>

#include "core/rng.hpp"

namespace vggft {

void validate_train_config(const TrainConfig& c) {
  if (c.learning_rate <= 0.0) fail(ErrorCode::Config, "learning rate must be positive");
  if (c.batch_size < 1) fail(ErrorCode::Config, "batch size must be >= 1");
  if (c.epochs < 1) fail(ErrorCode::Config, "epoch count must be >= 1");
  if (c.beta1 < 0.0 || c.beta1 >= 1.0 || c.beta2 < 0.0 || c.beta2 >= 1.0)
    fail(ErrorCode::Config, "Adam betas must be in [0,1)");
  if (c.epsilon <= 0.0) fail(ErrorCode::Config, "Adam epsilon must be positive");
}

AdamState make_adam_state(const WeightStore& store) {
  AdamState state;
  state.slots.resize(store.entries.size());
  for (size_t i = 0; i < store.entries.size(); ++i) {
    const auto& e = store.entries[i];
    if (e.frozen) continue;
    state.slots[i].m_weights = Tensor(e.weights.shape);
    state.slots[i].v_weights = Tensor(e.weights.shape);
    state.slots[i].m_bias = Tensor(e.bias.shape);
    state.slots[i].v_bias = Tensor(e.bias.shape);
  }
  return state;
}

void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, int64_t t,
                 const TrainConfig& c) {
  if (!same_shape(param, grad) || !same_shape(param, m) || !same_shape(param, v))
    fail(ErrorCode::Dimension, "adam: parameter/gradient/state shapes disagree");
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  for (size_t i = 0; i < param.size(); ++i) {
    const double g = grad.data[i];
    const double mi = c.beta1 * m.data[i] + (1.0 - c.beta1) * g;
    const double vi = c.beta2 * v.data[i] + (1.0 - c.beta2) * g * g;
    m.data[i] = static_cast<float>(mi);
    v.data[i] = static_cast<float>(vi);
    const double mhat = mi / bc1;
    const double vhat = vi / bc2;
    param.data[i] =
        static_cast<float>(param.data[i] - c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon));
  }
}

void adam_step(WeightStore& store, const GradStore& grads, AdamState& state,
               const TrainConfig& config) {
  if (state.slots.size() != store.entries.size())
    fail(ErrorCode::Dimension, "adam: state does not match the weight store");
  ++state.step;
  for (size_t i = 0; i < store.entries.size(); ++i) {
    auto& e = store.entries[i];
    if (e.frozen || grads.weights[i].data.empty()) continue;
    adam_update(e.weights, grads.weights[i], state.slots[i].m_weights, state.slots[i].v_weights,
                state.step, config);
    adam_update(e.bias, grads.bias[i], state.slots[i].m_bias, state.slots[i].v_bias, state.step,
                config);
  }
}

namespace {

Tensor one_hot(int label, int k) {
  Tensor t({1, k});
  if (label < 0 || label >= k)
    fail(ErrorCode::Input, "label " + std::to_string(label) + " outside " + std::to_string(k) +
                               " classes");
  t.data[static_cast<size_t>(label)] = 1.0f;
  return t;
}

Tensor as_batch1(const Tensor& image) {
  return Tensor({1, image.dim(0), image.dim(1), image.dim(2)}, image.data);
}

struct EvalStats {
  double mean_loss = 0.0;
  double accuracy = 0.0;
  std::vector<int> predicted;
};

// Flatten activations per sample, computed once when the conv stack is
// frozen and inputs are not augmented. The resumed head pass is bit-identical
// to running the whole graph: nothing below flatten is stochastic.
struct FeatureCache {
  bool enabled = false;
  size_t resume_layer = 0;  // first layer after flatten
  std::vector<Tensor> features;

  void build(const ModelGraph& graph, const WeightStore& store, const SampleSource& src) {
    const size_t fi = flatten_index(graph);
    resume_layer = fi + 1;
    features.clear();
    features.reserve(src.size());
    for (size_t i = 0; i < src.size(); ++i) {
      const Tensor img = src.image(i);
      features.push_back(
          forward_range(graph, store, as_batch1(img), 0, fi + 1, RunMode::Inference));
    }
    enabled = true;
  }
};

// Inference pass over a source; optionally augments samples the way the
// training protocol does (used for validation).
EvalStats eval_pass(const ModelGraph& graph, const WeightStore& store, const SampleSource& src,
                    const AugmentConfig* augment, uint64_t seed, uint64_t epoch,
                    const FeatureCache* cache = nullptr) {
  const int k = graph.output_classes();
  EvalStats stats;
  double total_loss = 0.0;
  int64_t correct = 0;
  for (size_t i = 0; i < src.size(); ++i) {
    ForwardTrace trace;
    if (cache && cache->enabled) {
      forward_range(graph, store, cache->features[i], cache->resume_layer, graph.layers.size(),
                    RunMode::Inference, &trace);
    } else {
      Tensor img = src.image(i);
      if (augment) {
        Rng rng(augment_stream_seed(seed, src.id(i), epoch));
        img = augment_image(img, *augment, rng);
      }
      forward_pass(graph, store, as_batch1(img), RunMode::Inference, &trace);
    }
    const Tensor labels = one_hot(src.label(i), k);
    const double loss = graph.task == Task::Binary
                            ? sigmoid_bce_forward(trace.logits, labels).loss
                            : softmax_xent_forward(trace.logits, labels).loss;
    total_loss += loss;
    int best = 0;
    for (int j = 1; j < k; ++j)
      if (trace.probs.at2(0, j) > trace.probs.at2(0, best)) best = j;
    stats.predicted.push_back(best);
    if (best == src.label(i)) ++correct;
  }
  stats.mean_loss = total_loss / static_cast<double>(src.size());
  stats.accuracy = static_cast<double>(correct) / static_cast<double>(src.size());
  return stats;
}

}  // namespace

std::vector<EpochReport> fit(const ModelGraph& graph, WeightStore& store,
                             const SampleSource& train, const SampleSource* validation,
                             const TrainConfig& config, const AugmentConfig& augment,
                             const EpochCallback& on_epoch) {
  validate_train_config(config);
  if (!graph.head_attached) fail(ErrorCode::State, "fit: attach the head before training");
  if (train.size() == 0) fail(ErrorCode::Input, "fit: training split is empty");
  if (validation && validation->size() == 0)
    fail(ErrorCode::Input, "fit: validation split is empty");

  sync_frozen_flags(graph, store);
  bool any_trainable = false;
  for (const auto& e : store.entries) any_trainable |= !e.frozen;
  if (!any_trainable) fail(ErrorCode::Config, "fit: no trainable parameters");

  const int k = graph.output_classes();
  const bool do_augment = augment.rotation_deg > 0.0 || augment.flip_prob > 0.0;
  const bool val_augmented = do_augment && augment.augment_validation;
  AdamState adam = make_adam_state(store);

  // constant conv features can be computed once instead of per epoch
  FeatureCache train_cache, val_cache;
  if (features_frozen(graph)) {
    if (!do_augment) train_cache.build(graph, store, train);
    if (validation && !val_augmented) val_cache.build(graph, store, *validation);
  }

  std::vector<EpochReport> reports;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<size_t> order(train.size());
    std::iota(order.begin(), order.end(), size_t{0});
    Rng shuffle_rng(config.seed ^ static_cast<uint64_t>(epoch));
    shuffle_in_place(order, shuffle_rng);

    double epoch_loss = 0.0;
    int batch_index = 0;
    for (size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const size_t stop = std::min(order.size(), start + config.batch_size);
      const int n = static_cast<int>(stop - start);

      GradStore batch_grads;
      batch_grads.ensure_shapes(store);
      double batch_loss = 0.0;
      for (size_t pos = start; pos < stop; ++pos) {
        const size_t idx = order[pos];
        const Tensor labels = one_hot(train.label(idx), k);
        ForwardTrace trace;
        const uint64_t drop_seed =
            hash_mix(hash_mix(config.seed, static_cast<uint64_t>(epoch)),
                     hash_mix(static_cast<uint64_t>(batch_index), static_cast<uint64_t>(pos)));
        if (train_cache.enabled) {
          forward_range(graph, store, train_cache.features[idx], train_cache.resume_layer,
                        graph.layers.size(), RunMode::Training, &trace, drop_seed);
        } else {
          Tensor img = train.image(idx);
          if (do_augment) {
            Rng rng(augment_stream_seed(config.seed, train.id(idx), epoch));
            img = augment_image(img, augment, rng);
          }
          forward_pass(graph, store, as_batch1(img), RunMode::Training, &trace, drop_seed);
        }

        Tensor dlogits;
        if (graph.task == Task::Binary) {
          auto res = sigmoid_bce_forward(trace.logits, labels);
          batch_loss += res.loss;
          dlogits = sigmoid_bce_backward(res.probs, labels);
        } else {
          auto res = softmax_xent_forward(trace.logits, labels);
          batch_loss += res.loss;
          dlogits = softmax_xent_backward(res.probs, labels);
        }
        backward_pass(graph, store, trace, dlogits, batch_grads);
      }
      batch_loss /= n;
      if (!std::isfinite(batch_loss))
        fail(ErrorCode::Diverged, "training loss diverged at epoch " + std::to_string(epoch) +
                                      ", batch " + std::to_string(batch_index));
      // per-sample gradients were accumulated unscaled; average over the
      // true batch size (the short final batch keeps its own size)
      batch_grads.scale(1.0f / static_cast<float>(n));
      adam_step(store, batch_grads, adam, config);
      epoch_loss += batch_loss * n;
    }

    EpochReport report;
    report.epoch = epoch;
    report.train_loss = epoch_loss / static_cast<double>(train.size());
    report.train_accuracy =
        eval_pass(graph, store, train, nullptr, config.seed, epoch, &train_cache).accuracy;
    if (validation) {
      const AugmentConfig* val_aug = val_augmented ? &augment : nullptr;
      const EvalStats vs =
          eval_pass(graph, store, *validation, val_aug, config.seed, epoch, &val_cache);
      report.val_loss = vs.mean_loss;
      report.val_accuracy = vs.accuracy;
    }
    reports.push_back(report);
    if (on_epoch) on_epoch(report);
  }
  return reports;
}

std::pair<ConfusionMatrix, MetricsReport> evaluate(const ModelGraph& graph,
                                                   const WeightStore& store,
                                                   const SampleSource& samples,
                                                   std::vector<std::string> class_names) {
  if (samples.size() == 0) fail(ErrorCode::Input, "evaluate: split is empty");
  const int k = graph.output_classes();
  const EvalStats stats = eval_pass(graph, store, samples, nullptr, 0, 0);
  std::vector<int> truth(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) truth[i] = samples.label(i);
  ConfusionMatrix cm = confusion_matrix(truth, stats.predicted, k, std::move(class_names));
  MetricsReport report = classification_metrics(cm);
  return {std::move(cm), std::move(report)};
}

}  // namespace vggft
