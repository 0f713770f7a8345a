#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "core/data.hpp"
#include "core/metrics.hpp"
#include "core/model.hpp"

namespace vggft {

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 24;
  int epochs = 12;
  uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

void validate_train_config(const TrainConfig& config);

struct AdamSlot {
  Tensor m_weights, v_weights;
  Tensor m_bias, v_bias;
};

struct AdamState {
  std::vector<AdamSlot> slots;  // aligned with WeightStore entries
  int64_t step = 0;
};

AdamState make_adam_state(const WeightStore& store);

// One bias-corrected Adam update on a single tensor; t is the post-increment
// step count.
void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, int64_t t,
                 const TrainConfig& config);

// Applies adam_update to every trainable entry that has a gradient.
void adam_step(WeightStore& store, const GradStore& grads, AdamState& state,
               const TrainConfig& config);

struct EpochReport {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

using EpochCallback = std::function<void(const EpochReport&)>;

// Full training loop: per-epoch shuffle (seed ^ epoch), mini-batches with the
// short final batch included, per-task loss, Adam on trainable parameters
// only. The reported train loss is the running mean over training-mode
// forwards; accuracies come from inference-mode passes at epoch end.
std::vector<EpochReport> fit(const ModelGraph& graph, WeightStore& store,
                             const SampleSource& train, const SampleSource* validation,
                             const TrainConfig& config, const AugmentConfig& augment,
                             const EpochCallback& on_epoch = {});

// Inference over every sample; predicted class = argmax.
std::pair<ConfusionMatrix, MetricsReport> evaluate(const ModelGraph& graph,
                                                   const WeightStore& store,
                                                   const SampleSource& samples,
                                                   std::vector<std::string> class_names = {});

}  // namespace vggft
