#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "core/kernels.hpp"
#include "core/tensor.hpp"

namespace vggft {

enum class Arch : uint8_t { Vgg16 = 1, Vgg19 = 2 };
enum class Task : uint8_t { Binary = 2, Multiclass = 3 };

inline const char* arch_name(Arch a) { return a == Arch::Vgg16 ? "vgg16" : "vgg19"; }
inline const char* task_name(Task t) { return t == Task::Binary ? "binary" : "multiclass"; }
inline int class_count(Task t) { return t == Task::Binary ? 2 : 3; }

enum class LayerKind : uint8_t { Conv, MaxPool, Flatten, Dense, Relu, Dropout, Output };

const char* layer_kind_name(LayerKind k);

struct LayerSpec {
  LayerKind kind;
  std::string name;
  int in_channels = 0;   // conv: Cin, dense: Din
  int out_channels = 0;  // conv: Cout, dense: Dout, flatten/output: width
  KernelParams params{}; // conv and pool layers
  double dropout_rate = 0.0;
  bool trainable = false;  // meaningful for weight-bearing layers only

  bool has_weights() const { return kind == LayerKind::Conv || kind == LayerKind::Dense; }
};

struct ModelGraph {
  Arch arch = Arch::Vgg16;
  Task task = Task::Multiclass;
  int input_channels = 3;
  int input_h = 192;
  int input_w = 192;
  int width_div = 1;  // 8 for the reduced smoke-test graph
  std::vector<LayerSpec> layers;
  bool head_attached = false;

  int conv_layer_count() const;
  int dense_layer_count() const;
  int pool_layer_count() const;
  int weight_layer_count() const { return conv_layer_count() + dense_layer_count(); }
  int output_classes() const { return class_count(task); }
  int flatten_width() const;  // dense input width after the conv stack
};

// Feature extractor only: conv stages + pools, ending at flatten.
ModelGraph build_vgg_features(Arch arch, Task task, int width_div = 1, int input_hw = 192);

// Full graphs: features plus the fine-tuning head.
ModelGraph build_vgg16(Task task, int width_div = 1, int input_hw = 192);
ModelGraph build_vgg19(Task task, int width_div = 1, int input_hw = 192);

// Appends dense(flatten->W), relu, dropout, dense(W->W), relu, dropout,
// dense(W->K) and the task's output activation. Fails if already attached.
void attach_finetune_head(ModelGraph& graph, Task task, double dropout_rate = 0.5);

// Marks every conv layer non-trainable; the three head layers stay trainable.
void freeze_features(ModelGraph& graph);
void set_all_trainable(ModelGraph& graph);

struct ParamCounts {
  uint64_t total = 0;
  uint64_t trainable = 0;
  uint64_t frozen = 0;
};

uint64_t layer_param_count(const LayerSpec& layer);
ParamCounts param_count(const ModelGraph& graph);

// Structural checks: conv params (3,1,1), pool params (2,2,0), layer counts
// per architecture, flatten width consistent with the shape chain.
void audit_graph(const ModelGraph& graph);

// Output shape after each layer for a batch of one, index-aligned with layers.
std::vector<std::vector<int>> shape_trace(const ModelGraph& graph);

// ---------------------------------------------------------------------------
// weights

struct WeightEntry {
  std::string name;
  Tensor weights;
  Tensor bias;
  bool frozen = false;
};

struct WeightStore {
  std::vector<WeightEntry> entries;  // in graph layer order
  std::unordered_map<std::string, size_t> index;

  bool has(const std::string& name) const { return index.count(name) != 0; }
  WeightEntry& at(const std::string& name);
  const WeightEntry& at(const std::string& name) const;
  void add(WeightEntry entry);
};

// He-uniform fan-in init for weights, zero biases; per-layer streams are
// derived from the seed and layer name so the result does not depend on
// construction order.
WeightStore init_weights(const ModelGraph& graph, uint64_t seed);

// Re-derives frozen flags on the store after graph freeze changes.
void sync_frozen_flags(const ModelGraph& graph, WeightStore& store);

// Binary weight file ("VGGW" format). features_only drops the head entries
// and marks the file as a pretrained-transfer input.
void save_weights(const WeightStore& store, const ModelGraph& graph, const std::string& path,
                  bool features_only = false);

// Loads a full or features-only file into a store shaped by the graph.
void load_weights(WeightStore& store, const ModelGraph& graph, const std::string& path);

// Reads arch/task/dims from a weight file and reconstructs the matching
// graph + store without further configuration.
struct OpenedModel {
  ModelGraph graph;
  WeightStore store;
};
OpenedModel open_weights(const std::string& path);

// ---------------------------------------------------------------------------
// forward / backward over the whole graph

enum class RunMode { Training, Inference };

struct ForwardTrace {
  // layer_inputs[i] holds the tensor that entered layer i when that layer
  // needs it for backward; pools and dropouts keep their own records.
  std::vector<Tensor> layer_inputs;
  std::vector<MaxPoolRecord<float>> pools;
  std::vector<DropoutState> dropouts;
  Tensor logits;
  Tensor probs;
  bool valid = false;
};

// Runs the graph on an NCHW batch. Training mode records everything backward
// needs and applies dropout with streams derived from dropout_seed.
Tensor forward_pass(const ModelGraph& graph, const WeightStore& store, const Tensor& batch,
                    RunMode mode, ForwardTrace* trace = nullptr, uint64_t dropout_seed = 0);

// Runs layers [begin, end) on an intermediate activation. Trace indices stay
// aligned with absolute layer positions; the training loop uses this to
// resume from cached flatten features when the conv stack is frozen.
Tensor forward_range(const ModelGraph& graph, const WeightStore& store, const Tensor& input,
                     size_t begin, size_t end, RunMode mode, ForwardTrace* trace = nullptr,
                     uint64_t dropout_seed = 0);

// index of the flatten layer
size_t flatten_index(const ModelGraph& graph);

// true when every weight layer before flatten is frozen, so flatten features
// are constant across optimizer steps
bool features_frozen(const ModelGraph& graph);

// Per-layer weight/bias gradients, index-aligned with store.entries. Entries
// for frozen layers stay empty once backward stops below the last trainable
// layer.
struct GradStore {
  std::vector<Tensor> weights;
  std::vector<Tensor> bias;

  void ensure_shapes(const WeightStore& store);
  void accumulate(const GradStore& other);
  void scale(float factor);
};

// Backpropagates d(loss)/d(logits) through the recorded trace.
void backward_pass(const ModelGraph& graph, const WeightStore& store, const ForwardTrace& trace,
                   const Tensor& dlogits, GradStore& grads);

}  // namespace vggft
