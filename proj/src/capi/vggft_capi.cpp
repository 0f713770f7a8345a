#include "vggft/vggft.h"

#include <cstring>
#include <memory>
#include <string>

#include "core/data.hpp"
#include "core/error.hpp"
#include "core/gradcheck.hpp"
#include "core/metrics.hpp"
#include "core/model.hpp"
#include "core/train.hpp"

using namespace vggft;

namespace {

thread_local std::string t_last_error;

vgt_status status_from(ErrorCode code) {
  switch (code) {
    case ErrorCode::Dimension: return VGT_ERR_DIMENSION;
    case ErrorCode::Config:    return VGT_ERR_CONFIG;
    case ErrorCode::Input:     return VGT_ERR_INPUT;
    case ErrorCode::State:     return VGT_ERR_STATE;
    case ErrorCode::Weights:   return VGT_ERR_WEIGHTS;
    case ErrorCode::Decode:    return VGT_ERR_DECODE;
    case ErrorCode::Io:        return VGT_ERR_IO;
    case ErrorCode::Diverged:  return VGT_ERR_DIVERGED;
  }
  return VGT_ERR_UNKNOWN;
}

template <typename Fn>
vgt_status guard(Fn&& fn) {
  try {
    fn();
    t_last_error.clear();
    return VGT_OK;
  } catch (const Error& e) {
    t_last_error = e.what();
    return status_from(e.code());
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return VGT_ERR_UNKNOWN;
  }
}

void copy_str(char* dst, size_t cap, const std::string& src) {
  const size_t n = std::min(cap - 1, src.size());
  std::memcpy(dst, src.data(), n);
  dst[n] = '\0';
}

}  // namespace

struct vgt_model {
  ModelGraph graph;
  WeightStore store;
};

struct vgt_dataset {
  Dataset data;
};

struct vgt_split {
  DatasetSplit split;
  std::string data_root;
};

struct vgt_metrics {
  ConfusionMatrix cm;
  MetricsReport report;
};

namespace {

const std::vector<SampleRef>& partition_refs(const vgt_split* split, vgt_partition part) {
  switch (part) {
    case VGT_PART_TRAIN:      return split->split.train;
    case VGT_PART_VALIDATION: return split->split.validation;
    default:                  return split->split.test;
  }
}

void check_split_matches_model(const vgt_model* model, const vgt_split* split) {
  const int k = model->graph.output_classes();
  const int classes = static_cast<int>(split->split.class_names.size());
  if (classes != k)
    fail(ErrorCode::Input, "split has " + std::to_string(classes) + " classes but the " +
                               task_name(model->graph.task) + " model expects " +
                               std::to_string(k));
}

}  // namespace

extern "C" {

const char* vgt_status_name(vgt_status status) {
  switch (status) {
    case VGT_OK:            return "ok";
    case VGT_ERR_DIMENSION: return "dimension";
    case VGT_ERR_CONFIG:    return "config";
    case VGT_ERR_INPUT:     return "input";
    case VGT_ERR_STATE:     return "state";
    case VGT_ERR_WEIGHTS:   return "weights";
    case VGT_ERR_DECODE:    return "decode";
    case VGT_ERR_IO:        return "io";
    case VGT_ERR_DIVERGED:  return "diverged";
    case VGT_ERR_UNKNOWN:   break;
  }
  return "unknown";
}

const char* vgt_last_error(void) { return t_last_error.c_str(); }

const char* vgt_version(void) { return "0.1.0"; }

/* ------------------------------------------------------------------ model */

vgt_status vgt_model_create(const vgt_model_options* options, vgt_model** out) {
  if (!options || !out) {
    t_last_error = "null argument";
    return VGT_ERR_INPUT;
  }
  *out = nullptr;
  return guard([&] {
    const Task task = static_cast<Task>(options->task);
    const Arch arch = static_cast<Arch>(options->arch);
    if (arch != Arch::Vgg16 && arch != Arch::Vgg19)
      fail(ErrorCode::Config, "unknown architecture id");
    if (task != Task::Binary && task != Task::Multiclass)
      fail(ErrorCode::Config, "unknown task id");
    const int div = options->tiny ? 8 : 1;
    const int input_hw = options->tiny ? 64 : 192;
    const double rate = options->dropout_rate > 0.0 ? options->dropout_rate : 0.5;

    auto m = std::make_unique<vgt_model>();
    m->graph = build_vgg_features(arch, task, div, input_hw);
    attach_finetune_head(m->graph, task, rate);
    freeze_features(m->graph);
    m->store = init_weights(m->graph, options->seed);
    audit_graph(m->graph);
    *out = m.release();
  });
}

vgt_status vgt_model_open_weights(const char* path, vgt_model** out) {
  if (!path || !out) {
    t_last_error = "null argument";
    return VGT_ERR_INPUT;
  }
  *out = nullptr;
  return guard([&] {
    auto m = std::make_unique<vgt_model>();
    OpenedModel opened = open_weights(path);
    m->graph = std::move(opened.graph);
    m->store = std::move(opened.store);
    freeze_features(m->graph);
    sync_frozen_flags(m->graph, m->store);
    *out = m.release();
  });
}

void vgt_model_free(vgt_model* model) { delete model; }

vgt_status vgt_model_set_freeze(vgt_model* model, vgt_freeze_mode mode) {
  if (!model) {
    t_last_error = "null model";
    return VGT_ERR_INPUT;
  }
  return guard([&] {
    if (mode == VGT_FREEZE_NONE)
      set_all_trainable(model->graph);
    else
      freeze_features(model->graph);
    sync_frozen_flags(model->graph, model->store);
  });
}

vgt_status vgt_model_param_counts(const vgt_model* model, uint64_t* total, uint64_t* trainable,
                                  uint64_t* frozen) {
  if (!model) {
    t_last_error = "null model";
    return VGT_ERR_INPUT;
  }
  return guard([&] {
    const ParamCounts c = param_count(model->graph);
    if (total) *total = c.total;
    if (trainable) *trainable = c.trainable;
    if (frozen) *frozen = c.frozen;
  });
}

int vgt_model_layer_count(const vgt_model* model) {
  return model ? static_cast<int>(model->graph.layers.size()) : 0;
}

vgt_status vgt_model_layer_info(const vgt_model* model, int index, vgt_layer_info* out) {
  if (!model || !out) {
    t_last_error = "null argument";
    return VGT_ERR_INPUT;
  }
  return guard([&] {
    if (index < 0 || index >= static_cast<int>(model->graph.layers.size()))
      fail(ErrorCode::Input, "layer index out of range");
    const LayerSpec& l = model->graph.layers[index];
    const auto shapes = shape_trace(model->graph);
    const auto& s = shapes[index];
    copy_str(out->name, sizeof(out->name), l.name);
    copy_str(out->kind, sizeof(out->kind), layer_kind_name(l.kind));
    out->out_channels = s[1];
    out->out_h = s.size() == 4 ? s[2] : 0;
    out->out_w = s.size() == 4 ? s[3] : 0;
    out->params = layer_param_count(l);
    out->trainable = l.has_weights() && l.trainable ? 1 : 0;
  });
}

vgt_arch vgt_model_arch(const vgt_model* model) {
  return model ? static_cast<vgt_arch>(model->graph.arch) : VGT_ARCH_VGG16;
}

vgt_task vgt_model_task(const vgt_model* model) {
  return model ? static_cast<vgt_task>(model->graph.task) : VGT_TASK_MULTICLASS;
}

int vgt_model_input_size(const vgt_model* model) { return model ? model->graph.input_h : 0; }

int vgt_model_class_count(const vgt_model* model) {
  return model ? model->graph.output_classes() : 0;
}

vgt_status vgt_model_save_weights(const vgt_model* model, const char* path) {
  if (!model || !path) {
    t_last_error = "null argument";
    return VGT_ERR_INPUT;
  }
  return guard([&] { save_weights(model->store, model->graph, path); });
}

vgt_status vgt_model_load_weights(vgt_model* model, const char* path) {
  if (!model || !path) {
    t_last_error = "null argument";
    return VGT_ERR_INPUT;
  }
  return guard([&] { load_weights(model->store, model->graph, path); });
}

vgt_status vgt_model_predict_image(const vgt_model* model, const char* image_path, float* probs,
                                   int capacity) {
  if (!model || !image_path || !probs) {
    t_last_error = "null argument";
    return VGT_ERR_INPUT;
  }
  return guard([&] {
    const int k = model->graph.output_classes();
    if (capacity < k)
      fail(ErrorCode::Input, "probability buffer holds " + std::to_string(capacity) +
                                 " values, need " + std::to_string(k));
    Tensor img = replicate_to_rgb(decode_image(image_path));
    img = resize_bilinear(img, model->graph.input_h, model->graph.input_w);
    img = normalize(img, Normalization{});
    const Tensor batch({1, img.dim(0), img.dim(1), img.dim(2)}, img.data);
    const Tensor out = forward_pass(model->graph, model->store, batch, RunMode::Inference);
    for (int j = 0; j < k; ++j) probs[j] = out.at2(0, j);
  });
}

/* ------------------------------------------------------------------- data */

vgt_status vgt_dataset_open(const char* root, vgt_dataset** out) {
  if (!root || !out) {
    t_last_error = "null argument";
    return VGT_ERR_INPUT;
  }
  *out = nullptr;
  return guard([&] {
    auto ds = std::make_unique<vgt_dataset>();
    ds->data = load_dataset(root);
    *out = ds.release();
  });
}

void vgt_dataset_free(vgt_dataset* dataset) { delete dataset; }

int vgt_dataset_class_count(const vgt_dataset* dataset) {
  return dataset ? static_cast<int>(dataset->data.class_names.size()) : 0;
}

const char* vgt_dataset_class_name(const vgt_dataset* dataset, int index) {
  if (!dataset || index < 0 || index >= static_cast<int>(dataset->data.class_names.size()))
    return nullptr;
  return dataset->data.class_names[index].c_str();
}

uint64_t vgt_dataset_size(const vgt_dataset* dataset) {
  return dataset ? dataset->data.samples.size() : 0;
}

vgt_status vgt_split_stratified(const vgt_dataset* dataset, uint64_t seed, vgt_split** out) {
  if (!dataset || !out) {
    t_last_error = "null argument";
    return VGT_ERR_INPUT;
  }
  *out = nullptr;
  return guard([&] {
    auto sp = std::make_unique<vgt_split>();
    sp->split = stratified_split(dataset->data, seed);
    sp->data_root = dataset->data.root;
    *out = sp.release();
  });
}

vgt_status vgt_split_from_manifest(const char* manifest_csv, const char* data_root,
                                   vgt_split** out) {
  if (!manifest_csv || !data_root || !out) {
    t_last_error = "null argument";
    return VGT_ERR_INPUT;
  }
  *out = nullptr;
  return guard([&] {
    auto sp = std::make_unique<vgt_split>();
    sp->split = load_manifest(manifest_csv);
    sp->data_root = data_root;
    *out = sp.release();
  });
}

void vgt_split_free(vgt_split* split) { delete split; }

vgt_status vgt_split_save_manifest(const vgt_split* split, const char* path) {
  if (!split || !path) {
    t_last_error = "null argument";
    return VGT_ERR_INPUT;
  }
  return guard([&] { save_manifest(split->split, path); });
}

uint64_t vgt_split_count(const vgt_split* split, vgt_partition part) {
  if (!split) return 0;
  switch (part) {
    case VGT_PART_TRAIN:      return split->split.train.size();
    case VGT_PART_VALIDATION: return split->split.validation.size();
    case VGT_PART_TEST:       return split->split.test.size();
  }
  return 0;
}

int vgt_split_class_count(const vgt_split* split) {
  return split ? static_cast<int>(split->split.class_names.size()) : 0;
}

const char* vgt_split_class_name(const vgt_split* split, int index) {
  if (!split || index < 0 || index >= static_cast<int>(split->split.class_names.size()))
    return nullptr;
  return split->split.class_names[index].c_str();
}

/* --------------------------------------------------------------- training */

vgt_status vgt_train_run(vgt_model* model, const vgt_split* split,
                         const vgt_train_options* options, vgt_epoch_callback on_epoch,
                         void* user) {
  if (!model || !split || !options) {
    t_last_error = "null argument";
    return VGT_ERR_INPUT;
  }
  return guard([&] {
    check_split_matches_model(model, split);

    TrainConfig config;
    config.learning_rate = options->learning_rate > 0.0 ? options->learning_rate : 1e-4;
    const bool binary = model->graph.task == Task::Binary;
    config.batch_size = options->batch_size > 0 ? options->batch_size : (binary ? 24 : 32);
    config.epochs = options->epochs > 0 ? options->epochs : (binary ? 12 : 16);
    config.seed = options->seed;

    AugmentConfig augment;
    augment.rotation_deg = options->rotation_degrees >= 0.0 ? options->rotation_degrees : 15.0;
    augment.flip_prob = options->flip_probability >= 0.0 ? options->flip_probability : 0.5;
    augment.augment_validation = options->augment_validation != 0;

    const int hw = model->graph.input_h;
    DiskSampleSource train_src(split->data_root, split->split.train, hw);
    DiskSampleSource val_src(split->data_root, split->split.validation, hw);
    const SampleSource* val = split->split.validation.empty() ? nullptr : &val_src;

    EpochCallback cb;
    if (on_epoch) {
      cb = [on_epoch, user](const EpochReport& r) {
        vgt_epoch_report c{r.epoch, r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy};
        on_epoch(&c, user);
      };
    }
    fit(model->graph, model->store, train_src, val, config, augment, cb);
  });
}

/* ------------------------------------------------------------- evaluation */

vgt_status vgt_evaluate_run(const vgt_model* model, const vgt_split* split, vgt_partition part,
                            vgt_metrics** out) {
  if (!model || !split || !out) {
    t_last_error = "null argument";
    return VGT_ERR_INPUT;
  }
  *out = nullptr;
  return guard([&] {
    check_split_matches_model(model, split);
    DiskSampleSource src(split->data_root, partition_refs(split, part), model->graph.input_h);
    auto m = std::make_unique<vgt_metrics>();
    auto [cm, report] = evaluate(model->graph, model->store, src, split->split.class_names);
    m->cm = std::move(cm);
    m->report = std::move(report);
    *out = m.release();
  });
}

void vgt_metrics_free(vgt_metrics* metrics) { delete metrics; }

int vgt_metrics_class_count(const vgt_metrics* m) { return m ? m->cm.k : 0; }

double vgt_metrics_accuracy(const vgt_metrics* m) { return m ? m->report.accuracy : 0.0; }
double vgt_metrics_macro_precision(const vgt_metrics* m) {
  return m ? m->report.macro_precision : 0.0;
}
double vgt_metrics_macro_recall(const vgt_metrics* m) { return m ? m->report.macro_recall : 0.0; }
double vgt_metrics_macro_f1(const vgt_metrics* m) { return m ? m->report.macro_f : 0.0; }

double vgt_metrics_class_precision(const vgt_metrics* m, int c) {
  return m && c >= 0 && c < m->cm.k ? m->report.precision[c] : 0.0;
}
double vgt_metrics_class_recall(const vgt_metrics* m, int c) {
  return m && c >= 0 && c < m->cm.k ? m->report.recall[c] : 0.0;
}
double vgt_metrics_class_f1(const vgt_metrics* m, int c) {
  return m && c >= 0 && c < m->cm.k ? m->report.f_measure[c] : 0.0;
}

int64_t vgt_metrics_confusion(const vgt_metrics* m, int t, int p) {
  if (!m || t < 0 || t >= m->cm.k || p < 0 || p >= m->cm.k) return -1;
  return m->cm.at(t, p);
}

vgt_status vgt_metrics_write_csv(const vgt_metrics* m, const char* path, const char* model_name,
                                 const char* task_label, int positive_class) {
  if (!m || !path || !model_name || !task_label) {
    t_last_error = "null argument";
    return VGT_ERR_INPUT;
  }
  return guard([&] { write_metrics_csv(path, model_name, task_label, m->cm, m->report,
                                       positive_class); });
}

vgt_status vgt_metrics_write_confusion_csv(const vgt_metrics* m, const char* path) {
  if (!m || !path) {
    t_last_error = "null argument";
    return VGT_ERR_INPUT;
  }
  return guard([&] { write_confusion_csv(path, m->cm); });
}

/* ------------------------------------------------------------ verification */

vgt_status vgt_gradcheck_run(uint64_t seed, vgt_gradcheck_entry* entries, int capacity,
                             int* count) {
  if (!entries || !count) {
    t_last_error = "null argument";
    return VGT_ERR_INPUT;
  }
  return guard([&] {
    const auto results = run_gradcheck(seed);
    *count = static_cast<int>(results.size());
    for (int i = 0; i < capacity && i < *count; ++i) {
      copy_str(entries[i].kernel, sizeof(entries[i].kernel), results[i].kernel);
      entries[i].max_rel_error = results[i].max_rel_error;
    }
  });
}

} /* extern "C" */
