/*
 * vggft - VGG-16/VGG-19 transfer-learning library.
 *
 * C interface over the C++ core: opaque handles, integer status codes,
 * a per-thread error message. Every function that can fail returns a
 * vgt_status; on failure vgt_last_error() describes what went wrong until
 * the next call on the same thread.
 */

#ifndef VGGFT_H
#define VGGFT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define VGT_API __declspec(dllexport)
#else
#define VGT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vgt_status {
  VGT_OK = 0,
  VGT_ERR_DIMENSION = 1, /* tensor shape mismatch */
  VGT_ERR_CONFIG = 2,    /* invalid parameter or option value */
  VGT_ERR_INPUT = 3,     /* bad user data (labels, dataset layout, splits) */
  VGT_ERR_STATE = 4,     /* operation out of order */
  VGT_ERR_WEIGHTS = 5,   /* weight file does not match the graph */
  VGT_ERR_DECODE = 6,    /* unreadable or unsupported image */
  VGT_ERR_IO = 7,        /* filesystem failure */
  VGT_ERR_DIVERGED = 8,  /* NaN loss during training */
  VGT_ERR_UNKNOWN = 99
} vgt_status;

VGT_API const char* vgt_status_name(vgt_status status);

/* Message for the most recent failing call on this thread. */
VGT_API const char* vgt_last_error(void);

VGT_API const char* vgt_version(void);

typedef enum vgt_arch { VGT_ARCH_VGG16 = 1, VGT_ARCH_VGG19 = 2 } vgt_arch;
typedef enum vgt_task { VGT_TASK_BINARY = 2, VGT_TASK_MULTICLASS = 3 } vgt_task;
typedef enum vgt_partition {
  VGT_PART_TRAIN = 0,
  VGT_PART_VALIDATION = 1,
  VGT_PART_TEST = 2
} vgt_partition;
typedef enum vgt_freeze_mode {
  VGT_FREEZE_FEATURES = 0, /* conv stack frozen, the three dense layers train */
  VGT_FREEZE_NONE = 1      /* full fine-tuning */
} vgt_freeze_mode;

typedef struct vgt_model vgt_model;
typedef struct vgt_dataset vgt_dataset;
typedef struct vgt_split vgt_split;
typedef struct vgt_metrics vgt_metrics;

/* ------------------------------------------------------------------ model */

typedef struct vgt_model_options {
  vgt_arch arch;
  vgt_task task;
  uint64_t seed;       /* weight initialization stream */
  int tiny;            /* nonzero: width/8 graph with 64x64 input, for smoke tests */
  double dropout_rate; /* <= 0 selects the default 0.5 */
} vgt_model_options;

VGT_API vgt_status vgt_model_create(const vgt_model_options* options, vgt_model** out);

/* Rebuilds a model directly from a trained weight file (architecture, task
 * and input size come from the file). */
VGT_API vgt_status vgt_model_open_weights(const char* path, vgt_model** out);

VGT_API void vgt_model_free(vgt_model* model);

VGT_API vgt_status vgt_model_set_freeze(vgt_model* model, vgt_freeze_mode mode);

VGT_API vgt_status vgt_model_param_counts(const vgt_model* model, uint64_t* total,
                                          uint64_t* trainable, uint64_t* frozen);

typedef struct vgt_layer_info {
  char name[32];
  char kind[16];
  int out_channels;
  int out_h; /* 0 for non-spatial layers */
  int out_w;
  uint64_t params;
  int trainable;
} vgt_layer_info;

VGT_API int vgt_model_layer_count(const vgt_model* model);
VGT_API vgt_status vgt_model_layer_info(const vgt_model* model, int index, vgt_layer_info* out);

VGT_API vgt_arch vgt_model_arch(const vgt_model* model);
VGT_API vgt_task vgt_model_task(const vgt_model* model);
VGT_API int vgt_model_input_size(const vgt_model* model);
VGT_API int vgt_model_class_count(const vgt_model* model);

VGT_API vgt_status vgt_model_save_weights(const vgt_model* model, const char* path);

/* Accepts a full weight file or a features-only file (the pretrained
 * transfer input, task id 0). */
VGT_API vgt_status vgt_model_load_weights(vgt_model* model, const char* path);

/* Inference on one image file; probs must hold vgt_model_class_count values. */
VGT_API vgt_status vgt_model_predict_image(const vgt_model* model, const char* image_path,
                                           float* probs, int capacity);

/* ------------------------------------------------------------------- data */

/* Opens a dataset laid out as <root>/<class_name>/<image files>. */
VGT_API vgt_status vgt_dataset_open(const char* root, vgt_dataset** out);
VGT_API void vgt_dataset_free(vgt_dataset* dataset);
VGT_API int vgt_dataset_class_count(const vgt_dataset* dataset);
VGT_API const char* vgt_dataset_class_name(const vgt_dataset* dataset, int index);
VGT_API uint64_t vgt_dataset_size(const vgt_dataset* dataset);

/* 70/10/20 stratified split, deterministic in the seed. */
VGT_API vgt_status vgt_split_stratified(const vgt_dataset* dataset, uint64_t seed,
                                        vgt_split** out);

/* Reads a split manifest CSV back; data_root locates the referenced files. */
VGT_API vgt_status vgt_split_from_manifest(const char* manifest_csv, const char* data_root,
                                           vgt_split** out);

VGT_API void vgt_split_free(vgt_split* split);
VGT_API vgt_status vgt_split_save_manifest(const vgt_split* split, const char* path);
VGT_API uint64_t vgt_split_count(const vgt_split* split, vgt_partition part);
VGT_API int vgt_split_class_count(const vgt_split* split);
VGT_API const char* vgt_split_class_name(const vgt_split* split, int index);

/* --------------------------------------------------------------- training */

typedef struct vgt_train_options {
  double learning_rate;    /* <= 0 selects the default 1e-4 */
  int batch_size;          /* <= 0 selects the task default (24 binary, 32 multiclass) */
  int epochs;              /* <= 0 selects the task default (12 binary, 16 multiclass) */
  uint64_t seed;
  double rotation_degrees; /* augmentation range, < 0 selects the default 15 */
  double flip_probability; /* < 0 selects the default 0.5 */
  int augment_validation;  /* the reference protocol augments validation too */
} vgt_train_options;

typedef struct vgt_epoch_report {
  int epoch;
  double train_loss;
  double train_accuracy;
  double val_loss;
  double val_accuracy;
} vgt_epoch_report;

typedef void (*vgt_epoch_callback)(const vgt_epoch_report* report, void* user);

/* Fits the model on the split's train partition, reporting once per epoch.
 * Trains only unfrozen parameters; the updated weights stay in the model. */
VGT_API vgt_status vgt_train_run(vgt_model* model, const vgt_split* split,
                                 const vgt_train_options* options, vgt_epoch_callback on_epoch,
                                 void* user);

/* ------------------------------------------------------------- evaluation */

VGT_API vgt_status vgt_evaluate_run(const vgt_model* model, const vgt_split* split,
                                    vgt_partition part, vgt_metrics** out);

VGT_API void vgt_metrics_free(vgt_metrics* metrics);
VGT_API int vgt_metrics_class_count(const vgt_metrics* metrics);
VGT_API double vgt_metrics_accuracy(const vgt_metrics* metrics);
VGT_API double vgt_metrics_macro_precision(const vgt_metrics* metrics);
VGT_API double vgt_metrics_macro_recall(const vgt_metrics* metrics);
VGT_API double vgt_metrics_macro_f1(const vgt_metrics* metrics);
VGT_API double vgt_metrics_class_precision(const vgt_metrics* metrics, int class_index);
VGT_API double vgt_metrics_class_recall(const vgt_metrics* metrics, int class_index);
VGT_API double vgt_metrics_class_f1(const vgt_metrics* metrics, int class_index);
VGT_API int64_t vgt_metrics_confusion(const vgt_metrics* metrics, int true_class,
                                      int predicted_class);

/* Metrics CSV: macro row plus one row per class, full precision and
 * 3-decimal display columns. positive_class < 0 means no positive tag. */
VGT_API vgt_status vgt_metrics_write_csv(const vgt_metrics* metrics, const char* path,
                                         const char* model_name, const char* task_label,
                                         int positive_class);
VGT_API vgt_status vgt_metrics_write_confusion_csv(const vgt_metrics* metrics, const char* path);

/* ------------------------------------------------------------ verification */

typedef struct vgt_gradcheck_entry {
  char kernel[32];
  double max_rel_error;
} vgt_gradcheck_entry;

/* Kernels pass verification when max_rel_error stays below this. */
#define VGT_GRADCHECK_TOLERANCE 1e-4

/* Finite-difference gradient verification of every kernel. Fills up to
 * capacity entries and sets *count to the number available. */
VGT_API vgt_status vgt_gradcheck_run(uint64_t seed, vgt_gradcheck_entry* entries, int capacity,
                                     int* count);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* VGGFT_H */
