// vggft command-line driver. All model/data functionality goes through the
// libvggft C API; this file owns option handling, config files and artifact
// layout (<out>/weights.vggw, splits.csv, metrics.csv, confusion.csv,
// epochs.csv).

#include <CLI11.hpp>
#include <vggft/vggft.h>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct CliError {
  vgt_status status;
  std::string message;
};

[[noreturn]] void die(vgt_status status, const std::string& message) {
  throw CliError{status, message};
}

void check(vgt_status status) {
  if (status != VGT_OK) die(status, vgt_last_error());
}

// ---------------------------------------------------------------------------
// run configuration: paper defaults <- config file <- explicit flags

struct RunConfig {
  std::string data;
  std::string arch = "vgg16";
  std::string task;  // binary | multiclass; empty = infer from the dataset
  std::string weights;
  std::string out = "out";
  std::string positive_class;
  std::string freeze = "head";
  uint64_t seed = 0;
  double learning_rate = 1e-4;
  int batch = -1;   // -1 = task default (24 binary / 32 multiclass)
  int epochs = -1;  // -1 = task default (12 binary / 16 multiclass)
  double rotation = 15.0;
  double flip_prob = 0.5;
  double dropout = 0.5;
  bool augment_validation = true;
  bool tiny = false;
};

struct ConfigValue {
  std::string value;
  int line;
};

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

// line-oriented `key = value` with # comments
std::map<std::string, ConfigValue> read_config_file(const std::string& path) {
  static const char* known[] = {"data",     "arch",          "task",
                                "weights",  "out",           "positive_class",
                                "freeze",   "seed",          "learning_rate",
                                "batch",    "epochs",        "rotation",
                                "flip_prob", "dropout",      "augment_validation",
                                "tiny"};
  std::ifstream in(path);
  if (!in) die(VGT_ERR_IO, "cannot open config file " + path);

  std::map<std::string, ConfigValue> values;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      die(VGT_ERR_CONFIG, path + " line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (std::find_if(std::begin(known), std::end(known),
                     [&](const char* k) { return key == k; }) == std::end(known))
      die(VGT_ERR_CONFIG,
          path + " line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    values[key] = {value, line_no};
  }
  return values;
}

double parse_double(const std::string& path, const ConfigValue& v, const std::string& key) {
  try {
    size_t used = 0;
    const double d = std::stod(v.value, &used);
    if (used != v.value.size()) throw std::invalid_argument(v.value);
    return d;
  } catch (const std::exception&) {
    die(VGT_ERR_CONFIG, path + " line " + std::to_string(v.line) + ": cannot parse '" +
                            v.value + "' as a number for " + key);
  }
}

int64_t parse_int(const std::string& path, const ConfigValue& v, const std::string& key) {
  try {
    size_t used = 0;
    const int64_t i = std::stoll(v.value, &used);
    if (used != v.value.size()) throw std::invalid_argument(v.value);
    return i;
  } catch (const std::exception&) {
    die(VGT_ERR_CONFIG, path + " line " + std::to_string(v.line) + ": cannot parse '" +
                            v.value + "' as an integer for " + key);
  }
}

bool parse_bool(const std::string& path, const ConfigValue& v, const std::string& key) {
  if (v.value == "true" || v.value == "1" || v.value == "yes") return true;
  if (v.value == "false" || v.value == "0" || v.value == "no") return false;
  die(VGT_ERR_CONFIG, path + " line " + std::to_string(v.line) + ": cannot parse '" + v.value +
                          "' as a boolean for " + key);
}

// option registration shared by the subcommands; ->count() later tells which
// flags were given explicitly so they win over the config file
struct Flags {
  RunConfig cfg;
  std::string config_path;
  bool no_val_augment = false;
  std::map<std::string, CLI::Option*> opts;

  void attach(CLI::App* cmd) {
    opts["config"] = cmd->add_option("--config", config_path, "key = value config file");
    opts["data"] = cmd->add_option("--data", cfg.data, "dataset root directory");
    opts["arch"] =
        cmd->add_option("--arch", cfg.arch, "vgg16 | vgg19")->check(CLI::IsMember({"vgg16", "vgg19"}));
    opts["task"] = cmd->add_option("--task", cfg.task, "binary | multiclass")
                       ->check(CLI::IsMember({"binary", "multiclass"}));
    opts["weights"] = cmd->add_option("--weights", cfg.weights, "weight file (.vggw)");
    opts["out"] = cmd->add_option("--out", cfg.out, "output directory for artifacts");
    opts["seed"] = cmd->add_option("--seed", cfg.seed, "split/init/shuffle seed");
    opts["lr"] = cmd->add_option("--lr", cfg.learning_rate, "Adam learning rate");
    opts["batch"] = cmd->add_option("--batch", cfg.batch, "mini-batch size");
    opts["epochs"] = cmd->add_option("--epochs", cfg.epochs, "training epochs");
    opts["rotation"] = cmd->add_option("--rotation", cfg.rotation, "augmentation rotation range, degrees");
    opts["flip-prob"] = cmd->add_option("--flip-prob", cfg.flip_prob, "horizontal flip probability");
    opts["dropout"] = cmd->add_option("--dropout", cfg.dropout, "classifier dropout rate");
    opts["positive-class"] =
        cmd->add_option("--positive-class", cfg.positive_class, "positive class name for binary reports");
    opts["freeze"] = cmd->add_option("--freeze", cfg.freeze, "head-only (conv stack frozen) | full")
                         ->check(CLI::IsMember({"head", "head-only", "full"}));
    opts["tiny"] = cmd->add_flag("--tiny", cfg.tiny, "width/8 graph with 64x64 input (smoke tests, not the reference setup)");
    opts["no-val-augment"] =
        cmd->add_flag("--no-val-augment", no_val_augment, "skip augmentation of the validation set");
  }

  bool given(const std::string& name) const {
    auto it = opts.find(name);
    return it != opts.end() && it->second->count() > 0;
  }

  // final RunConfig with the file applied under explicit flags
  RunConfig resolve() {
    if (!config_path.empty()) {
      const auto file = read_config_file(config_path);
      auto use = [&](const char* key, const char* flag) {
        return file.count(key) && !given(flag);
      };
      if (use("data", "data")) cfg.data = file.at("data").value;
      if (use("arch", "arch")) {
        cfg.arch = file.at("arch").value;
        if (cfg.arch != "vgg16" && cfg.arch != "vgg19")
          die(VGT_ERR_CONFIG, config_path + " line " + std::to_string(file.at("arch").line) +
                                  ": arch must be vgg16 or vgg19");
      }
      if (use("task", "task")) {
        cfg.task = file.at("task").value;
        if (cfg.task != "binary" && cfg.task != "multiclass")
          die(VGT_ERR_CONFIG, config_path + " line " + std::to_string(file.at("task").line) +
                                  ": task must be binary or multiclass");
      }
      if (use("weights", "weights")) cfg.weights = file.at("weights").value;
      if (use("out", "out")) cfg.out = file.at("out").value;
      if (use("positive_class", "positive-class"))
        cfg.positive_class = file.at("positive_class").value;
      if (use("freeze", "freeze")) {
        cfg.freeze = file.at("freeze").value;
        if (cfg.freeze != "head" && cfg.freeze != "head-only" && cfg.freeze != "full")
          die(VGT_ERR_CONFIG, config_path + " line " + std::to_string(file.at("freeze").line) +
                                  ": freeze must be head-only or full");
      }
      if (use("seed", "seed"))
        cfg.seed = static_cast<uint64_t>(parse_int(config_path, file.at("seed"), "seed"));
      if (use("learning_rate", "lr"))
        cfg.learning_rate = parse_double(config_path, file.at("learning_rate"), "learning_rate");
      if (use("batch", "batch"))
        cfg.batch = static_cast<int>(parse_int(config_path, file.at("batch"), "batch"));
      if (use("epochs", "epochs"))
        cfg.epochs = static_cast<int>(parse_int(config_path, file.at("epochs"), "epochs"));
      if (use("rotation", "rotation"))
        cfg.rotation = parse_double(config_path, file.at("rotation"), "rotation");
      if (use("flip_prob", "flip-prob"))
        cfg.flip_prob = parse_double(config_path, file.at("flip_prob"), "flip_prob");
      if (use("dropout", "dropout"))
        cfg.dropout = parse_double(config_path, file.at("dropout"), "dropout");
      if (use("augment_validation", "no-val-augment"))
        cfg.augment_validation =
            parse_bool(config_path, file.at("augment_validation"), "augment_validation");
      if (use("tiny", "tiny")) cfg.tiny = parse_bool(config_path, file.at("tiny"), "tiny");
    }
    if (no_val_augment) cfg.augment_validation = false;
    if (cfg.learning_rate <= 0.0)
      die(VGT_ERR_CONFIG, "learning rate must be positive");
    return cfg;
  }
};

// ---------------------------------------------------------------------------
// handle wrappers

struct Dataset {
  vgt_dataset* h = nullptr;
  ~Dataset() { vgt_dataset_free(h); }
};

struct Split {
  vgt_split* h = nullptr;
  ~Split() { vgt_split_free(h); }
};

struct Model {
  vgt_model* h = nullptr;
  ~Model() { vgt_model_free(h); }
};

struct Metrics {
  vgt_metrics* h = nullptr;
  ~Metrics() { vgt_metrics_free(h); }
};

void open_dataset(const RunConfig& cfg, Dataset& ds) {
  if (cfg.data.empty()) die(VGT_ERR_CONFIG, "--data is required for this command");
  check(vgt_dataset_open(cfg.data.c_str(), &ds.h));
}

// task resolution: explicit setting wins, otherwise the dataset class count
vgt_task resolve_task(const RunConfig& cfg, const Dataset* ds) {
  if (cfg.task == "binary") return VGT_TASK_BINARY;
  if (cfg.task == "multiclass") return VGT_TASK_MULTICLASS;
  if (ds && ds->h) {
    const int classes = vgt_dataset_class_count(ds->h);
    if (classes == 2) return VGT_TASK_BINARY;
    if (classes == 3) return VGT_TASK_MULTICLASS;
    die(VGT_ERR_CONFIG, "dataset has " + std::to_string(classes) +
                            " classes; expected 2 (binary) or 3 (multiclass)");
  }
  return VGT_TASK_BINARY;
}

void make_model(const RunConfig& cfg, vgt_task task, Model& model) {
  vgt_model_options opts{};
  opts.arch = cfg.arch == "vgg19" ? VGT_ARCH_VGG19 : VGT_ARCH_VGG16;
  opts.task = task;
  opts.seed = cfg.seed;
  opts.tiny = cfg.tiny ? 1 : 0;
  opts.dropout_rate = cfg.dropout;
  check(vgt_model_create(&opts, &model.h));
  check(vgt_model_set_freeze(model.h,
                             cfg.freeze == "full" ? VGT_FREEZE_NONE : VGT_FREEZE_FEATURES));
}

int resolve_positive_class(const vgt_split* split, const std::string& setting) {
  const int k = vgt_split_class_count(split);
  if (!setting.empty()) {
    for (int i = 0; i < k; ++i)
      if (setting == vgt_split_class_name(split, i)) return i;
    die(VGT_ERR_CONFIG, "positive class '" + setting + "' is not one of the split's classes");
  }
  if (k != 2) return -1;
  for (int i = 0; i < k; ++i) {
    std::string name = vgt_split_class_name(split, i);
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (name.find("covid") != std::string::npos && name.find("non") != 0) return i;
  }
  return 0;
}

std::string full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// commands

int cmd_split(const RunConfig& cfg) {
  Dataset ds;
  open_dataset(cfg, ds);
  Split split;
  check(vgt_split_stratified(ds.h, cfg.seed, &split.h));

  fs::create_directories(cfg.out);
  const std::string manifest = (fs::path(cfg.out) / "splits.csv").string();
  check(vgt_split_save_manifest(split.h, manifest.c_str()));

  std::printf("dataset %s: %llu samples, %d classes\n", cfg.data.c_str(),
              static_cast<unsigned long long>(vgt_dataset_size(ds.h)),
              vgt_dataset_class_count(ds.h));
  std::printf("split (seed %llu): train %llu  validation %llu  test %llu\n",
              static_cast<unsigned long long>(cfg.seed),
              static_cast<unsigned long long>(vgt_split_count(split.h, VGT_PART_TRAIN)),
              static_cast<unsigned long long>(vgt_split_count(split.h, VGT_PART_VALIDATION)),
              static_cast<unsigned long long>(vgt_split_count(split.h, VGT_PART_TEST)));
  std::printf("manifest written to %s\n", manifest.c_str());
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  Dataset ds;
  open_dataset(cfg, ds);
  const vgt_task task = resolve_task(cfg, &ds);

  Split split;
  check(vgt_split_stratified(ds.h, cfg.seed, &split.h));
  fs::create_directories(cfg.out);
  const std::string manifest = (fs::path(cfg.out) / "splits.csv").string();
  check(vgt_split_save_manifest(split.h, manifest.c_str()));

  Model model;
  make_model(cfg, task, model);
  if (!cfg.weights.empty()) {
    check(vgt_model_load_weights(model.h, cfg.weights.c_str()));
    std::printf("loaded pretrained weights from %s\n", cfg.weights.c_str());
  } else {
    std::printf("note: no pretrained weights supplied; conv features start from seeded "
                "random values (transfer learning expects a pretrained file)\n");
  }
  if (cfg.tiny)
    std::printf("note: --tiny uses a width-reduced 64x64 graph, not the reference setup\n");

  vgt_train_options topts{};
  topts.learning_rate = cfg.learning_rate;
  topts.batch_size = cfg.batch;    // <= 0 picks the task default inside the library
  topts.epochs = cfg.epochs;
  topts.seed = cfg.seed;
  topts.rotation_degrees = cfg.rotation;
  topts.flip_probability = cfg.flip_prob;
  topts.augment_validation = cfg.augment_validation ? 1 : 0;

  std::vector<vgt_epoch_report> epochs;
  auto on_epoch = [](const vgt_epoch_report* r, void* user) {
    auto* v = static_cast<std::vector<vgt_epoch_report>*>(user);
    v->push_back(*r);
    std::printf("epoch %d  train_loss %.6f  train_acc %.4f  val_loss %.6f  val_acc %.4f\n",
                r->epoch, r->train_loss, r->train_accuracy, r->val_loss, r->val_accuracy);
    std::fflush(stdout);
  };
  check(vgt_train_run(model.h, split.h, &topts, on_epoch, &epochs));

  const std::string epochs_csv = (fs::path(cfg.out) / "epochs.csv").string();
  {
    std::ofstream out(epochs_csv, std::ios::trunc);
    out << "epoch,train_loss,train_accuracy,val_loss,val_accuracy\n";
    for (const auto& r : epochs)
      out << r.epoch << "," << full(r.train_loss) << "," << full(r.train_accuracy) << ","
          << full(r.val_loss) << "," << full(r.val_accuracy) << "\n";
    if (!out) die(VGT_ERR_IO, "cannot write " + epochs_csv);
  }

  const std::string weights = (fs::path(cfg.out) / "weights.vggw").string();
  check(vgt_model_save_weights(model.h, weights.c_str()));
  std::printf("weights written to %s\n", weights.c_str());
  std::printf("epoch reports written to %s\n", epochs_csv.c_str());
  return 0;
}

int cmd_evaluate(const RunConfig& cfg) {
  if (cfg.data.empty()) die(VGT_ERR_CONFIG, "--data is required for evaluate");
  const std::string weights =
      cfg.weights.empty() ? (fs::path(cfg.out) / "weights.vggw").string() : cfg.weights;
  const std::string manifest = (fs::path(cfg.out) / "splits.csv").string();

  Model model;
  check(vgt_model_open_weights(weights.c_str(), &model.h));
  Split split;
  check(vgt_split_from_manifest(manifest.c_str(), cfg.data.c_str(), &split.h));

  Metrics metrics;
  check(vgt_evaluate_run(model.h, split.h, VGT_PART_TEST, &metrics.h));

  const int positive = resolve_positive_class(split.h, cfg.positive_class);
  const char* arch = vgt_model_arch(model.h) == VGT_ARCH_VGG19 ? "vgg19" : "vgg16";
  const char* task = vgt_model_task(model.h) == VGT_TASK_BINARY ? "binary" : "multiclass";

  fs::create_directories(cfg.out);
  const std::string metrics_csv = (fs::path(cfg.out) / "metrics.csv").string();
  const std::string confusion_csv = (fs::path(cfg.out) / "confusion.csv").string();
  check(vgt_metrics_write_csv(metrics.h, metrics_csv.c_str(), arch, task, positive));
  check(vgt_metrics_write_confusion_csv(metrics.h, confusion_csv.c_str()));

  std::printf("%s %s test metrics (macro): precision %.3f  recall %.3f  f1 %.3f  accuracy %.3f\n",
              arch, task, vgt_metrics_macro_precision(metrics.h),
              vgt_metrics_macro_recall(metrics.h), vgt_metrics_macro_f1(metrics.h),
              vgt_metrics_accuracy(metrics.h));
  if (positive >= 0)
    std::printf("positive class %s: precision %.3f  recall %.3f  f1 %.3f\n",
                vgt_split_class_name(split.h, positive),
                vgt_metrics_class_precision(metrics.h, positive),
                vgt_metrics_class_recall(metrics.h, positive),
                vgt_metrics_class_f1(metrics.h, positive));
  std::printf("confusion matrix (rows true, cols predicted):\n");
  const int k = vgt_metrics_class_count(metrics.h);
  for (int t = 0; t < k; ++t) {
    std::printf("  %-16s", vgt_split_class_name(split.h, t));
    for (int p = 0; p < k; ++p)
      std::printf(" %6lld", static_cast<long long>(vgt_metrics_confusion(metrics.h, t, p)));
    std::printf("\n");
  }
  std::printf("metrics written to %s and %s\n", metrics_csv.c_str(), confusion_csv.c_str());
  return 0;
}

int cmd_predict(const RunConfig& cfg, const std::vector<std::string>& images) {
  if (images.empty()) die(VGT_ERR_CONFIG, "predict needs at least one image path");
  const std::string weights =
      cfg.weights.empty() ? (fs::path(cfg.out) / "weights.vggw").string() : cfg.weights;
  Model model;
  check(vgt_model_open_weights(weights.c_str(), &model.h));

  const int k = vgt_model_class_count(model.h);
  std::printf("path");
  for (int j = 0; j < k; ++j) std::printf(",p%d", j);
  std::printf("\n");
  std::vector<float> probs(static_cast<size_t>(k));
  for (const auto& img : images) {
    check(vgt_model_predict_image(model.h, img.c_str(), probs.data(), k));
    std::printf("%s", img.c_str());
    for (int j = 0; j < k; ++j) std::printf(",%.6f", probs[j]);
    std::printf("\n");
  }
  return 0;
}

int cmd_gradcheck(const RunConfig& cfg) {
  vgt_gradcheck_entry entries[16];
  int count = 0;
  check(vgt_gradcheck_run(cfg.seed == 0 ? 42 : cfg.seed, entries, 16, &count));

  bool ok = true;
  std::printf("%-16s %-14s %s\n", "kernel", "max_rel_error", "status");
  for (int i = 0; i < count; ++i) {
    const bool pass = entries[i].max_rel_error < VGT_GRADCHECK_TOLERANCE;
    ok &= pass;
    std::printf("%-16s %-14.3e %s\n", entries[i].kernel, entries[i].max_rel_error,
                pass ? "pass" : "FAIL");
  }
  std::printf("tolerance: %g\n", VGT_GRADCHECK_TOLERANCE);
  if (!ok) die(VGT_ERR_STATE, "gradient verification exceeded tolerance");
  return 0;
}

int cmd_inspect(const RunConfig& cfg) {
  Model model;
  vgt_task task = VGT_TASK_BINARY;
  if (!cfg.weights.empty()) {
    check(vgt_model_open_weights(cfg.weights.c_str(), &model.h));
  } else {
    task = resolve_task(cfg, nullptr);
    make_model(cfg, task, model);
  }

  const char* arch = vgt_model_arch(model.h) == VGT_ARCH_VGG19 ? "vgg19" : "vgg16";
  const char* task_str = vgt_model_task(model.h) == VGT_TASK_BINARY ? "binary" : "multiclass";
  const int input = vgt_model_input_size(model.h);
  std::printf("architecture %s  task %s  input %dx%d\n", arch, task_str, input, input);

  std::printf("%-12s %-9s %-14s %-12s %s\n", "layer", "kind", "output", "params", "trainable");
  int convs = 0, denses = 0, pools = 0;
  const int n = vgt_model_layer_count(model.h);
  for (int i = 0; i < n; ++i) {
    vgt_layer_info info;
    check(vgt_model_layer_info(model.h, i, &info));
    char shape[32];
    if (info.out_h > 0)
      std::snprintf(shape, sizeof(shape), "%dx%dx%d", info.out_channels, info.out_h, info.out_w);
    else
      std::snprintf(shape, sizeof(shape), "%d", info.out_channels);
    std::printf("%-12s %-9s %-14s %-12llu %s\n", info.name, info.kind, shape,
                static_cast<unsigned long long>(info.params),
                info.params == 0 ? "-" : (info.trainable ? "yes" : "no"));
    convs += std::string(info.kind) == "conv";
    denses += std::string(info.kind) == "dense";
    pools += std::string(info.kind) == "maxpool";
  }

  uint64_t total = 0, trainable = 0, frozen = 0;
  check(vgt_model_param_counts(model.h, &total, &trainable, &frozen));
  std::printf("weight layers: %d (%d conv + %d dense)  pools: %d\n", convs + denses, convs,
              denses, pools);
  std::printf("parameters: total %llu  trainable %llu  frozen %llu\n",
              static_cast<unsigned long long>(total), static_cast<unsigned long long>(trainable),
              static_cast<unsigned long long>(frozen));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fine-tuned VGG-16/VGG-19 transfer learning for chest X-ray classification"};
  app.require_subcommand(1);

  Flags split_flags, train_flags, eval_flags, predict_flags, grad_flags, inspect_flags;
  std::vector<std::string> predict_images;

  auto* split_cmd = app.add_subcommand("split", "write the stratified 70/10/20 split manifest");
  split_flags.attach(split_cmd);
  auto* train_cmd = app.add_subcommand("train", "fine-tune a model and write weights + reports");
  train_flags.attach(train_cmd);
  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a weight file on the test partition");
  eval_flags.attach(eval_cmd);
  auto* predict_cmd = app.add_subcommand("predict", "print class probabilities for images");
  predict_flags.attach(predict_cmd);
  predict_cmd->add_option("images", predict_images, "image files to classify");
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  grad_flags.attach(grad_cmd);
  auto* inspect_cmd = app.add_subcommand("inspect", "print the layer table and parameter counts");
  inspect_flags.attach(inspect_cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    if (split_cmd->parsed()) return cmd_split(split_flags.resolve());
    if (train_cmd->parsed()) return cmd_train(train_flags.resolve());
    if (eval_cmd->parsed()) return cmd_evaluate(eval_flags.resolve());
    if (predict_cmd->parsed()) return cmd_predict(predict_flags.resolve(), predict_images);
    if (grad_cmd->parsed()) return cmd_gradcheck(grad_flags.resolve());
    if (inspect_cmd->parsed()) return cmd_inspect(inspect_flags.resolve());
  } catch (const CliError& e) {
    std::fprintf(stderr, "vggft: error: %s: %s\n", vgt_status_name(e.status), e.message.c_str());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "vggft: error: unknown: %s\n", e.what());
    return 1;
  }
  return 0;
}
