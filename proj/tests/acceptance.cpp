// Acceptance suite: one pass/fail line per criterion. Numeric work runs
// against the core; criterion 7 drives the installed CLI end to end.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "core/data.hpp"
#include "core/gradcheck.hpp"
#include "core/metrics.hpp"
#include "core/model.hpp"
#include "core/train.hpp"
#include "test_support.hpp"

using namespace vggft;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& what) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, what.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------------------

void criterion1_gradients() {
  const auto start = Clock::now();
  const auto results = run_gradcheck(42);
  const double elapsed = seconds_since(start);

  bool pass = results.size() >= 6;
  double worst = 0.0;
  for (const auto& r : results) {
    worst = std::max(worst, r.max_rel_error);
    pass &= r.max_rel_error < 1e-4;
  }
  pass &= elapsed < 60.0;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "gradient suite: %zu kernels, worst rel. error %.2e (< 1e-4), %.1fs (< 60s)",
                results.size(), worst, elapsed);
  report(1, pass, buf);
}

void criterion2_architecture() {
  bool pass = true;

  const ModelGraph g16 = build_vgg16(Task::Multiclass);
  const ModelGraph g19 = build_vgg19(Task::Multiclass);
  pass &= g16.conv_layer_count() == 13 && g16.dense_layer_count() == 3;
  pass &= g19.conv_layer_count() == 16 && g19.dense_layer_count() == 3;

  // real forward of (1,3,192,192) up to and including flatten
  const WeightStore store = init_weights(g16, 1);
  Rng rng(2);
  Tensor batch({1, 3, 192, 192});
  for (auto& v : batch.data) v = static_cast<float>(rng.uniform(0, 1));
  const Tensor flat = forward_range(g16, store, batch, 0, flatten_index(g16) + 1,
                                    RunMode::Inference);
  pass &= flat.shape == std::vector<int>{1, 18432};

  // parameter totals against the dimension-formula oracle
  uint64_t conv_total = 0, head_total = 0;
  for (const auto& l : g16.layers) {
    if (l.kind == LayerKind::Conv)
      conv_total += 9ull * l.in_channels * l.out_channels + l.out_channels;
    if (l.kind == LayerKind::Dense)
      head_total += static_cast<uint64_t>(l.in_channels) * l.out_channels + l.out_channels;
  }
  pass &= conv_total == 14714688ull;
  pass &= head_total == 9701891ull;
  uint64_t lib_conv = 0;
  for (const auto& l : g16.layers)
    if (l.kind == LayerKind::Conv) lib_conv += layer_param_count(l);
  pass &= lib_conv == conv_total;
  pass &= param_count(g16).total == 24416579ull;

  report(2, pass,
         "architecture audit: 13+3 / 16+3 layers, flatten width 18432, conv params "
         "14,714,688, head params 9,701,891");
}

void criterion3_paper_arithmetic() {
  const double f = f_measure(0.88, 0.90);
  const bool pass = format3(f) == "0.890";
  report(3, pass, "F(0.88, 0.90) displays as " + format3(f) + " (expected 0.890)");
}

void criterion4_splits() {
  bool pass = true;

  auto synth = [](int label, int n) {
    std::vector<SampleRef> v;
    for (int i = 0; i < n; ++i)
      v.push_back({"c" + std::to_string(label) + "/" + std::to_string(i), label});
    return v;
  };
  auto count = [](const std::vector<SampleRef>& part, int label) {
    return std::count_if(part.begin(), part.end(),
                         [&](const SampleRef& s) { return s.label == label; });
  };

  // two-class inventory: 278 / 978
  {
    std::vector<SampleRef> samples = synth(0, 278);
    const auto more = synth(1, 978);
    samples.insert(samples.end(), more.begin(), more.end());
    const DatasetSplit s = stratified_split(samples, {"covid", "non_covid"}, 7);
    pass &= count(s.test, 0) == 56 && count(s.validation, 0) == 28 && count(s.train, 0) == 194;

    // disjoint and exhaustive
    std::set<std::string> seen;
    size_t total = 0;
    for (const auto* part : {&s.train, &s.validation, &s.test})
      for (const auto& x : *part) {
        pass &= seen.insert(x.path).second;
        ++total;
      }
    pass &= total == samples.size();

    // bit-identical membership across reruns with the same seed
    const DatasetSplit again = stratified_split(samples, {"covid", "non_covid"}, 7);
    pass &= s.train.size() == again.train.size();
    for (size_t i = 0; i < s.train.size() && pass; ++i)
      pass &= s.train[i].path == again.train[i].path;
    for (size_t i = 0; i < s.test.size() && pass; ++i)
      pass &= s.test[i].path == again.test[i].path;
  }

  // three-class inventory: 278 / 776 / 1120
  {
    std::vector<SampleRef> samples = synth(0, 278);
    const auto pneumonia = synth(1, 776);
    const auto normal = synth(2, 1120);
    samples.insert(samples.end(), pneumonia.begin(), pneumonia.end());
    samples.insert(samples.end(), normal.begin(), normal.end());
    const DatasetSplit s = stratified_split(samples, {"covid", "pneumonia", "normal"}, 11);
    pass &= count(s.train, 1) == 543 && count(s.validation, 1) == 78 && count(s.test, 1) == 155;
    pass &= count(s.train, 2) == 784 && count(s.validation, 2) == 112 && count(s.test, 2) == 224;
  }

  report(4, pass,
         "split reproduction: covid 278 -> (194,28,56), pneumonia 776 -> (543,78,155), "
         "normal 1120 -> (784,112,224), disjoint/exhaustive, seed-stable");
}

void criterion5_overfit() {
  const auto start = Clock::now();

  // 24-image synthetic 3-class set, width/8 graph at 64x64 per --tiny
  MemorySampleSource train;
  {
    Rng rng(909);
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 8; ++i) {
        Tensor img({3, 64, 64});
        for (int ch = 0; ch < 3; ++ch)
          for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) {
              float base = 0.0f;
              if (c == 0) base = (y / 4) % 2 ? 1.0f : 0.0f;
              if (c == 1) base = (x / 4) % 2 ? 1.0f : 0.0f;
              if (c == 2) base = ((x / 4) + (y / 4)) % 2 ? 1.0f : 0.0f;
              img.at3(ch, y, x) =
                  std::clamp(base + static_cast<float>(rng.uniform(-0.1, 0.1)), 0.0f, 1.0f);
            }
        train.add("synthetic/c" + std::to_string(c) + "_" + std::to_string(i), c,
                  std::move(img));
      }
  }

  ModelGraph graph = build_vgg16(Task::Multiclass, 8, 64);
  freeze_features(graph);  // conv layers stay at their seeded random values
  WeightStore store = init_weights(graph, 7);
  const std::vector<float> conv_before = store.at("conv1_1").weights.data;

  TrainConfig cfg;
  cfg.batch_size = 24;
  cfg.learning_rate = 1e-4;
  cfg.epochs = 200;
  cfg.seed = 7;
  AugmentConfig aug;
  aug.rotation_deg = 0.0;
  aug.flip_prob = 0.0;

  int first_hit = -1;
  const auto reports = fit(graph, store, train, nullptr, cfg, aug, [&](const EpochReport& r) {
    if (first_hit < 0 && r.train_accuracy == 1.0) first_hit = r.epoch;
  });
  const double elapsed = seconds_since(start);

  bool pass = first_hit >= 0 && first_hit < 200;
  pass &= reports.size() == 200;
  pass &= elapsed < 300.0;
  pass &= store.at("conv1_1").weights.data == conv_before;  // frozen stayed frozen

  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "overfit sanity (tiny): accuracy 1.0 first reached at epoch %d (< 200), "
                "%.1fs (< 300s)",
                first_hit, elapsed);
  report(5, pass, buf);
}

void criterion6_metrics_oracle() {
  bool pass = true;
  for (int k : {2, 3}) {
    Rng rng(500 + k);
    std::vector<int> truth, pred;
    for (int i = 0; i < 1000; ++i) {
      truth.push_back(static_cast<int>(rng.index(k)));
      pred.push_back(static_cast<int>(rng.index(k)));
    }
    const auto cm = confusion_matrix(truth, pred, k);

    // independent brute-force tally
    for (int t = 0; t < k; ++t)
      for (int p = 0; p < k; ++p) {
        int64_t c = 0;
        for (size_t i = 0; i < truth.size(); ++i)
          if (truth[i] == t && pred[i] == p) ++c;
        pass &= cm.at(t, p) == c;
      }

    const auto rep = classification_metrics(cm);
    pass &= rep.accuracy == static_cast<double>(cm.trace()) / cm.total();

    // per-class one-vs-rest arithmetic recomputed from raw counts
    for (int c = 0; c < k; ++c) {
      int64_t tp = 0, fp = 0, fn = 0;
      for (size_t i = 0; i < truth.size(); ++i) {
        if (pred[i] == c && truth[i] == c) ++tp;
        if (pred[i] == c && truth[i] != c) ++fp;
        if (pred[i] != c && truth[i] == c) ++fn;
      }
      const double p_oracle = tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0;
      const double r_oracle = tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0;
      pass &= rep.precision[c] == p_oracle;
      pass &= rep.recall[c] == r_oracle;
    }
  }
  report(6, pass, "metrics oracle: 1000 random pairs, k in {2,3}, exact equality incl. "
                  "accuracy = trace/total");
}

int run_cli(const std::string& args, const std::string& log_path) {
  const std::string cmd = std::string(VGGFT_CLI_PATH) + " " + args + " > " + log_path + " 2>&1";
  return std::system(cmd.c_str());
}

void criterion7_determinism() {
  testsup::ScratchDir tmp("acceptance_cli");
  testsup::make_pgm_dataset(tmp.path() / "data", {{"covid", 10}, {"normal", 10}, {"pneu", 10}},
                            16);
  const std::string data = (tmp.path() / "data").string();

  // a features-only file pins the pretrained conv input for the frozen check
  ModelGraph ref_graph = build_vgg16(Task::Multiclass, 8, 64);
  const WeightStore ref_store = init_weights(ref_graph, 77);
  const std::string features = tmp.str("features.vggw");
  save_weights(ref_store, ref_graph, features, /*features_only=*/true);

  const std::string common = "--data " + data +
                             " --task multiclass --tiny --epochs 2 --batch 8 --seed 5 "
                             "--weights " + features;
  bool pass = true;
  pass &= run_cli("train " + common + " --out " + tmp.str("out1"), tmp.str("log1")) == 0;
  pass &= run_cli("train " + common + " --out " + tmp.str("out2"), tmp.str("log2")) == 0;

  const std::string w1 = file_bytes(tmp.str("out1/weights.vggw"));
  const std::string w2 = file_bytes(tmp.str("out2/weights.vggw"));
  pass &= !w1.empty() && w1 == w2;
  pass &= file_bytes(tmp.str("out1/splits.csv")) == file_bytes(tmp.str("out2/splits.csv"));
  pass &= file_bytes(tmp.str("out1/epochs.csv")) == file_bytes(tmp.str("out2/epochs.csv"));

  // frozen conv tensors of the trained file equal the pretrained input
  bool frozen_ok = true;
  {
    OpenedModel trained = open_weights(tmp.str("out1/weights.vggw"));
    WeightStore pre = init_weights(trained.graph, 0);
    load_weights(pre, trained.graph, features);
    for (const auto& l : trained.graph.layers) {
      if (l.kind != LayerKind::Conv) continue;
      frozen_ok &= trained.store.at(l.name).weights.data == pre.at(l.name).weights.data;
      frozen_ok &= trained.store.at(l.name).bias.data == pre.at(l.name).bias.data;
    }
  }
  pass &= frozen_ok;

  report(7, pass,
         "determinism & freezing: two CLI train runs byte-identical (weights, manifest, "
         "epochs), frozen conv tensors untouched");
}

void criterion8_performance() {
  testsup::ScratchDir tmp("acceptance_perf");
  ModelGraph graph = build_vgg16(Task::Multiclass);
  set_all_trainable(graph);  // full backward through every conv
  WeightStore store = init_weights(graph, 1);

  Rng rng(2);
  Tensor batch({1, 3, 192, 192});
  for (auto& v : batch.data) v = static_cast<float>(rng.uniform(0, 1));
  Tensor labels({1, 3});
  labels.data[0] = 1.0f;

  const auto t0 = Clock::now();
  ForwardTrace trace;
  forward_pass(graph, store, batch, RunMode::Training, &trace, 3);
  const auto res = softmax_xent_forward(trace.logits, labels);
  const Tensor dlogits = softmax_xent_backward(res.probs, labels);
  GradStore grads;
  grads.ensure_shapes(store);
  backward_pass(graph, store, trace, dlogits, grads);
  const double step_time = seconds_since(t0);

  const auto t1 = Clock::now();
  const std::string path = tmp.str("full.vggw");
  save_weights(store, graph, path);
  WeightStore loaded = init_weights(graph, 0);
  load_weights(loaded, graph, path);
  const double io_time = seconds_since(t1);

  bool identical = true;
  for (size_t i = 0; i < store.entries.size(); ++i) {
    identical &= loaded.entries[i].weights.data == store.entries[i].weights.data;
    identical &= loaded.entries[i].bias.data == store.entries[i].bias.data;
  }

  const bool pass = step_time < 60.0 && io_time < 10.0 && identical;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "performance smoke: full fwd+bwd step %.1fs (< 60s), weight save+load %.1fs "
                "(< 10s), round trip byte-identical",
                step_time, io_time);
  report(8, pass, buf);
}

}  // namespace

int main() {
  std::printf("vggft acceptance suite\n");
  criterion1_gradients();
  criterion2_architecture();
  criterion3_paper_arithmetic();
  criterion4_splits();
  criterion5_overfit();
  criterion6_metrics_oracle();
  criterion7_determinism();
  criterion8_performance();
  std::printf("%d of 8 criteria passed\n", 8 - g_failures);
  return g_failures == 0 ? 0 : 1;
}
