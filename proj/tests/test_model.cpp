#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "core/model.hpp"
#include "test_support.hpp"

using namespace vggft;

namespace {

// parameter-count oracle straight from the layer dimension formulas
uint64_t conv_params(int cin, int cout) { return 9ull * cin * cout + cout; }
uint64_t dense_params(int din, int dout) { return static_cast<uint64_t>(din) * dout + dout; }

uint64_t vgg16_conv_total() {
  const int widths[] = {64, 64, 128, 128, 256, 256, 256, 512, 512, 512, 512, 512, 512};
  uint64_t total = 0;
  int in = 3;
  for (int w : widths) {
    total += conv_params(in, w);
    in = w;
  }
  return total;
}

uint64_t multiclass_head_total() {
  return dense_params(18432, 512) + dense_params(512, 512) + dense_params(512, 3);
}

}  // namespace

TEST_CASE("vgg16 has 13 conv + 3 dense weight layers and 5 pools") {
  const ModelGraph g = build_vgg16(Task::Multiclass);
  CHECK(g.conv_layer_count() == 13);
  CHECK(g.dense_layer_count() == 3);
  CHECK(g.weight_layer_count() == 16);
  CHECK(g.pool_layer_count() == 5);
  CHECK_NOTHROW(audit_graph(g));
}

TEST_CASE("vgg19 has 16 conv + 3 dense weight layers") {
  const ModelGraph g = build_vgg19(Task::Binary);
  CHECK(g.conv_layer_count() == 16);
  CHECK(g.weight_layer_count() == 19);
  CHECK(g.pool_layer_count() == 5);
  CHECK_NOTHROW(audit_graph(g));
}

TEST_CASE("shape chain reaches (1,512,6,6) before flatten, width 18432") {
  const ModelGraph g = build_vgg16(Task::Multiclass);
  const auto shapes = shape_trace(g);
  for (size_t i = 0; i < g.layers.size(); ++i) {
    if (g.layers[i].kind == LayerKind::Flatten) {
      CHECK(shapes[i - 1] == std::vector<int>{1, 512, 6, 6});
      CHECK(shapes[i] == std::vector<int>{1, 18432});
    }
  }
  CHECK(g.flatten_width() == 18432);
  CHECK(build_vgg19(Task::Multiclass).flatten_width() == 18432);
}

TEST_CASE("spatial dims halve exactly at each pool and are otherwise preserved") {
  const ModelGraph g = build_vgg16(Task::Multiclass);
  const auto shapes = shape_trace(g);
  int h = g.input_h;
  for (size_t i = 0; i < g.layers.size(); ++i) {
    if (shapes[i].size() != 4) break;
    if (g.layers[i].kind == LayerKind::MaxPool) h /= 2;
    CHECK(shapes[i][2] == h);
    CHECK(shapes[i][3] == h);
  }
}

TEST_CASE("parameter counts match the formula oracle") {
  const ModelGraph g = build_vgg16(Task::Multiclass);
  uint64_t conv_total = 0;
  for (const auto& l : g.layers)
    if (l.kind == LayerKind::Conv) conv_total += layer_param_count(l);
  CHECK(conv_total == vgg16_conv_total());
  CHECK(conv_total == 14714688ull);
  CHECK(multiclass_head_total() == 9701891ull);
  CHECK(param_count(g).total == 14714688ull + 9701891ull);
  CHECK(param_count(g).total == 24416579ull);

  const ModelGraph g19 = build_vgg19(Task::Multiclass);
  uint64_t conv_total19 = 0;
  for (const auto& l : g19.layers)
    if (l.kind == LayerKind::Conv) conv_total19 += layer_param_count(l);
  CHECK(conv_total19 > conv_total);
}

TEST_CASE("head layout is identical across vgg16 and vgg19") {
  const ModelGraph a = build_vgg16(Task::Multiclass);
  const ModelGraph b = build_vgg19(Task::Multiclass);
  auto head_of = [](const ModelGraph& g) {
    std::vector<std::tuple<LayerKind, int, int>> head;
    bool seen_flatten = false;
    for (const auto& l : g.layers) {
      if (l.kind == LayerKind::Flatten) seen_flatten = true;
      if (seen_flatten && l.kind != LayerKind::Flatten)
        head.emplace_back(l.kind, l.in_channels, l.out_channels);
    }
    return head;
  };
  CHECK(head_of(a) == head_of(b));
}

TEST_CASE("binary head ends in a 2-unit sigmoid") {
  const ModelGraph g = build_vgg16(Task::Binary);
  const LayerSpec& out = g.layers.back();
  CHECK(out.kind == LayerKind::Output);
  CHECK(out.name == "sigmoid");
  CHECK(out.out_channels == 2);
  // a dropout follows each of the first two dense layers
  int drops = 0;
  for (const auto& l : g.layers) drops += l.kind == LayerKind::Dropout;
  CHECK(drops == 2);
}

TEST_CASE("attaching the head twice is a state error") {
  ModelGraph g = build_vgg16(Task::Multiclass);
  try {
    attach_finetune_head(g, Task::Multiclass);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::State);
  }
}

TEST_CASE("freeze_features leaves exactly the three dense layers trainable") {
  ModelGraph g = build_vgg16(Task::Multiclass);
  freeze_features(g);
  int trainable = 0;
  for (const auto& l : g.layers)
    if (l.has_weights() && l.trainable) ++trainable;
  CHECK(trainable == 3);

  const ParamCounts c = param_count(g);
  CHECK(c.trainable == 9701891ull);
  CHECK(c.trainable + c.frozen == c.total);
}

TEST_CASE("empty graph yields zero parameter counts") {
  const ModelGraph g;
  const ParamCounts c = param_count(g);
  CHECK(c.total == 0);
  CHECK(c.trainable == 0);
  CHECK(c.frozen == 0);
}

TEST_CASE("tiny graph keeps the architecture shape at reduced width") {
  const ModelGraph g = build_vgg16(Task::Multiclass, 8, 64);
  CHECK(g.conv_layer_count() == 13);
  CHECK(g.pool_layer_count() == 5);
  CHECK(g.flatten_width() == 64 * 2 * 2);
  CHECK_NOTHROW(audit_graph(g));
}

TEST_CASE("forward with zero weights gives uniform multiclass probabilities") {
  const ModelGraph g = build_vgg16(Task::Multiclass, 8, 64);
  WeightStore store = init_weights(g, 1);
  for (auto& e : store.entries) {
    for (auto& v : e.weights.data) v = 0.0f;
    for (auto& v : e.bias.data) v = 0.0f;
  }
  Rng rng(2);
  const Tensor batch = testsup::random_tensor<float>({2, 3, 64, 64}, rng, 0, 1);
  const Tensor probs = forward_pass(g, store, batch, RunMode::Inference);
  CHECK(probs.shape == std::vector<int>{2, 3});
  for (float p : probs.data) CHECK(p == doctest::Approx(1.0f / 3.0f));
}

TEST_CASE("output shape is (N,2) for binary and (N,3) for multiclass") {
  Rng rng(3);
  const Tensor batch = testsup::random_tensor<float>({3, 3, 64, 64}, rng, 0, 1);
  {
    const ModelGraph g = build_vgg16(Task::Binary, 8, 64);
    const WeightStore store = init_weights(g, 1);
    CHECK(forward_pass(g, store, batch, RunMode::Inference).shape == std::vector<int>{3, 2});
  }
  {
    const ModelGraph g = build_vgg16(Task::Multiclass, 8, 64);
    const WeightStore store = init_weights(g, 1);
    CHECK(forward_pass(g, store, batch, RunMode::Inference).shape == std::vector<int>{3, 3});
  }
}

TEST_CASE("inference is bit-identical across repeated forwards") {
  const ModelGraph g = build_vgg19(Task::Binary, 8, 64);
  const WeightStore store = init_weights(g, 11);
  Rng rng(5);
  const Tensor batch = testsup::random_tensor<float>({2, 3, 64, 64}, rng, 0, 1);
  const Tensor a = forward_pass(g, store, batch, RunMode::Inference);
  const Tensor b = forward_pass(g, store, batch, RunMode::Inference);
  CHECK(a.data == b.data);
}

TEST_CASE("forward rejects wrong input shapes and missing weights") {
  const ModelGraph g = build_vgg16(Task::Multiclass, 8, 64);
  WeightStore store = init_weights(g, 1);
  Rng rng(7);
  const Tensor bad = testsup::random_tensor<float>({1, 3, 32, 32}, rng);
  try {
    forward_pass(g, store, bad, RunMode::Inference);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Dimension);
  }

  // drop one entry and the forward must name the layer
  WeightStore broken;
  for (auto& e : store.entries)
    if (e.name != "conv2_1") broken.add(e);
  const Tensor ok = testsup::random_tensor<float>({1, 3, 64, 64}, rng, 0, 1);
  try {
    forward_pass(g, broken, ok, RunMode::Inference);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Weights);
    CHECK(std::string(e.what()).find("conv2_1") != std::string::npos);
  }
}

TEST_CASE("weight initialization is deterministic in the seed") {
  const ModelGraph g = build_vgg16(Task::Binary, 8, 64);
  const WeightStore a = init_weights(g, 123);
  const WeightStore b = init_weights(g, 123);
  const WeightStore c = init_weights(g, 124);
  REQUIRE(a.entries.size() == b.entries.size());
  bool all_equal = true, any_diff_c = false;
  for (size_t i = 0; i < a.entries.size(); ++i) {
    all_equal &= a.entries[i].weights.data == b.entries[i].weights.data;
    any_diff_c |= a.entries[i].weights.data != c.entries[i].weights.data;
  }
  CHECK(all_equal);
  CHECK(any_diff_c);
}

TEST_CASE("weight save/load round trip is byte-identical") {
  testsup::ScratchDir tmp("weights_rt");
  const ModelGraph g = build_vgg16(Task::Multiclass, 8, 64);
  const WeightStore store = init_weights(g, 77);
  const std::string p1 = tmp.str("a.vggw");
  const std::string p2 = tmp.str("b.vggw");
  save_weights(store, g, p1);

  WeightStore loaded = init_weights(g, 0);
  load_weights(loaded, g, p1);
  for (size_t i = 0; i < store.entries.size(); ++i) {
    CHECK(loaded.entries[i].weights.data == store.entries[i].weights.data);
    CHECK(loaded.entries[i].bias.data == store.entries[i].bias.data);
  }

  save_weights(loaded, g, p2);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  CHECK(!b1.empty());
}

TEST_CASE("loading a file with a missing layer names that layer") {
  testsup::ScratchDir tmp("weights_missing");
  ModelGraph g = build_vgg16(Task::Multiclass, 8, 64);
  WeightStore store = init_weights(g, 5);

  // drop conv3_2 from a copy of the graph so the saved file lacks it
  ModelGraph partial = g;
  std::erase_if(partial.layers, [](const LayerSpec& l) { return l.name == "conv3_2"; });
  const std::string path = tmp.str("partial.vggw");
  save_weights(store, partial, path);

  WeightStore target = init_weights(g, 0);
  try {
    load_weights(target, g, path);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Weights);
    CHECK(std::string(e.what()).find("conv3_2") != std::string::npos);
  }
}

TEST_CASE("loading a vgg19 file into a vgg16 graph is an architecture error") {
  testsup::ScratchDir tmp("weights_arch");
  const ModelGraph g19 = build_vgg19(Task::Multiclass, 8, 64);
  const WeightStore s19 = init_weights(g19, 5);
  const std::string path = tmp.str("vgg19.vggw");
  save_weights(s19, g19, path);

  const ModelGraph g16 = build_vgg16(Task::Multiclass, 8, 64);
  WeightStore target = init_weights(g16, 0);
  try {
    load_weights(target, g16, path);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Weights);
    CHECK(std::string(e.what()).find("architecture") != std::string::npos);
  }
}

TEST_CASE("truncated weight files are rejected") {
  testsup::ScratchDir tmp("weights_trunc");
  const ModelGraph g = build_vgg16(Task::Binary, 8, 64);
  const WeightStore store = init_weights(g, 5);
  const std::string path = tmp.str("full.vggw");
  save_weights(store, g, path);

  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  bytes.resize(bytes.size() / 2);
  const std::string cut = tmp.str("cut.vggw");
  std::ofstream out(cut, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();

  WeightStore target = init_weights(g, 0);
  try {
    load_weights(target, g, cut);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Weights);
    CHECK(std::string(e.what()).find("truncated") != std::string::npos);
  }
}

TEST_CASE("bad magic bytes are rejected") {
  testsup::ScratchDir tmp("weights_magic");
  const std::string path = tmp.str("junk.vggw");
  std::ofstream out(path, std::ios::binary);
  out << "XXXXGARBAGE";
  out.close();

  const ModelGraph g = build_vgg16(Task::Binary, 8, 64);
  WeightStore target = init_weights(g, 0);
  try {
    load_weights(target, g, path);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Weights);
    CHECK(std::string(e.what()).find("magic") != std::string::npos);
  }
}

TEST_CASE("features-only files load the conv stack and keep the head") {
  testsup::ScratchDir tmp("weights_feat");
  const ModelGraph g = build_vgg16(Task::Multiclass, 8, 64);
  const WeightStore pretrained = init_weights(g, 21);
  const std::string path = tmp.str("features.vggw");
  save_weights(pretrained, g, path, /*features_only=*/true);

  WeightStore target = init_weights(g, 99);
  const std::vector<float> head_before = target.at("fc1").weights.data;
  load_weights(target, g, path);
  CHECK(target.at("conv1_1").weights.data == pretrained.at("conv1_1").weights.data);
  CHECK(target.at("conv5_3").weights.data == pretrained.at("conv5_3").weights.data);
  CHECK(target.at("fc1").weights.data == head_before);  // head untouched
}

TEST_CASE("open_weights reconstructs the graph from the file alone") {
  testsup::ScratchDir tmp("weights_open");
  const ModelGraph g = build_vgg19(Task::Binary, 8, 64);
  const WeightStore store = init_weights(g, 31);
  const std::string path = tmp.str("model.vggw");
  save_weights(store, g, path);

  const OpenedModel m = open_weights(path);
  CHECK(m.graph.arch == Arch::Vgg19);
  CHECK(m.graph.task == Task::Binary);
  CHECK(m.graph.input_h == 64);
  CHECK(m.graph.width_div == 8);
  CHECK(m.store.at("fc3").weights.data == store.at("fc3").weights.data);
  CHECK(m.store.at("conv1_1").weights.data == store.at("conv1_1").weights.data);
}
