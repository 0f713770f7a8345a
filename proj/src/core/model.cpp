#include "core/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "core/rng.hpp"

namespace vggft {

const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv:    return "conv";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Dense:   return "dense";
    case LayerKind::Relu:    return "relu";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::Output:  return "output";
  }
  return "?";
}

int ModelGraph::conv_layer_count() const {
  int n = 0;
  for (const auto& l : layers) n += l.kind == LayerKind::Conv;
  return n;
}

int ModelGraph::dense_layer_count() const {
  int n = 0;
  for (const auto& l : layers) n += l.kind == LayerKind::Dense;
  return n;
}

int ModelGraph::pool_layer_count() const {
  int n = 0;
  for (const auto& l : layers) n += l.kind == LayerKind::MaxPool;
  return n;
}

int ModelGraph::flatten_width() const {
  for (const auto& l : layers)
    if (l.kind == LayerKind::Flatten) return l.out_channels;
  fail(ErrorCode::State, "graph has no flatten layer");
}

ModelGraph build_vgg_features(Arch arch, Task task, int width_div, int input_hw) {
  if (width_div < 1 || 64 % width_div != 0)
    fail(ErrorCode::Config, "width divisor must divide 64, got " + std::to_string(width_div));
  if (input_hw < 32 || input_hw % 32 != 0)
    fail(ErrorCode::Config,
         "input size must be a positive multiple of 32 (five pool halvings), got " +
             std::to_string(input_hw));

  ModelGraph g;
  g.arch = arch;
  g.task = task;
  g.input_h = g.input_w = input_hw;
  g.width_div = width_div;

  static const int stage_widths[5] = {64, 128, 256, 512, 512};
  static const int depths16[5] = {2, 2, 3, 3, 3};
  static const int depths19[5] = {2, 2, 4, 4, 4};
  const int* depths = arch == Arch::Vgg16 ? depths16 : depths19;

  int in_ch = 3;
  for (int s = 0; s < 5; ++s) {
    const int width = stage_widths[s] / width_div;
    for (int i = 0; i < depths[s]; ++i) {
      const std::string tag = std::to_string(s + 1) + "_" + std::to_string(i + 1);
      LayerSpec conv;
      conv.kind = LayerKind::Conv;
      conv.name = "conv" + tag;
      conv.in_channels = in_ch;
      conv.out_channels = width;
      conv.params = {3, 1, 1};
      conv.trainable = true;
      g.layers.push_back(conv);
      g.layers.push_back({LayerKind::Relu, "relu" + tag});
      in_ch = width;
    }
    LayerSpec pool;
    pool.kind = LayerKind::MaxPool;
    pool.name = "pool" + std::to_string(s + 1);
    pool.params = {2, 2, 0};
    g.layers.push_back(pool);
  }

  const int side = input_hw / 32;
  LayerSpec flat;
  flat.kind = LayerKind::Flatten;
  flat.name = "flatten";
  flat.in_channels = in_ch;
  flat.out_channels = in_ch * side * side;
  g.layers.push_back(flat);
  return g;
}

void attach_finetune_head(ModelGraph& g, Task task, double dropout_rate) {
  if (g.layers.empty() || g.head_attached || g.dense_layer_count() > 0)
    fail(ErrorCode::State, "fine-tuning head already attached");
  if (g.layers.back().kind != LayerKind::Flatten)
    fail(ErrorCode::State, "graph must end at flatten to attach the head");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    fail(ErrorCode::Config, "dropout rate must be in [0,1)");

  g.task = task;
  const int width = 512 / g.width_div;
  const int k = class_count(task);
  int in = g.flatten_width();
  for (int i = 1; i <= 2; ++i) {
    LayerSpec fc;
    fc.kind = LayerKind::Dense;
    fc.name = "fc" + std::to_string(i);
    fc.in_channels = in;
    fc.out_channels = width;
    fc.trainable = true;
    g.layers.push_back(fc);
    g.layers.push_back({LayerKind::Relu, "fc_relu" + std::to_string(i)});
    LayerSpec drop;
    drop.kind = LayerKind::Dropout;
    drop.name = "drop" + std::to_string(i);
    drop.dropout_rate = dropout_rate;
    g.layers.push_back(drop);
    in = width;
  }
  LayerSpec fc3;
  fc3.kind = LayerKind::Dense;
  fc3.name = "fc3";
  fc3.in_channels = in;
  fc3.out_channels = k;
  fc3.trainable = true;
  g.layers.push_back(fc3);

  LayerSpec out;
  out.kind = LayerKind::Output;
  out.name = task == Task::Binary ? "sigmoid" : "softmax";
  out.out_channels = k;
  g.layers.push_back(out);
  g.head_attached = true;
}

ModelGraph build_vgg16(Task task, int width_div, int input_hw) {
  ModelGraph g = build_vgg_features(Arch::Vgg16, task, width_div, input_hw);
  attach_finetune_head(g, task);
  return g;
}

ModelGraph build_vgg19(Task task, int width_div, int input_hw) {
  ModelGraph g = build_vgg_features(Arch::Vgg19, task, width_div, input_hw);
  attach_finetune_head(g, task);
  return g;
}

void freeze_features(ModelGraph& g) {
  if (!g.head_attached) fail(ErrorCode::State, "attach the head before freezing features");
  for (auto& l : g.layers)
    if (l.kind == LayerKind::Conv) l.trainable = false;
}

void set_all_trainable(ModelGraph& g) {
  for (auto& l : g.layers)
    if (l.has_weights()) l.trainable = true;
}

uint64_t layer_param_count(const LayerSpec& l) {
  if (l.kind == LayerKind::Conv) {
    const uint64_t k = static_cast<uint64_t>(l.params.kernel_size);
    return k * k * l.in_channels * l.out_channels + l.out_channels;
  }
  if (l.kind == LayerKind::Dense)
    return static_cast<uint64_t>(l.in_channels) * l.out_channels + l.out_channels;
  return 0;
}

ParamCounts param_count(const ModelGraph& g) {
  ParamCounts c;
  for (const auto& l : g.layers) {
    const uint64_t n = layer_param_count(l);
    c.total += n;
    if (l.has_weights()) {
      if (l.trainable)
        c.trainable += n;
      else
        c.frozen += n;
    }
  }
  return c;
}

std::vector<std::vector<int>> shape_trace(const ModelGraph& g) {
  std::vector<std::vector<int>> shapes;
  std::vector<int> cur = {1, g.input_channels, g.input_h, g.input_w};
  for (const auto& l : g.layers) {
    switch (l.kind) {
      case LayerKind::Conv: {
        int oh = 0, ow = 0;
        conv2d_output_dims(cur[2], cur[3], l.params, &oh, &ow);
        cur = {cur[0], l.out_channels, oh, ow};
        break;
      }
      case LayerKind::MaxPool:
        if (cur[2] % 2 || cur[3] % 2)
          fail(ErrorCode::Config, "pool layer " + l.name + " sees odd spatial dims");
        cur = {cur[0], cur[1], cur[2] / 2, cur[3] / 2};
        break;
      case LayerKind::Flatten:
        cur = {cur[0], cur[1] * cur[2] * cur[3]};
        break;
      case LayerKind::Dense:
        cur = {cur[0], l.out_channels};
        break;
      case LayerKind::Relu:
      case LayerKind::Dropout:
      case LayerKind::Output:
        break;
    }
    shapes.push_back(cur);
  }
  return shapes;
}

void audit_graph(const ModelGraph& g) {
  std::set<std::string> names;
  for (const auto& l : g.layers) {
    if (!names.insert(l.name).second)
      fail(ErrorCode::Config, "duplicate layer name " + l.name);
    if (l.kind == LayerKind::Conv &&
        (l.params.kernel_size != 3 || l.params.stride != 1 || l.params.padding != 1))
      fail(ErrorCode::Config, "conv layer " + l.name + " must use k=3 stride=1 padding=1");
    if (l.kind == LayerKind::MaxPool &&
        (l.params.kernel_size != 2 || l.params.stride != 2 || l.params.padding != 0))
      fail(ErrorCode::Config, "pool layer " + l.name + " must use k=2 stride=2");
  }
  const int expected_convs = g.arch == Arch::Vgg16 ? 13 : 16;
  if (g.conv_layer_count() != expected_convs)
    fail(ErrorCode::Config, std::string(arch_name(g.arch)) + " must have " +
                                std::to_string(expected_convs) + " conv layers, found " +
                                std::to_string(g.conv_layer_count()));
  if (g.pool_layer_count() != 5)
    fail(ErrorCode::Config, "graph must have exactly 5 pool layers");
  if (g.head_attached && g.dense_layer_count() != 3)
    fail(ErrorCode::Config, "classifier head must have exactly 3 dense layers");

  // flatten width must agree with the shape chain
  const auto shapes = shape_trace(g);
  for (size_t i = 0; i < g.layers.size(); ++i) {
    if (g.layers[i].kind == LayerKind::Flatten &&
        shapes[i][1] != g.layers[i].out_channels)
      fail(ErrorCode::Config, "flatten width " + std::to_string(g.layers[i].out_channels) +
                                  " does not match shape chain " + std::to_string(shapes[i][1]));
  }
}

// ---------------------------------------------------------------------------
// weights

WeightEntry& WeightStore::at(const std::string& name) {
  auto it = index.find(name);
  if (it == index.end()) fail(ErrorCode::Weights, "no weights for layer " + name);
  return entries[it->second];
}

const WeightEntry& WeightStore::at(const std::string& name) const {
  auto it = index.find(name);
  if (it == index.end()) fail(ErrorCode::Weights, "no weights for layer " + name);
  return entries[it->second];
}

void WeightStore::add(WeightEntry entry) {
  index[entry.name] = entries.size();
  entries.push_back(std::move(entry));
}

static std::vector<int> layer_weight_shape(const LayerSpec& l) {
  if (l.kind == LayerKind::Conv)
    return {l.out_channels, l.in_channels, l.params.kernel_size, l.params.kernel_size};
  return {l.out_channels, l.in_channels};
}

WeightStore init_weights(const ModelGraph& graph, uint64_t seed) {
  WeightStore store;
  for (const auto& l : graph.layers) {
    if (!l.has_weights()) continue;
    WeightEntry e;
    e.name = l.name;
    e.weights = Tensor(layer_weight_shape(l));
    e.bias = Tensor({l.out_channels});
    e.frozen = !l.trainable;
    const int fan_in = l.kind == LayerKind::Conv
                           ? l.in_channels * l.params.kernel_size * l.params.kernel_size
                           : l.in_channels;
    const double limit = std::sqrt(6.0 / fan_in);
    Rng rng(hash_mix(seed, fnv1a(l.name)));
    for (auto& v : e.weights.data) v = static_cast<float>(rng.uniform(-limit, limit));
    store.add(std::move(e));
  }
  return store;
}

void sync_frozen_flags(const ModelGraph& graph, WeightStore& store) {
  for (const auto& l : graph.layers)
    if (l.has_weights() && store.has(l.name)) store.at(l.name).frozen = !l.trainable;
}

// --- VGGW file format -------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'V', 'G', 'G', 'W'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_tensor_entry(std::string& out, const std::string& name, const Tensor& t) {
  put_u32(out, static_cast<uint32_t>(name.size()));
  out.append(name);
  out.push_back(static_cast<char>(t.rank()));
  for (int d : t.shape) put_u32(out, static_cast<uint32_t>(d));
  for (float v : t.data) put_u32(out, std::bit_cast<uint32_t>(v));
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > buf.size()) fail(ErrorCode::Weights, "truncated weight file");
  }
  uint8_t u8() {
    need(1);
    return static_cast<uint8_t>(buf[pos++]);
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::string str(size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

struct ParsedEntry {
  std::string name;
  std::vector<int> dims;
  std::vector<float> values;
};

std::string dims_str(const std::vector<int>& dims) {
  std::string s = "(";
  for (size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(dims[i]);
  }
  return s + ")";
}

struct ParsedFile {
  Arch arch;
  uint8_t task_id;  // 0 = features-only
  std::vector<ParsedEntry> entries;
  std::unordered_map<std::string, size_t> index;
};

ParsedFile parse_weight_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open weight file " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r{buf};

  if (r.str(4) != std::string(kMagic, 4))
    fail(ErrorCode::Weights, "bad magic in weight file " + path);
  const uint32_t version = r.u32();
  if (version != kVersion)
    fail(ErrorCode::Weights, "unsupported weight file version " + std::to_string(version));

  ParsedFile f;
  const uint8_t arch_id = r.u8();
  if (arch_id != 1 && arch_id != 2)
    fail(ErrorCode::Weights, "unknown architecture id " + std::to_string(arch_id));
  f.arch = static_cast<Arch>(arch_id);
  f.task_id = r.u8();
  if (f.task_id != 0 && f.task_id != 2 && f.task_id != 3)
    fail(ErrorCode::Weights, "unknown task id " + std::to_string(f.task_id));

  const uint32_t count = r.u32();
  for (uint32_t i = 0; i < count; ++i) {
    ParsedEntry e;
    e.name = r.str(r.u32());
    const uint8_t rank = r.u8();
    if (rank == 0 || rank > 8)
      fail(ErrorCode::Weights, "entry " + e.name + " has rank " + std::to_string(rank));
    uint64_t n = 1;
    for (uint8_t d = 0; d < rank; ++d) {
      const uint32_t dim = r.u32();
      if (dim == 0) fail(ErrorCode::Weights, "zero dimension in entry " + e.name);
      e.dims.push_back(static_cast<int>(dim));
      n *= dim;
    }
    if (n > (buf.size() - r.pos) / 4) fail(ErrorCode::Weights, "truncated weight file");
    e.values.resize(n);
    for (uint64_t v = 0; v < n; ++v) e.values[v] = std::bit_cast<float>(r.u32());
    f.index[e.name] = f.entries.size();
    f.entries.push_back(std::move(e));
  }
  if (r.pos != buf.size())
    fail(ErrorCode::Weights, "trailing bytes in weight file " + path);
  return f;
}

void bind_parsed(WeightStore& store, const ModelGraph& graph, const ParsedFile& f,
                 const std::string& path) {
  if (f.arch != graph.arch)
    fail(ErrorCode::Weights, std::string("architecture id mismatch: file is ") +
                                 arch_name(f.arch) + ", graph is " + arch_name(graph.arch));
  const bool features_only = f.task_id == 0;
  if (!features_only && f.task_id != static_cast<uint8_t>(graph.task))
    fail(ErrorCode::Weights, std::string("task mismatch: file is ") +
                                 task_name(static_cast<Task>(f.task_id)) + ", graph is " +
                                 task_name(graph.task));

  size_t used = 0;
  for (const auto& l : graph.layers) {
    if (!l.has_weights()) continue;
    if (features_only && l.kind != LayerKind::Conv) continue;
    auto& entry = store.at(l.name);
    for (const char* part : {".weight", ".bias"}) {
      const std::string key = l.name + part;
      auto it = f.index.find(key);
      if (it == f.index.end())
        fail(ErrorCode::Weights, "weight file " + path + " is missing entry for layer " + l.name);
      const ParsedEntry& pe = f.entries[it->second];
      Tensor& dst = std::string(part) == ".weight" ? entry.weights : entry.bias;
      if (pe.dims != dst.shape)
        fail(ErrorCode::Weights, "shape mismatch for " + key + ": file " + dims_str(pe.dims) +
                                     ", graph expects " + dst.shape_str());
      dst.data = pe.values;
      ++used;
    }
  }
  if (used != f.entries.size()) {
    for (const auto& pe : f.entries) {
      const size_t dot = pe.name.rfind('.');
      const std::string layer = dot == std::string::npos ? pe.name : pe.name.substr(0, dot);
      bool known = false;
      for (const auto& l : graph.layers)
        if (l.has_weights() && l.name == layer && !(features_only && l.kind != LayerKind::Conv))
          known = true;
      if (!known)
        fail(ErrorCode::Weights, "unexpected entry " + pe.name + " in weight file " + path);
    }
  }
}

}  // namespace

void save_weights(const WeightStore& store, const ModelGraph& graph, const std::string& path,
                  bool features_only) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  out.push_back(static_cast<char>(graph.arch));
  out.push_back(static_cast<char>(features_only ? 0 : static_cast<uint8_t>(graph.task)));

  uint32_t count = 0;
  for (const auto& l : graph.layers)
    if (l.has_weights() && !(features_only && l.kind != LayerKind::Conv)) count += 2;
  put_u32(out, count);

  for (const auto& l : graph.layers) {
    if (!l.has_weights() || (features_only && l.kind != LayerKind::Conv)) continue;
    const auto& e = store.at(l.name);
    put_tensor_entry(out, l.name + ".weight", e.weights);
    put_tensor_entry(out, l.name + ".bias", e.bias);
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::Io, "cannot write weight file " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) fail(ErrorCode::Io, "write failed for " + path);
}

void load_weights(WeightStore& store, const ModelGraph& graph, const std::string& path) {
  bind_parsed(store, graph, parse_weight_file(path), path);
  sync_frozen_flags(graph, store);
}

OpenedModel open_weights(const std::string& path) {
  const ParsedFile f = parse_weight_file(path);
  if (f.task_id == 0)
    fail(ErrorCode::Weights,
         "weight file " + path + " is features-only; load it into a configured model instead");

  auto find = [&](const std::string& name) -> const ParsedEntry& {
    auto it = f.index.find(name);
    if (it == f.index.end())
      fail(ErrorCode::Weights, "weight file " + path + " is missing entry for layer " +
                                   name.substr(0, name.rfind('.')));
    return f.entries[it->second];
  };

  const ParsedEntry& conv1 = find("conv1_1.weight");
  if (conv1.dims.size() != 4 || 64 % conv1.dims[0] != 0)
    fail(ErrorCode::Weights, "conv1_1 entry has unexpected shape");
  const int width_div = 64 / conv1.dims[0];

  const ParsedEntry& fc1 = find("fc1.weight");
  if (fc1.dims.size() != 2) fail(ErrorCode::Weights, "fc1 entry has unexpected shape");
  const int last_width = 512 / width_div;
  if (fc1.dims[1] % last_width != 0)
    fail(ErrorCode::Weights, "fc1 width is inconsistent with conv widths");
  const int area = fc1.dims[1] / last_width;
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(area))));
  if (side * side != area)
    fail(ErrorCode::Weights, "fc1 width does not describe a square feature map");

  OpenedModel m;
  m.graph = build_vgg_features(f.arch, static_cast<Task>(f.task_id), width_div, side * 32);
  attach_finetune_head(m.graph, static_cast<Task>(f.task_id));
  m.store = init_weights(m.graph, 0);
  bind_parsed(m.store, m.graph, f, path);
  return m;
}

// ---------------------------------------------------------------------------
// forward / backward

namespace {

// index of the first trainable weight layer; layers below it never see backward
size_t first_backward_layer(const ModelGraph& g) {
  for (size_t i = 0; i < g.layers.size(); ++i)
    if (g.layers[i].has_weights() && g.layers[i].trainable) return i;
  return g.layers.size();
}

Tensor reshape(const Tensor& t, std::vector<int> shape) {
  Tensor out(std::move(shape), t.data);
  return out;
}

void add_in_place(Tensor& dst, const Tensor& src) {
  if (dst.data.empty()) {
    dst = src;
    return;
  }
  if (!same_shape(dst, src)) fail(ErrorCode::Dimension, "gradient shape mismatch");
  for (size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace

size_t flatten_index(const ModelGraph& graph) {
  for (size_t i = 0; i < graph.layers.size(); ++i)
    if (graph.layers[i].kind == LayerKind::Flatten) return i;
  fail(ErrorCode::State, "graph has no flatten layer");
}

bool features_frozen(const ModelGraph& graph) {
  for (const auto& l : graph.layers) {
    if (l.kind == LayerKind::Flatten) break;
    if (l.has_weights() && l.trainable) return false;
  }
  return true;
}

Tensor forward_pass(const ModelGraph& graph, const WeightStore& store, const Tensor& batch,
                    RunMode mode, ForwardTrace* trace, uint64_t dropout_seed) {
  if (!graph.head_attached) fail(ErrorCode::State, "forward: graph has no classifier head");
  if (batch.rank() != 4 || batch.dim(1) != graph.input_channels ||
      batch.dim(2) != graph.input_h || batch.dim(3) != graph.input_w)
    fail(ErrorCode::Dimension,
         "forward: input must be (N," + std::to_string(graph.input_channels) + "," +
             std::to_string(graph.input_h) + "," + std::to_string(graph.input_w) + "), got " +
             batch.shape_str());
  return forward_range(graph, store, batch, 0, graph.layers.size(), mode, trace, dropout_seed);
}

Tensor forward_range(const ModelGraph& graph, const WeightStore& store, const Tensor& input,
                     size_t begin, size_t end, RunMode mode, ForwardTrace* trace,
                     uint64_t dropout_seed) {
  const bool training = mode == RunMode::Training;
  const size_t nlayers = graph.layers.size();
  if (end > nlayers || begin > end) fail(ErrorCode::State, "forward: bad layer range");
  const size_t first_bw = training ? first_backward_layer(graph) : nlayers;
  if (training && trace) {
    trace->layer_inputs.assign(nlayers, Tensor());
    trace->pools.assign(nlayers, MaxPoolRecord<float>());
    trace->dropouts.assign(nlayers, DropoutState());
    trace->valid = false;
  }

  Tensor cur = input;
  for (size_t i = begin; i < end; ++i) {
    const LayerSpec& l = graph.layers[i];
    const bool record = training && trace && i >= first_bw;
    switch (l.kind) {
      case LayerKind::Conv: {
        const auto& e = store.at(l.name);
        if (record) trace->layer_inputs[i] = cur;
        cur = conv2d_forward(cur, e.weights, e.bias, l.params);
        break;
      }
      case LayerKind::MaxPool: {
        auto rec = maxpool2x2_forward(cur);
        cur = rec.output;
        if (record) trace->pools[i] = std::move(rec);
        break;
      }
      case LayerKind::Flatten: {
        cur = reshape(cur, {cur.dim(0), cur.dim(1) * cur.dim(2) * cur.dim(3)});
        break;
      }
      case LayerKind::Dense: {
        const auto& e = store.at(l.name);
        if (record) trace->layer_inputs[i] = cur;
        cur = dense_forward(cur, e.weights, e.bias);
        break;
      }
      case LayerKind::Relu: {
        if (record) trace->layer_inputs[i] = cur;
        cur = relu_forward(cur);
        break;
      }
      case LayerKind::Dropout: {
        if (!training) break;  // inference: identity
        DropoutState st;
        st.rate = l.dropout_rate;
        st.training = true;
        st.seed = hash_mix(dropout_seed, fnv1a(l.name));
        cur = dropout_forward(cur, st);
        if (record) trace->dropouts[i] = std::move(st);
        break;
      }
      case LayerKind::Output: {
        if (trace) trace->logits = cur;
        if (l.name == "softmax") {
          Tensor probs(cur.shape);
          const int n = cur.dim(0), k = cur.dim(1);
          for (int r = 0; r < n; ++r) {
            double mx = cur.at2(r, 0);
            for (int j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(cur.at2(r, j)));
            double sum = 0.0;
            for (int j = 0; j < k; ++j) sum += std::exp(static_cast<double>(cur.at2(r, j)) - mx);
            for (int j = 0; j < k; ++j)
              probs.at2(r, j) =
                  static_cast<float>(std::exp(static_cast<double>(cur.at2(r, j)) - mx) / sum);
          }
          cur = probs;
        } else {
          Tensor probs(cur.shape);
          for (size_t j = 0; j < cur.size(); ++j)
            probs.data[j] = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(cur.data[j]))));
          cur = probs;
        }
        break;
      }
    }
  }
  if (trace) {
    trace->probs = cur;
    trace->valid = training;
  }
  return cur;
}

void GradStore::ensure_shapes(const WeightStore& store) {
  weights.assign(store.entries.size(), Tensor());
  bias.assign(store.entries.size(), Tensor());
}

void GradStore::accumulate(const GradStore& other) {
  for (size_t i = 0; i < weights.size(); ++i) {
    if (!other.weights[i].data.empty()) add_in_place(weights[i], other.weights[i]);
    if (!other.bias[i].data.empty()) add_in_place(bias[i], other.bias[i]);
  }
}

void GradStore::scale(float factor) {
  for (auto& t : weights)
    for (auto& v : t.data) v *= factor;
  for (auto& t : bias)
    for (auto& v : t.data) v *= factor;
}

void backward_pass(const ModelGraph& graph, const WeightStore& store, const ForwardTrace& trace,
                   const Tensor& dlogits, GradStore& grads) {
  if (!trace.valid) fail(ErrorCode::State, "backward: no training-mode forward trace");
  if (!same_shape(dlogits, trace.logits))
    fail(ErrorCode::Dimension, "backward: upstream gradient shape " + dlogits.shape_str() +
                                   " does not match logits " + trace.logits.shape_str());
  if (grads.weights.size() != store.entries.size()) grads.ensure_shapes(store);

  const size_t first_bw = first_backward_layer(graph);
  if (first_bw == graph.layers.size()) return;  // nothing trainable

  // start just below the output activation; the loss provides dlogits
  size_t start = graph.layers.size();
  for (size_t i = graph.layers.size(); i-- > 0;) {
    if (graph.layers[i].kind == LayerKind::Output) {
      start = i;
      break;
    }
  }

  Tensor cur = dlogits;
  for (size_t i = start; i-- > first_bw;) {
    const LayerSpec& l = graph.layers[i];
    const bool need_input = i > first_bw;
    switch (l.kind) {
      case LayerKind::Dense: {
        const auto& e = store.at(l.name);
        auto g = dense_backward(trace.layer_inputs[i], e.weights, cur, need_input);
        const size_t slot = store.index.at(l.name);
        add_in_place(grads.weights[slot], g.weights);
        add_in_place(grads.bias[slot], g.bias);
        if (need_input) cur = std::move(g.input);
        break;
      }
      case LayerKind::Conv: {
        const auto& e = store.at(l.name);
        auto g = conv2d_backward(trace.layer_inputs[i], e.weights, l.params, cur, need_input);
        const size_t slot = store.index.at(l.name);
        add_in_place(grads.weights[slot], g.weights);
        add_in_place(grads.bias[slot], g.bias);
        if (need_input) cur = std::move(g.input);
        break;
      }
      case LayerKind::Relu:
        cur = relu_backward(trace.layer_inputs[i], cur);
        break;
      case LayerKind::Dropout:
        cur = dropout_backward(trace.dropouts[i], cur);
        break;
      case LayerKind::MaxPool:
        cur = maxpool2x2_backward(trace.pools[i], cur);
        break;
      case LayerKind::Flatten: {
        // recover the pre-flatten activation shape from the flatten spec
        const int area = l.out_channels / l.in_channels;
        const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(area))));
        cur = reshape(cur, {cur.dim(0), l.in_channels, side, side});
        break;
      }
      case LayerKind::Output:
        break;
    }
  }
}

}  // namespace vggft
