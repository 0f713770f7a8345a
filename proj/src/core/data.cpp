#include "core/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#include "core/error.hpp"

namespace fs = std::filesystem;

namespace vggft {

// ---------------------------------------------------------------------------
// decoding

namespace {

std::mutex g_decoder_mutex;
std::map<std::string, DecoderHook>& decoder_registry() {
  static std::map<std::string, DecoderHook> reg;
  return reg;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

// PNM header token, skipping whitespace and '#' comments
std::string pnm_token(std::istream& in, const std::string& path) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {}
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) fail(ErrorCode::Decode, "truncated header in " + path);
  return tok;
}

int pnm_int(std::istream& in, const std::string& path) {
  const std::string tok = pnm_token(in, path);
  try {
    return std::stoi(tok);
  } catch (const std::exception&) {
    fail(ErrorCode::Decode, "bad header value '" + tok + "' in " + path);
  }
}

Tensor decode_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Decode, "cannot open image " + path);

  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || (m1 != '5' && m1 != '6')) {
    if (m0 == 'P' && (m1 == '2' || m1 == '3'))
      fail(ErrorCode::Decode, "ASCII PNM is not supported, convert " + path + " to binary P5/P6");
    fail(ErrorCode::Decode, "unknown image format in " + path);
  }
  const int channels = m1 == '6' ? 3 : 1;
  const int w = pnm_int(in, path);
  const int h = pnm_int(in, path);
  const int maxval = pnm_int(in, path);
  if (w <= 0 || h <= 0) fail(ErrorCode::Decode, "bad dimensions in " + path);
  if (maxval <= 0 || maxval > 255)
    fail(ErrorCode::Decode, "only 8-bit PNM is supported, " + path + " has maxval " +
                                std::to_string(maxval));

  const size_t n = static_cast<size_t>(w) * h * channels;
  std::vector<unsigned char> raw(n);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n)
    fail(ErrorCode::Decode, "truncated pixel data in " + path);

  Tensor img({channels, h, w});
  const double rescale = 255.0 / maxval;
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        img.at3(c, y, x) =
            static_cast<float>(raw[(static_cast<size_t>(y) * w + x) * channels + c] * rescale);
  return img;
}

}  // namespace

void register_decoder(const std::string& extension, DecoderHook hook) {
  std::lock_guard<std::mutex> lock(g_decoder_mutex);
  decoder_registry()[lower(extension)] = std::move(hook);
}

Tensor decode_image(const std::string& path) {
  const std::string ext = lower(fs::path(path).extension().string());
  if (ext == ".pgm" || ext == ".ppm") return decode_pnm(path);

  DecoderHook hook;
  {
    std::lock_guard<std::mutex> lock(g_decoder_mutex);
    auto it = decoder_registry().find(ext);
    if (it != decoder_registry().end()) hook = it->second;
  }
  if (hook) return hook(path);
  fail(ErrorCode::Decode, "no decoder registered for extension '" + ext + "' (" + path + ")");
}

Tensor replicate_to_rgb(const Tensor& image) {
  if (image.rank() != 3)
    fail(ErrorCode::Dimension, "image must be [C,H,W], got " + image.shape_str());
  if (image.dim(0) == 3) return image;
  if (image.dim(0) != 1)
    fail(ErrorCode::Decode, "expected 1 or 3 channels, got " + std::to_string(image.dim(0)));
  Tensor out({3, image.dim(1), image.dim(2)});
  const size_t plane = image.size();
  for (int c = 0; c < 3; ++c)
    std::copy(image.data.begin(), image.data.end(), out.data.begin() + c * plane);
  return out;
}

Tensor resize_bilinear(const Tensor& image, int out_h, int out_w) {
  if (image.rank() != 3)
    fail(ErrorCode::Dimension, "resize: image must be [C,H,W], got " + image.shape_str());
  if (out_h <= 0 || out_w <= 0)
    fail(ErrorCode::Config, "resize: target dims must be positive");

  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (h == out_h && w == out_w) return image;

  Tensor out({c, out_h, out_w});
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (int y = 0; y < out_h; ++y) {
    // half-pixel-center alignment
    double src_y = (y + 0.5) * sy - 0.5;
    src_y = std::clamp(src_y, 0.0, static_cast<double>(h - 1));
    const int y0 = static_cast<int>(src_y);
    const int y1 = std::min(y0 + 1, h - 1);
    const double wy = src_y - y0;
    for (int x = 0; x < out_w; ++x) {
      double src_x = (x + 0.5) * sx - 0.5;
      src_x = std::clamp(src_x, 0.0, static_cast<double>(w - 1));
      const int x0 = static_cast<int>(src_x);
      const int x1 = std::min(x0 + 1, w - 1);
      const double wx = src_x - x0;
      for (int ch = 0; ch < c; ++ch) {
        const double v = (1.0 - wy) * ((1.0 - wx) * image.at3(ch, y0, x0) +
                                       wx * image.at3(ch, y0, x1)) +
                         wy * ((1.0 - wx) * image.at3(ch, y1, x0) +
                               wx * image.at3(ch, y1, x1));
        out.at3(ch, y, x) = static_cast<float>(v);
      }
    }
  }
  return out;
}

Normalization parse_normalization(const std::string& name) {
  if (name == "scale01") return {};
  if (name == "meanstd") {
    Normalization n;
    n.scheme = NormScheme::MeanStd;
    n.mean = {0.5, 0.5, 0.5};
    n.stddev = {0.5, 0.5, 0.5};
    return n;
  }
  fail(ErrorCode::Config, "unknown normalization scheme '" + name + "'");
}

Tensor normalize(const Tensor& image, const Normalization& norm) {
  if (image.rank() != 3)
    fail(ErrorCode::Dimension, "normalize: image must be [C,H,W], got " + image.shape_str());
  Tensor out(image.shape);
  const int c = image.dim(0);
  const size_t plane = image.size() / c;
  for (int ch = 0; ch < c; ++ch) {
    const double mean = norm.scheme == NormScheme::MeanStd ? norm.mean[ch % 3] : 0.0;
    const double inv_std =
        norm.scheme == NormScheme::MeanStd ? 1.0 / norm.stddev[ch % 3] : 1.0;
    for (size_t i = 0; i < plane; ++i) {
      const double scaled = image.data[ch * plane + i] / 255.0;
      out.data[ch * plane + i] = static_cast<float>((scaled - mean) * inv_std);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// dataset loading and splits

Dataset load_dataset(const std::string& root) {
  if (!fs::is_directory(root)) fail(ErrorCode::Input, "dataset root " + root + " is not a directory");

  Dataset ds;
  ds.root = root;
  std::vector<std::string> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) class_dirs.push_back(entry.path().filename().string());
  }
  if (class_dirs.empty()) fail(ErrorCode::Input, "dataset root " + root + " contains no class directories");
  std::sort(class_dirs.begin(), class_dirs.end());
  ds.class_names = class_dirs;

  for (size_t label = 0; label < class_dirs.size(); ++label) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(fs::path(root) / class_dirs[label])) {
      if (!entry.is_regular_file()) continue;
      const std::string name = entry.path().filename().string();
      if (!name.empty() && name[0] == '.') continue;
      files.push_back(name);
    }
    if (files.empty())
      fail(ErrorCode::Input, "class directory " + class_dirs[label] + " contains no images");
    std::sort(files.begin(), files.end());
    for (const auto& f : files)
      ds.samples.push_back({class_dirs[label] + "/" + f, static_cast<int>(label)});
  }
  return ds;
}

namespace {

// round-half-up: 0.2*278 = 55.6 -> 56
int64_t round_half_up(double x) { return static_cast<int64_t>(std::floor(x + 0.5)); }

}  // namespace

DatasetSplit stratified_split(const std::vector<SampleRef>& samples,
                              const std::vector<std::string>& class_names, uint64_t seed) {
  if (class_names.empty()) fail(ErrorCode::Input, "split: no classes");
  DatasetSplit split;
  split.class_names = class_names;
  split.seed = seed;

  for (size_t label = 0; label < class_names.size(); ++label) {
    std::vector<SampleRef> members;
    for (const auto& s : samples)
      if (s.label == static_cast<int>(label)) members.push_back(s);

    const int64_t n = static_cast<int64_t>(members.size());
    if (n < 3)
      fail(ErrorCode::Input, "class " + class_names[label] + " has only " + std::to_string(n) +
                                 " samples; at least 3 are required to split");

    Rng rng(seed ^ fnv1a(class_names[label]));
    shuffle_in_place(members, rng);

    const int64_t n_test = round_half_up(0.2 * static_cast<double>(n));
    const int64_t n_val = round_half_up(0.1 * static_cast<double>(n));
    const int64_t n_train = n - n_test - n_val;
    if (n_train < 1)
      fail(ErrorCode::Input, "class " + class_names[label] + " is too small to split");

    for (int64_t i = 0; i < n_train; ++i) split.train.push_back(members[i]);
    for (int64_t i = n_train; i < n_train + n_val; ++i) split.validation.push_back(members[i]);
    for (int64_t i = n_train + n_val; i < n; ++i) split.test.push_back(members[i]);
  }
  return split;
}

DatasetSplit stratified_split(const Dataset& dataset, uint64_t seed) {
  return stratified_split(dataset.samples, dataset.class_names, seed);
}

void save_manifest(const DatasetSplit& split, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write manifest " + path);
  out << "path,class,partition\n";
  auto emit = [&](const std::vector<SampleRef>& part, const char* name) {
    for (const auto& s : part)
      out << s.path << "," << split.class_names[s.label] << "," << name << "\n";
  };
  emit(split.train, "train");
  emit(split.validation, "validation");
  emit(split.test, "test");
  if (!out) fail(ErrorCode::Io, "write failed for manifest " + path);
}

DatasetSplit load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open manifest " + path);

  std::string line;
  if (!std::getline(in, line) || line != "path,class,partition")
    fail(ErrorCode::Input, "manifest " + path + " has an unexpected header");

  struct Row {
    std::string sample_path, cls, part;
  };
  std::vector<Row> rows;
  std::vector<std::string> classes;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    Row r;
    if (!std::getline(ss, r.sample_path, ',') || !std::getline(ss, r.cls, ',') ||
        !std::getline(ss, r.part))
      fail(ErrorCode::Input, "manifest " + path + " line " + std::to_string(line_no) +
                                 " is malformed");
    if (r.part != "train" && r.part != "validation" && r.part != "test")
      fail(ErrorCode::Input, "manifest " + path + " line " + std::to_string(line_no) +
                                 " has unknown partition '" + r.part + "'");
    if (std::find(classes.begin(), classes.end(), r.cls) == classes.end())
      classes.push_back(r.cls);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) fail(ErrorCode::Input, "manifest " + path + " has no samples");

  std::sort(classes.begin(), classes.end());
  DatasetSplit split;
  split.class_names = classes;
  for (const auto& r : rows) {
    const int label = static_cast<int>(
        std::find(classes.begin(), classes.end(), r.cls) - classes.begin());
    SampleRef ref{r.sample_path, label};
    if (r.part == "train")
      split.train.push_back(ref);
    else if (r.part == "validation")
      split.validation.push_back(ref);
    else
      split.test.push_back(ref);
  }
  return split;
}

// ---------------------------------------------------------------------------
// augmentation

Tensor flip_horizontal(const Tensor& image) {
  if (image.rank() != 3)
    fail(ErrorCode::Dimension, "flip: image must be [C,H,W], got " + image.shape_str());
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor flipped(image.shape);
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) flipped.at3(ch, y, x) = image.at3(ch, y, w - 1 - x);
  return flipped;
}

Tensor rotate_bilinear(const Tensor& image, double angle_deg) {
  if (image.rank() != 3)
    fail(ErrorCode::Dimension, "rotate: image must be [C,H,W], got " + image.shape_str());
  if (angle_deg == 0.0) return image;

  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const double theta = angle_deg * 3.14159265358979323846 / 180.0;
  const double ct = std::cos(theta), st = std::sin(theta);
  const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;

  Tensor out(image.shape);
  for (int y = 0; y < h; ++y) {
    const double dy = y - cy;
    for (int x = 0; x < w; ++x) {
      const double dx = x - cx;
      const double sy = cy - dx * st + dy * ct;
      const double sx = cx + dx * ct + dy * st;
      const int y0 = static_cast<int>(std::floor(sy));
      const int x0 = static_cast<int>(std::floor(sx));
      const double wy = sy - y0;
      const double wx = sx - x0;
      auto sample = [&](int ch, int yy, int xx) -> double {
        if (yy < 0 || yy >= h || xx < 0 || xx >= w) return 0.0;  // zero fill
        return image.at3(ch, yy, xx);
      };
      for (int ch = 0; ch < c; ++ch) {
        const double v = (1.0 - wy) * ((1.0 - wx) * sample(ch, y0, x0) +
                                       wx * sample(ch, y0, x0 + 1)) +
                         wy * ((1.0 - wx) * sample(ch, y0 + 1, x0) +
                               wx * sample(ch, y0 + 1, x0 + 1));
        out.at3(ch, y, x) = static_cast<float>(v);
      }
    }
  }
  return out;
}

Tensor augment_image(const Tensor& image, const AugmentConfig& config, Rng& rng) {
  if (config.rotation_deg < 0.0) fail(ErrorCode::Config, "rotation range must be >= 0");
  if (config.flip_prob < 0.0 || config.flip_prob > 1.0)
    fail(ErrorCode::Config, "flip probability must be in [0,1]");

  const bool flip = rng.uniform() < config.flip_prob;
  const double angle_deg = rng.uniform(-config.rotation_deg, config.rotation_deg);

  Tensor cur = flip ? flip_horizontal(image) : image;
  return rotate_bilinear(cur, angle_deg);
}

// ---------------------------------------------------------------------------
// sources

DiskSampleSource::DiskSampleSource(std::string root, std::vector<SampleRef> refs, int target_hw,
                                   Normalization norm)
    : root_(std::move(root)), refs_(std::move(refs)), target_hw_(target_hw), norm_(norm) {}

Tensor DiskSampleSource::image(size_t i) const {
  const std::string full = (fs::path(root_) / refs_[i].path).string();
  Tensor img = replicate_to_rgb(decode_image(full));
  img = resize_bilinear(img, target_hw_, target_hw_);
  return normalize(img, norm_);
}

void MemorySampleSource::add(std::string id, int label, Tensor image) {
  ids_.push_back(std::move(id));
  labels_.push_back(label);
  images_.push_back(std::move(image));
}

}  // namespace vggft
