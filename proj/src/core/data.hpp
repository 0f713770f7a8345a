#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace vggft {

// ---------------------------------------------------------------------------
// image decoding. Binary PGM (P5) and PPM (P6) are built in; other formats
// go through decoder hooks registered per extension. Decoders return raw
// pixel values in [0,255] as [C,H,W].

using DecoderHook = std::function<Tensor(const std::string& path)>;
void register_decoder(const std::string& extension, DecoderHook hook);

Tensor decode_image(const std::string& path);

// grayscale [1,H,W] replicated to [3,H,W]; [3,H,W] passes through
Tensor replicate_to_rgb(const Tensor& image);

Tensor resize_bilinear(const Tensor& image, int out_h, int out_w);

enum class NormScheme { Scale01, MeanStd };

struct Normalization {
  NormScheme scheme = NormScheme::Scale01;
  std::array<double, 3> mean{0.0, 0.0, 0.0};  // in [0,1] units, applied after /255
  std::array<double, 3> stddev{1.0, 1.0, 1.0};
};

Normalization parse_normalization(const std::string& name);
Tensor normalize(const Tensor& image, const Normalization& norm);

// ---------------------------------------------------------------------------
// dataset layout: <root>/<class_name>/<image files>

struct SampleRef {
  std::string path;  // relative to the dataset root
  int label = 0;
};

struct Dataset {
  std::string root;
  std::vector<std::string> class_names;  // sorted lexicographically
  std::vector<SampleRef> samples;
};

Dataset load_dataset(const std::string& root);

struct DatasetSplit {
  std::vector<std::string> class_names;
  std::vector<SampleRef> train;
  std::vector<SampleRef> validation;
  std::vector<SampleRef> test;
  uint64_t seed = 0;
};

// Per class: shuffle, take round-half-up 20% as test and 10% as validation,
// the remainder trains. Every class needs at least 3 samples.
DatasetSplit stratified_split(const Dataset& dataset, uint64_t seed);
DatasetSplit stratified_split(const std::vector<SampleRef>& samples,
                              const std::vector<std::string>& class_names, uint64_t seed);

// CSV manifest: header "path,class,partition"
void save_manifest(const DatasetSplit& split, const std::string& path);
DatasetSplit load_manifest(const std::string& path);

// ---------------------------------------------------------------------------
// augmentation: horizontal flip, then rotation about the image center with
// bilinear resampling and zero fill. Positive angles turn the image
// clockwise in row/col coordinates.

struct AugmentConfig {
  double rotation_deg = 15.0;  // angle drawn uniformly from [-r, +r]
  double flip_prob = 0.5;
  bool augment_validation = true;  // the training protocol augments validation too
};

Tensor flip_horizontal(const Tensor& image);
Tensor rotate_bilinear(const Tensor& image, double angle_deg);

Tensor augment_image(const Tensor& image, const AugmentConfig& config, Rng& rng);

// per-sample augmentation stream: seed ^ hash(sample id, epoch)
inline uint64_t augment_stream_seed(uint64_t seed, std::string_view sample_id, uint64_t epoch) {
  return seed ^ hash_mix(fnv1a(sample_id), epoch);
}

// ---------------------------------------------------------------------------
// sample sources feed the training/evaluation loops

class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual size_t size() const = 0;
  virtual int label(size_t i) const = 0;
  virtual const std::string& id(size_t i) const = 0;
  // decoded, resized, normalized image; augmentation is applied by the caller
  virtual Tensor image(size_t i) const = 0;
};

class DiskSampleSource : public SampleSource {
 public:
  DiskSampleSource(std::string root, std::vector<SampleRef> refs, int target_hw,
                   Normalization norm = {});

  size_t size() const override { return refs_.size(); }
  int label(size_t i) const override { return refs_[i].label; }
  const std::string& id(size_t i) const override { return refs_[i].path; }
  Tensor image(size_t i) const override;

 private:
  std::string root_;
  std::vector<SampleRef> refs_;
  int target_hw_;
  Normalization norm_;
};

class MemorySampleSource : public SampleSource {
 public:
  void add(std::string id, int label, Tensor image);

  size_t size() const override { return images_.size(); }
  int label(size_t i) const override { return labels_[i]; }
  const std::string& id(size_t i) const override { return ids_[i]; }
  Tensor image(size_t i) const override { return images_[i]; }

 private:
  std::vector<std::string> ids_;
  std::vector<int> labels_;
  std::vector<Tensor> images_;
};

}  // namespace vggft
