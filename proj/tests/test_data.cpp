#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "core/data.hpp"
#include "test_support.hpp"

using namespace vggft;
using testsup::ScratchDir;

TEST_CASE("binary PGM decodes to raw 0-255 values") {
  ScratchDir tmp("pgm");
  testsup::write_pgm(tmp.str("a.pgm"), 2, 2, {0, 255, 128, 64});
  const Tensor img = decode_image(tmp.str("a.pgm"));
  CHECK(img.shape == std::vector<int>{1, 2, 2});
  CHECK(img.data == std::vector<float>{0, 255, 128, 64});

  const Tensor rgb = replicate_to_rgb(img);
  CHECK(rgb.shape == std::vector<int>{3, 2, 2});
  for (int c = 0; c < 3; ++c) CHECK(rgb.at3(c, 1, 0) == 128.0f);
}

TEST_CASE("binary PPM separates channels into CHW planes") {
  ScratchDir tmp("ppm");
  std::ofstream out(tmp.str("a.ppm"), std::ios::binary);
  out << "P6\n1 1\n255\n";
  const unsigned char px[3] = {10, 20, 30};
  out.write(reinterpret_cast<const char*>(px), 3);
  out.close();

  const Tensor img = decode_image(tmp.str("a.ppm"));
  CHECK(img.shape == std::vector<int>{3, 1, 1});
  CHECK(img.data == std::vector<float>{10, 20, 30});
}

TEST_CASE("unknown magic bytes and truncated files are decode errors") {
  ScratchDir tmp("badimg");
  {
    std::ofstream out(tmp.str("bad.pgm"), std::ios::binary);
    out << "XX whatever";
  }
  try {
    decode_image(tmp.str("bad.pgm"));
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Decode);
  }

  {
    std::ofstream out(tmp.str("cut.pgm"), std::ios::binary);
    out << "P5\n4 4\n255\n";
    out << "ab";  // 2 of 16 bytes
  }
  CHECK_THROWS_WITH_AS(decode_image(tmp.str("cut.pgm")), doctest::Contains("truncated"), Error);

  {
    std::ofstream out(tmp.str("ascii.pgm"), std::ios::binary);
    out << "P2\n1 1\n255\n7\n";
  }
  CHECK_THROWS_WITH_AS(decode_image(tmp.str("ascii.pgm")), doctest::Contains("ASCII"), Error);
}

TEST_CASE("non-native extensions need a registered decoder hook") {
  ScratchDir tmp("hook");
  {
    std::ofstream out(tmp.str("x.png"), std::ios::binary);
    out << "fake";
  }
  try {
    decode_image(tmp.str("x.png"));
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Decode);
    CHECK(std::string(e.what()).find(".png") != std::string::npos);
  }

  register_decoder(".png", [](const std::string&) {
    Tensor t({1, 2, 2});
    t.data = {1, 2, 3, 4};
    return t;
  });
  const Tensor img = decode_image(tmp.str("x.png"));
  CHECK(img.data == std::vector<float>{1, 2, 3, 4});
  register_decoder(".png", nullptr);
}

TEST_CASE("resize to the same dims is the identity") {
  Rng rng(7);
  const Tensor img = testsup::random_tensor<float>({3, 192, 192}, rng, 0, 255);
  const Tensor out = resize_bilinear(img, 192, 192);
  CHECK(out.data == img.data);
}

TEST_CASE("resize of a constant image stays constant") {
  Tensor img({3, 5, 9});
  for (auto& v : img.data) v = 42.0f;
  const Tensor out = resize_bilinear(img, 192, 192);
  CHECK(out.shape == std::vector<int>{3, 192, 192});
  for (float v : out.data) CHECK(v == doctest::Approx(42.0f));
}

TEST_CASE("resize 2x2 to 4x4 follows the half-pixel interpolation formula") {
  Tensor img({1, 2, 2});
  img.data = {0, 0, 100, 100};
  const Tensor out = resize_bilinear(img, 4, 4);
  // rows sample src_y = -0.25, 0.25, 0.75, 1.25 -> clamped 0, 0.25, 0.75, 1
  const float expected[4] = {0, 25, 75, 100};
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) CHECK(out.at3(0, y, x) == doctest::Approx(expected[y]));
}

TEST_CASE("resize output stays within the input value range") {
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const int h = 1 + static_cast<int>(rng.index(8));
    const int w = 1 + static_cast<int>(rng.index(8));
    const Tensor img = testsup::random_tensor<float>({1, h, w}, rng, 0, 255);
    const float lo = *std::min_element(img.data.begin(), img.data.end());
    const float hi = *std::max_element(img.data.begin(), img.data.end());
    const Tensor out = resize_bilinear(img, 7, 5);
    for (float v : out.data) {
      CHECK(v >= lo - 1e-3f);
      CHECK(v <= hi + 1e-3f);
    }
  }
}

TEST_CASE("resize rejects non-positive targets") {
  Tensor img({1, 2, 2});
  try {
    resize_bilinear(img, 0, 4);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Config);
  }
}

TEST_CASE("normalization maps 0..255 to the expected ranges") {
  Tensor img({3, 1, 2});
  img.data = {0, 255, 51, 255, 0, 255};
  const Tensor s = normalize(img, Normalization{});
  CHECK(s.data[0] == 0.0f);
  CHECK(s.data[1] == 1.0f);
  CHECK(s.data[2] == doctest::Approx(0.2f));

  Normalization ms;
  ms.scheme = NormScheme::MeanStd;
  ms.mean = {0.5, 0.5, 0.5};
  ms.stddev = {0.5, 0.5, 0.5};
  const Tensor m = normalize(img, ms);
  CHECK(m.data[0] == doctest::Approx(-1.0f));
  CHECK(m.data[1] == doctest::Approx(1.0f));

  CHECK_NOTHROW(parse_normalization("scale01"));
  try {
    parse_normalization("zscore");
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Config);
  }
}

TEST_CASE("load_dataset orders classes lexicographically and counts every file") {
  ScratchDir tmp("ds");
  testsup::make_pgm_dataset(tmp.path() / "root", {{"zeta", 4}, {"alpha", 5}});
  const Dataset ds = load_dataset((tmp.path() / "root").string());
  CHECK(ds.class_names == std::vector<std::string>{"alpha", "zeta"});
  CHECK(ds.samples.size() == 9);
  int alpha = 0;
  for (const auto& s : ds.samples) alpha += s.label == 0;
  CHECK(alpha == 5);

  // deterministic ordering across reloads
  const Dataset again = load_dataset((tmp.path() / "root").string());
  REQUIRE(again.samples.size() == ds.samples.size());
  for (size_t i = 0; i < ds.samples.size(); ++i) CHECK(again.samples[i].path == ds.samples[i].path);
}

TEST_CASE("load_dataset error paths") {
  ScratchDir tmp("dserr");
  std::filesystem::create_directories(tmp.path() / "empty_root");
  try {
    load_dataset((tmp.path() / "empty_root").string());
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Input);
    CHECK(std::string(e.what()).find("no class") != std::string::npos);
  }

  std::filesystem::create_directories(tmp.path() / "root2" / "covid");
  try {
    load_dataset((tmp.path() / "root2").string());
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Input);
    CHECK(std::string(e.what()).find("covid") != std::string::npos);
  }
}

namespace {

std::vector<SampleRef> synthetic_class(int label, int n) {
  std::vector<SampleRef> out;
  for (int i = 0; i < n; ++i)
    out.push_back({"c" + std::to_string(label) + "/img" + std::to_string(i) + ".pgm", label});
  return out;
}

void check_counts(const DatasetSplit& split, int label, int64_t train, int64_t val,
                  int64_t test) {
  auto count = [&](const std::vector<SampleRef>& part) {
    return std::count_if(part.begin(), part.end(),
                         [&](const SampleRef& s) { return s.label == label; });
  };
  CHECK(count(split.train) == train);
  CHECK(count(split.validation) == val);
  CHECK(count(split.test) == test);
}

}  // namespace

TEST_CASE("stratified split partition counts at reference class sizes") {
  // class inventories: covid 278 / non_covid 978, and covid 278 / pneumonia 776 / normal 1120
  std::vector<SampleRef> samples = synthetic_class(0, 278);
  auto more = synthetic_class(1, 978);
  samples.insert(samples.end(), more.begin(), more.end());
  const DatasetSplit split = stratified_split(samples, {"covid", "non_covid"}, 9);

  check_counts(split, 0, 194, 28, 56);
  check_counts(split, 1, 684, 98, 196);
  CHECK(split.train.size() + split.validation.size() + split.test.size() == samples.size());

  std::vector<SampleRef> d2 = synthetic_class(0, 278);
  auto pneu = synthetic_class(1, 776);
  auto norm = synthetic_class(2, 1120);
  d2.insert(d2.end(), pneu.begin(), pneu.end());
  d2.insert(d2.end(), norm.begin(), norm.end());
  const DatasetSplit s2 = stratified_split(d2, {"covid", "normal", "pneumonia"}, 9);
  check_counts(s2, 1, 543, 78, 155);
  check_counts(s2, 2, 784, 112, 224);
}

TEST_CASE("stratified split of 10 samples gives 7/1/2") {
  const DatasetSplit split = stratified_split(synthetic_class(0, 10), {"only"}, 1);
  CHECK(split.train.size() == 7);
  CHECK(split.validation.size() == 1);
  CHECK(split.test.size() == 2);
}

TEST_CASE("split partitions are disjoint and exhaustive") {
  std::vector<SampleRef> samples = synthetic_class(0, 57);
  auto b = synthetic_class(1, 101);
  samples.insert(samples.end(), b.begin(), b.end());
  const DatasetSplit split = stratified_split(samples, {"a", "b"}, 33);

  std::set<std::string> seen;
  for (const auto* part : {&split.train, &split.validation, &split.test})
    for (const auto& s : *part) CHECK(seen.insert(s.path).second);
  CHECK(seen.size() == samples.size());
}

TEST_CASE("split is deterministic in the seed, counts invariant across seeds") {
  const auto samples = synthetic_class(0, 47);
  const DatasetSplit a = stratified_split(samples, {"c"}, 5);
  const DatasetSplit b = stratified_split(samples, {"c"}, 5);
  const DatasetSplit c = stratified_split(samples, {"c"}, 6);

  auto paths = [](const std::vector<SampleRef>& v) {
    std::vector<std::string> p;
    for (const auto& s : v) p.push_back(s.path);
    return p;
  };
  CHECK(paths(a.train) == paths(b.train));
  CHECK(paths(a.test) == paths(b.test));
  CHECK(paths(a.train) != paths(c.train));  // different shuffle
  CHECK(c.train.size() == a.train.size());  // same counts
  CHECK(c.test.size() == a.test.size());
}

TEST_CASE("classes below 3 samples cannot be split") {
  try {
    stratified_split(synthetic_class(0, 2), {"tiny_class"}, 1);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Input);
    CHECK(std::string(e.what()).find("tiny_class") != std::string::npos);
  }
}

TEST_CASE("manifest round trip preserves membership and is byte-stable") {
  ScratchDir tmp("manifest");
  std::vector<SampleRef> samples = synthetic_class(0, 12);
  auto b = synthetic_class(1, 9);
  samples.insert(samples.end(), b.begin(), b.end());
  const DatasetSplit split = stratified_split(samples, {"a", "b"}, 3);

  const std::string p1 = tmp.str("m1.csv");
  const std::string p2 = tmp.str("m2.csv");
  save_manifest(split, p1);
  save_manifest(split, p2);
  std::ifstream f1(p1), f2(p2);
  const std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  CHECK(s1.rfind("path,class,partition\n", 0) == 0);

  const DatasetSplit loaded = load_manifest(p1);
  CHECK(loaded.class_names == split.class_names);
  CHECK(loaded.train.size() == split.train.size());
  CHECK(loaded.test.size() == split.test.size());
  for (size_t i = 0; i < split.test.size(); ++i) {
    CHECK(loaded.test[i].path == split.test[i].path);
    CHECK(loaded.test[i].label == split.test[i].label);
  }
}

TEST_CASE("manifest rejects bad headers and unknown partitions") {
  ScratchDir tmp("manifest_bad");
  {
    std::ofstream out(tmp.str("h.csv"));
    out << "file,class,part\none,a,train\n";
  }
  CHECK_THROWS_WITH_AS(load_manifest(tmp.str("h.csv")), doctest::Contains("header"), Error);

  {
    std::ofstream out(tmp.str("p.csv"));
    out << "path,class,partition\none.pgm,a,holdout\n";
  }
  CHECK_THROWS_WITH_AS(load_manifest(tmp.str("p.csv")), doctest::Contains("holdout"), Error);
}

TEST_CASE("horizontal flip is an involution") {
  Rng rng(17);
  const Tensor img = testsup::random_tensor<float>({3, 6, 5}, rng, 0, 1);
  CHECK(flip_horizontal(flip_horizontal(img)).data == img.data);

  AugmentConfig cfg;
  cfg.rotation_deg = 0.0;
  cfg.flip_prob = 1.0;
  Rng r1(1), r2(2);
  const Tensor once = augment_image(img, cfg, r1);
  const Tensor twice = augment_image(once, cfg, r2);
  CHECK(twice.data == img.data);
}

TEST_CASE("zero-angle rotation is the identity") {
  Rng rng(19);
  const Tensor img = testsup::random_tensor<float>({3, 8, 8}, rng, 0, 1);
  CHECK(rotate_bilinear(img, 0.0).data == img.data);

  AugmentConfig cfg;
  cfg.rotation_deg = 0.0;
  cfg.flip_prob = 0.0;
  Rng r(3);
  CHECK(augment_image(img, cfg, r).data == img.data);
}

TEST_CASE("90 degree rotation permutes an asymmetric 2x2 pattern") {
  Tensor img({1, 2, 2});
  img.data = {1, 2, 3, 4};  // [[1,2],[3,4]]
  const Tensor rot = rotate_bilinear(img, 90.0);
  // positive angle turns the image clockwise in row/col coordinates
  CHECK(rot.at3(0, 0, 0) == doctest::Approx(3).epsilon(1e-6));
  CHECK(rot.at3(0, 0, 1) == doctest::Approx(1).epsilon(1e-6));
  CHECK(rot.at3(0, 1, 0) == doctest::Approx(4).epsilon(1e-6));
  CHECK(rot.at3(0, 1, 1) == doctest::Approx(2).epsilon(1e-6));
}

TEST_CASE("augmentation preserves the tensor shape") {
  Rng rng(23);
  const Tensor img = testsup::random_tensor<float>({3, 192, 192}, rng, 0, 1);
  AugmentConfig cfg;  // defaults: rotation 15, flip 0.5
  Rng r(7);
  const Tensor out = augment_image(img, cfg, r);
  CHECK(out.shape == img.shape);
}

TEST_CASE("per-sample augmentation streams are deterministic") {
  CHECK(augment_stream_seed(1, "a/b.pgm", 3) == augment_stream_seed(1, "a/b.pgm", 3));
  CHECK(augment_stream_seed(1, "a/b.pgm", 3) != augment_stream_seed(1, "a/b.pgm", 4));
  CHECK(augment_stream_seed(1, "a/b.pgm", 3) != augment_stream_seed(2, "a/b.pgm", 3));
}

TEST_CASE("the decode-resize-normalize chain is bit-deterministic per file") {
  ScratchDir tmp("chain");
  testsup::make_pgm_dataset(tmp.path() / "root", {{"one", 1}}, 16);
  DiskSampleSource src((tmp.path() / "root").string(), {{"one/img0000.pgm", 0}}, 64);
  const Tensor a = src.image(0);
  const Tensor b = src.image(0);
  CHECK(a.shape == std::vector<int>{3, 64, 64});
  CHECK(a.data == b.data);
  for (float v : a.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}
