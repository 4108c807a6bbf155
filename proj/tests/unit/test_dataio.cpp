#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <vector>

#include "doctest.h"
#include "mript/dataio.hpp"
#include "mript/error.hpp"
#include "mript/fileutil.hpp"
#include "test_util.hpp"

using namespace mript;
using namespace mript::dataio;
using degradation::MaskFamily;
using degradation::MaskSpec;
using testutil::random_tensor;
using testutil::TempDir;
using testutil::code_of;

namespace {

ImageTensor image_of(std::size_t h, std::size_t w, std::vector<float> v) {
  return ImageTensor({1, h, w}, std::move(v));
}

bool bitwise_equal(const Tensor<float>& a, const Tensor<float>& b) {
  return a.dims() == b.dims() &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("raster round trip is bitwise for many shapes") {
  TempDir dir("raster");
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    Dims dims;
    const std::size_t rank = 1 + rng() % 4;
    for (std::size_t i = 0; i < rank; ++i) dims.push_back(1 + rng() % 7);
    auto t = random_tensor<float>(dims, seed, -1e3, 1e3);
    t[0] = -0.0f;
    const auto path = dir / ("t" + std::to_string(seed) + ".mrit");
    save_raster(path, t);
    CHECK(bitwise_equal(load_raster(path), t));
    CHECK(bitwise_equal(decode_raster(encode_raster(t)), t));
  }
}

TEST_CASE("raster header layout") {
  const auto bytes = encode_raster(Tensor<float>({2, 3}, 1.0f));
  REQUIRE(bytes.size() == 4 + 3 + 2 * 4 + 6 * 4);
  CHECK(std::memcmp(bytes.data(), "MRIT", 4) == 0);
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 1);
  CHECK(bytes[6] == 2);
  CHECK(bytes[7] == 2);
  CHECK(bytes[11] == 3);
}

TEST_CASE("raster errors are distinct") {
  auto good = encode_raster(Tensor<float>({4}, 2.0f));
  auto bad_magic = good;
  std::memcpy(bad_magic.data(), "XXXX", 4);
  CHECK(code_of([&] { decode_raster(bad_magic); }) == int(ErrorCode::kBadMagic));
  auto truncated = good;
  truncated.pop_back();
  CHECK(code_of([&] { decode_raster(truncated); }) == int(ErrorCode::kTruncated));
  auto version = good;
  version[4] = 2;
  CHECK(code_of([&] { decode_raster(version); }) == int(ErrorCode::kVersionMismatch));
  CHECK(code_of([&] { load_raster("/nonexistent/dir/x.mrit"); }) == int(ErrorCode::kIo));
}

TEST_CASE("center crop") {
  std::vector<float> v(16);
  for (std::size_t i = 0; i < 16; ++i) v[i] = static_cast<float>(i);
  const auto img = image_of(4, 4, v);
  const auto c = center_crop(img, 2, 2);
  CHECK(c.at(0, 0, 0) == 5.0f);
  CHECK(c.at(0, 0, 1) == 6.0f);
  CHECK(c.at(0, 1, 0) == 9.0f);
  CHECK(c.at(0, 1, 1) == 10.0f);
  const auto big = random_tensor<float>({1, 320, 320}, 1, 0, 1);
  CHECK(bitwise_equal(center_crop(big, 320, 320), big));
  CHECK(code_of([&] { center_crop(big, 321, 321); }) == int(ErrorCode::kInvalidArgument));
}

TEST_CASE("bilinear resize") {
  CHECK(resize_bilinear(image_of(2, 2, {0, 1, 1, 0}), 1, 1).at(0, 0, 0) ==
        doctest::Approx(0.5));
  const auto img = random_tensor<float>({1, 9, 7}, 3, 0, 1);
  CHECK(testutil::max_abs_diff(resize_bilinear(img, 9, 7), img) < 1e-6);
  const auto up = resize_bilinear(ImageTensor({1, 5, 5}, 0.3f), 17, 11);
  CHECK(up.dims() == Dims{1, 17, 11});
  for (float x : up.data()) CHECK(x == doctest::Approx(0.3f));
}

TEST_CASE("minmax normalization") {
  const auto n = normalize_minmax(image_of(1, 3, {0, 2, 4}));
  CHECK(n[0] == 0.0f);
  CHECK(n[1] == doctest::Approx(0.5));
  CHECK(n[2] == 1.0f);
  const auto flat = normalize_minmax(ImageTensor({1, 3, 3}, 7.0f));
  for (float x : flat.data()) CHECK(x == 0.0f);
  const auto r = normalize_minmax(random_tensor<float>({1, 8, 8}, 2, -5, 9));
  CHECK(*std::min_element(r.data().begin(), r.data().end()) == 0.0f);
  CHECK(*std::max_element(r.data().begin(), r.data().end()) == 1.0f);
  auto nan = image_of(1, 2, {0, std::nanf("")});
  CHECK(code_of([&] { normalize_minmax(nan); }) == int(ErrorCode::kNonFinite));
}

TEST_CASE("preprocess pipeline yields unit-range square images") {
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{400, 360}, {256, 300}, {320, 320}}) {
    const auto img = random_tensor<float>({1, h, w}, h + w, -3, 12);
    const auto out = preprocess(img, 224);
    CHECK(out.dims() == Dims{1, 224, 224});
    for (float x : out.data()) {
      CHECK(x >= 0.0f);
      CHECK(x <= 1.0f);
    }
  }
}

TEST_CASE("png round trip at 8 bits") {
  TempDir dir("png");
  std::vector<float> v(12 * 10);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i % 256) / 255.0f;
  const auto img = image_of(12, 10, v);
  save_png(dir / "a.png", img);
  const auto back = load_png(dir / "a.png");
  CHECK(back.dims() == img.dims());
  CHECK(testutil::max_abs_diff(back, img) < 1e-6);
  CHECK(testutil::max_abs_diff(load_image(dir / "a.png"), img) < 1e-6);
}

TEST_CASE("phantoms are deterministic, bounded and distinct") {
  PhantomSpec s;
  s.seed = 42;
  CHECK(bitwise_equal(generate_phantom(s), generate_phantom(s)));
  std::size_t distinct_pairs = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    PhantomSpec a, b;
    a.seed = 2 * i;
    b.seed = 2 * i + 1;
    const auto x = generate_phantom(a), y = generate_phantom(b);
    std::size_t diff = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      CHECK(x[k] >= 0.0f);
      CHECK(x[k] <= 1.0f);
      if (x[k] != y[k]) ++diff;
    }
    if (diff * 100 >= x.size()) ++distinct_pairs;
  }
  CHECK(distinct_pairs == 100);
  CHECK(generate_phantoms(3, 32, 5).size() == 3);
  PhantomSpec tiny;
  tiny.image_size = 8;
  CHECK_THROWS_AS(generate_phantom(tiny), Error);
}

TEST_CASE("manifest round trip and validation") {
  TempDir dir("manifest");
  save_raster(dir / "a.mrit", ImageTensor({1, 16, 16}, 0.5f));
  save_raster(dir / "b c.mrit", ImageTensor({1, 16, 16}, 0.25f));
  const Manifest m({{"a.mrit", Split::kTrain}, {"b c.mrit", Split::kTest}});
  m.save(dir / "manifest.csv");
  const Manifest back = Manifest::load(dir / "manifest.csv");
  REQUIRE(back.records().size() == 2);
  CHECK(back.records()[1].path == "b c.mrit");
  CHECK(back.records()[1].split == Split::kTest);
  CHECK(back.paths(Split::kTrain).size() == 1);
  CHECK(load_split(back, Split::kTest, 16).size() == 1);

  CHECK_THROWS_AS(Manifest({{"a", Split::kTrain}, {"a", Split::kTest}}), Error);
  write_text_atomic(dir / "missing.csv", "path,split\nnope.mrit,train\n");
  CHECK(code_of([&] { Manifest::load(dir / "missing.csv"); }) == int(ErrorCode::kIo));
  write_text_atomic(dir / "crlf.csv", "path,split\r\na.mrit,train\r\n");
  CHECK_THROWS_AS(Manifest::load(dir / "crlf.csv"), Error);
  write_text_atomic(dir / "split.csv", "path,split\na.mrit,holdout\n");
  CHECK_THROWS_AS(Manifest::load(dir / "split.csv"), Error);
}

TEST_CASE("load_split reports the failing path") {
  TempDir dir("badfile");
  write_text_atomic(dir / "junk.mrit", "XXXXjunk");
  const Manifest m = [&] {
    write_text_atomic(dir / "m.csv", "path,split\njunk.mrit,train\n");
    return Manifest::load(dir / "m.csv");
  }();
  try {
    load_split(m, Split::kTrain, 16);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kBadMagic);
    CHECK(std::string(e.what()).find("junk.mrit") != std::string::npos);
  }
}

TEST_CASE("sample stream with one task carries that label") {
  MaskSpec only;
  only.family = MaskFamily::kGaussian1D;
  only.acceleration = 6;
  const SampleStream s(generate_phantoms(4, 32, 1), {only}, 7);
  for (const auto& sample : take_samples(s, 10)) {
    CHECK(sample.label.family == MaskFamily::kGaussian1D);
    CHECK(sample.label.acceleration == 6.0);
  }
}

TEST_CASE("task frequencies are close to uniform") {
  std::vector<MaskSpec> tasks;
  for (double r : {2.0, 4.0, 6.0, 8.0, 10.0}) {
    MaskSpec t;
    t.acceleration = r;
    tasks.push_back(t);
  }
  const SampleStream s(generate_phantoms(10, 16, 3), tasks, 11);
  std::map<double, int> counts;
  for (std::size_t e = 0; e < 100; ++e)
    for (std::size_t p = 0; p < 10; ++p) ++counts[s.task_for(e, p).acceleration];
  for (const auto& [r, n] : counts) {
    INFO(r);
    CHECK(std::abs(n - 200) <= 5 * std::sqrt(1000.0));
  }
  CHECK(counts.size() == 5);
}

TEST_CASE("sample stream is reproducible and visits every image per epoch") {
  MaskSpec t;
  t.family = MaskFamily::kCartesianEquispaced;
  const auto images = generate_phantoms(6, 32, 9);
  const SampleStream a(images, {t}, 5), b(images, {t}, 5);
  std::vector<std::size_t> seen;
  for (std::size_t p = 0; p < 6; ++p) {
    const Sample x = a.at(1, p), y = b.at(1, p);
    CHECK(bitwise_equal(x.input, y.input));
    CHECK(bitwise_equal(x.target, y.target));
    seen.push_back(a.image_index(1, p));
    for (float v : x.target.data()) CHECK((v >= 0.0f && v <= 1.0f));
  }
  std::sort(seen.begin(), seen.end());
  CHECK(seen == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
  CHECK_THROWS_AS(SampleStream({}, {t}, 1), Error);
  CHECK_THROWS_AS(SampleStream(images, {}, 1), Error);
}
