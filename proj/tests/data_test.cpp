#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "simsiam/augment.hpp"
#include "simsiam/dataset.hpp"

using namespace simsiam;

namespace {

std::vector<std::uint8_t> make_record(std::uint8_t label, std::uint8_t fill) {
  std::vector<std::uint8_t> rec(kCifarRecordBytes, fill);
  rec[0] = label;
  return rec;
}

std::vector<std::uint8_t> concat(std::vector<std::uint8_t> a, const std::vector<std::uint8_t>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("parse_cifar10: constructed two-record fixture") {
  auto bytes = concat(make_record(3, 10), make_record(7, 200));
  auto samples = parse_cifar10<double>(bytes);
  REQUIRE(samples.size() == 2);
  CHECK(samples[0].label == 3);
  CHECK(samples[1].label == 7);
  CHECK(samples[0].id == 0);
  CHECK(samples[1].id == 1);
  CHECK(samples[0].payload.shape() == Shape{3, 32, 32});
  CHECK(samples[0].payload.flat()[0] == doctest::Approx(10.0 / 255.0).epsilon(1e-15));
  CHECK(samples[1].payload.flat()[100] == doctest::Approx(200.0 / 255.0).epsilon(1e-15));
}

TEST_CASE("parse_cifar10: all-zero pixels scale to exactly 0") {
  auto samples = parse_cifar10<double>(make_record(0, 0));
  CHECK(samples[0].payload.flat().abs().maxCoeff() == 0.0);
}

TEST_CASE("parse_cifar10: round-trip through serialize is bit-identical") {
  SplitRng rng(99);
  std::vector<std::uint8_t> bytes;
  for (int r = 0; r < 5; ++r) {
    auto rec = make_record(static_cast<std::uint8_t>(r * 2), 0);
    for (std::size_t i = 1; i < rec.size(); ++i)
      rec[i] = static_cast<std::uint8_t>(rng.uniform_index(256));
    bytes = concat(std::move(bytes), rec);
  }
  auto samples = parse_cifar10<double>(bytes);
  auto bytes2 = serialize_cifar10(samples);
  CHECK(bytes2 == bytes);
  auto samples2 = parse_cifar10<double>(bytes2);
  for (std::size_t i = 0; i < samples.size(); ++i)
    CHECK(bitwise_equal(samples[i].payload, samples2[i].payload));
}

TEST_CASE("parse_cifar10: malformed inputs are rejected") {
  auto bytes = make_record(1, 5);
  bytes.pop_back();  // truncated record
  CHECK_THROWS_WITH_AS(parse_cifar10<double>(bytes),
                       doctest::Contains("truncated record"), std::invalid_argument);
  auto bad_label = make_record(10, 5);
  CHECK_THROWS_WITH_AS(parse_cifar10<double>(bad_label), doctest::Contains("> 9"),
                       std::invalid_argument);
}

TEST_CASE("make_synthetic: wide separation is brute-force kNN perfect") {
  auto ds = make_synthetic<double>(4, 16, 25, 10.0, 123, 10);
  REQUIRE(ds.train.size() == 100);
  REQUIRE(ds.val.size() == 40);
  // Independent oracle: plain 1-NN by euclidean distance.
  long correct = 0;
  for (const auto& q : ds.val) {
    double best = 1e300;
    int best_label = -1;
    for (const auto& t : ds.train) {
      const double d2 = (q.payload.flat() - t.payload.flat()).square().sum();
      if (d2 < best) {
        best = d2;
        best_label = t.label;
      }
    }
    if (best_label == q.label) ++correct;
  }
  CHECK(correct == static_cast<long>(ds.val.size()));
}

TEST_CASE("make_synthetic: zero separation is chance for 1-NN") {
  auto ds = make_synthetic<double>(4, 16, 50, 0.0, 321, 25);
  long correct = 0;
  for (const auto& q : ds.val) {
    double best = 1e300;
    int best_label = -1;
    for (const auto& t : ds.train) {
      const double d2 = (q.payload.flat() - t.payload.flat()).square().sum();
      if (d2 < best) {
        best = d2;
        best_label = t.label;
      }
    }
    if (best_label == q.label) ++correct;
  }
  // 100 queries at p = 1/4: 3 sigma ~ 13.
  const double acc = static_cast<double>(correct) / static_cast<double>(ds.val.size());
  CHECK(acc > 0.25 - 0.13);
  CHECK(acc < 0.25 + 0.13);
}

TEST_CASE("make_synthetic: deterministic per seed") {
  auto a = make_synthetic<double>(3, 8, 10, 5.0, 7, 4);
  auto b = make_synthetic<double>(3, 8, 10, 5.0, 7, 4);
  REQUIRE(a.train.size() == b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    CHECK(bitwise_equal(a.train[i].payload, b.train[i].payload));
    CHECK(a.train[i].label == b.train[i].label);
  }
  auto c = make_synthetic<double>(3, 8, 10, 5.0, 8, 4);
  CHECK(!bitwise_equal(a.train[0].payload, c.train[0].payload));
}

TEST_CASE("synthetic snapshot: save/load round-trip is bit-exact") {
  auto ds = make_synthetic<double>(3, 6, 5, 4.0, 11, 2);
  const auto path = (std::filesystem::temp_directory_path() / "simsiam_synth_test.json").string();
  save_synthetic(ds, path);
  auto loaded = load_synthetic<double>(path);
  std::remove(path.c_str());
  REQUIRE(loaded.train.size() == ds.train.size());
  REQUIRE(loaded.val.size() == ds.val.size());
  CHECK(loaded.num_classes == ds.num_classes);
  for (std::size_t i = 0; i < ds.train.size(); ++i) {
    CHECK(loaded.train[i].id == ds.train[i].id);
    CHECK(loaded.train[i].label == ds.train[i].label);
    CHECK(bitwise_equal(loaded.train[i].payload, ds.train[i].payload));
  }
}

TEST_CASE("augment: disabled pipeline is the identity") {
  AugmentationConfig cfg;
  cfg.crop_enabled = cfg.hflip_enabled = cfg.jitter_enabled = cfg.grayscale_enabled = false;
  cfg.noise_enabled = cfg.dropout_enabled = false;

  Sample<double> img;
  img.id = 1;
  img.payload = Tensor<double>({3, 8, 8});
  SplitRng rng(5);
  for (Index i = 0; i < img.payload.numel(); ++i) img.payload.flat()[i] = rng.uniform();
  CHECK(bitwise_equal(augment(img, cfg, augment_rng(1, 1, 0, 1)), img.payload));

  Sample<double> vec;
  vec.id = 2;
  vec.payload = Tensor<double>::row({1.0, -2.0, 3.0});
  CHECK(bitwise_equal(augment(vec, cfg, augment_rng(1, 2, 0, 1)), vec.payload));
}

TEST_CASE("augment: grayscale equalizes channels") {
  AugmentationConfig cfg;
  cfg.crop_enabled = cfg.hflip_enabled = cfg.jitter_enabled = false;
  cfg.grayscale_prob = 1.0;
  Sample<double> img;
  img.payload = Tensor<double>({3, 4, 4});
  SplitRng rng(6);
  for (Index i = 0; i < img.payload.numel(); ++i) img.payload.flat()[i] = rng.uniform();
  auto view = augment(img, cfg, augment_rng(9, 0, 0, 1));
  for (Index p = 0; p < 16; ++p) {
    CHECK(view.flat()[p] == view.flat()[16 + p]);
    CHECK(view.flat()[p] == view.flat()[32 + p]);
  }
}

TEST_CASE("augment: same rng path reproduces the identical view") {
  AugmentationConfig cfg;  // full default image pipeline
  Sample<double> img;
  img.id = 17;
  img.payload = Tensor<double>({3, 16, 16});
  SplitRng rng(8);
  for (Index i = 0; i < img.payload.numel(); ++i) img.payload.flat()[i] = rng.uniform();
  auto a = augment(img, cfg, augment_rng(42, img.id, 3, 1));
  auto b = augment(img, cfg, augment_rng(42, img.id, 3, 1));
  CHECK(bitwise_equal(a, b));
  // Distinct views of the same sample in the same step differ.
  auto c = augment(img, cfg, augment_rng(42, img.id, 3, 2));
  CHECK(!bitwise_equal(a, c));
}

TEST_CASE("augment: pixels stay in [0,1] through the full pipeline") {
  AugmentationConfig cfg;
  cfg.jitter_prob = 1.0;
  cfg.grayscale_prob = 0.5;
  SplitRng rng(31);
  for (int rep = 0; rep < 25; ++rep) {
    Sample<double> img;
    img.id = rep;
    img.payload = Tensor<double>({3, 12, 12});
    for (Index i = 0; i < img.payload.numel(); ++i) img.payload.flat()[i] = rng.uniform();
    auto view = augment(img, cfg, augment_rng(13, img.id, rep, 1));
    CHECK(view.flat().minCoeff() >= 0.0);
    CHECK(view.flat().maxCoeff() <= 1.0);
  }
}

TEST_CASE("augment: degenerate crop falls back to the clamped center crop") {
  // 8-wide, 32-tall image with scale pinned to 1: every attempt wants a crop
  // wider than the image, so the aspect-clamped center fallback must trigger.
  AugmentationConfig cfg;
  cfg.hflip_enabled = cfg.jitter_enabled = cfg.grayscale_enabled = false;
  cfg.crop_scale_lo = cfg.crop_scale_hi = 1.0;
  Sample<double> img;
  img.payload = Tensor<double>({3, 32, 8});
  SplitRng rng(77);
  for (Index i = 0; i < img.payload.numel(); ++i) img.payload.flat()[i] = rng.uniform();
  auto view = augment(img, cfg, augment_rng(7, 0, 0, 1));
  // in_ratio = 8/32 < 3/4 -> h = round(8 / 0.75) = 11, w = 8, centered at i=10, j=0.
  auto expect = simsiam::detail::crop_resize(img.payload, 10, 0, 11, 8);
  CHECK(bitwise_equal(view, expect));
}

TEST_CASE("vector augmentation: noise and dropout behave as configured") {
  Sample<double> vec;
  vec.payload = Tensor<double>::constant({1000}, 1.0);
  AugmentationConfig cfg;
  cfg.noise_enabled = false;
  cfg.dropout_prob = 0.3;
  auto view = augment(vec, cfg, augment_rng(3, 0, 0, 1));
  const double zero_frac =
      static_cast<double>((view.flat() == 0.0).count()) / static_cast<double>(view.numel());
  CHECK(zero_frac == doctest::Approx(0.3).epsilon(0.25));

  cfg.noise_enabled = true;
  cfg.dropout_enabled = false;
  cfg.noise_std = 0.5;
  auto noisy = augment(vec, cfg, augment_rng(3, 0, 0, 2));
  const double sd = std::sqrt((noisy.flat() - 1.0).square().mean());
  CHECK(sd == doctest::Approx(0.5).epsilon(0.15));
}

TEST_CASE("SplitRng: equal paths agree, different paths are independent") {
  SplitRng a(1, {4, 5, 6});
  SplitRng b(1, {4, 5, 6});
  for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
  SplitRng c(1, {4, 5, 7});
  SplitRng d(2, {4, 5, 6});
  SplitRng e(1, {4, 5, 6});
  CHECK(c.next_u64() != e.next_u64());
  CHECK(d.next_u64() != SplitRng(1, {4, 5, 6}).next_u64());
}

TEST_CASE("augmentation config validation") {
  AugmentationConfig cfg;
  cfg.crop_scale_lo = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.jitter_prob = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.crop_scale_lo = 0.8;
  cfg.crop_scale_hi = 0.4;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  CHECK_NOTHROW(cfg.validate());
}
