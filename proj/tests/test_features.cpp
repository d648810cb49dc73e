#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "umit/checkpoint.hpp"
#include "umit/data.hpp"
#include "umit/features.hpp"
#include "umit/gradcheck.hpp"
#include "umit/ops.hpp"

using namespace umit;

namespace {

Tensor rand_img(uint64_t key) {
  Rng rng(key);
  Tensor t = randn<float>(Shape{2, 3, 16, 16}, rng, 0.5f);
  for (int64_t i = 0; i < t.numel(); ++i)
    t.data()[i] = std::tanh(t.data()[i]);
  return t;
}

double cosine(const Tensor& a, const Tensor& b) {
  double num = 0, na = 0, nb = 0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    num += double(a.data()[i]) * b.data()[i];
    na += double(a.data()[i]) * a.data()[i];
    nb += double(b.data()[i]) * b.data()[i];
  }
  return num / std::sqrt(na * nb + 1e-30);
}

}  // namespace

TEST_CASE("extractor: construction rules") {
  auto fe = build_extractor<float>(7, {8, 16, 32});
  CHECK(fe.channels.size() == 6);
  CHECK(fe.channels[3] == 32);  // short lists extend by repeating the last
  CHECK(fe.channels[5] == 32);
  CHECK(fe.params.count("fe.b6.w") == 1);
  CHECK_THROWS_AS(build_extractor<float>(7, {8, 16}), std::invalid_argument);
  CHECK_THROWS_AS(build_extractor<float>(7, {8, 16, 32, 32, 32, 32, 32}),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_extractor<float>(7, {8, 0, 32}), std::invalid_argument);
}

TEST_CASE("extractor: deterministic in seed, distinct across seeds") {
  auto a = build_extractor<float>(11, {8, 16, 32});
  auto b = build_extractor<float>(11, {8, 16, 32});
  auto c = build_extractor<float>(12, {8, 16, 32});
  for (const auto& [name, t] : a.params) {
    const Tensor& u = b.params.at(name);
    REQUIRE(u.numel() == t.numel());
    for (int64_t i = 0; i < t.numel(); ++i) CHECK(u.data()[i] == t.data()[i]);
  }
  CHECK(cosine(a.params.at("fe.b1.w"), c.params.at("fe.b1.w")) < 0.5);
}

TEST_CASE("extractor: tap geometry is H, H/2, H/4") {
  auto fe = build_extractor<float>(7, {8, 16, 32});
  Tensor x = rand_img(1);
  auto taps = extract(fe, x);
  // taps sit after blocks 2, 3, 4; pooling halves the size before 3 and 4
  CHECK(taps[0].shape() == Shape{2, 16, 16, 16});
  CHECK(taps[1].shape() == Shape{2, 32, 8, 8});
  CHECK(taps[2].shape() == Shape{2, 32, 4, 4});
  CHECK_THROWS_AS(extract(fe, Tensor::zeros(Shape{2, 3, 8, 8})), std::invalid_argument);
  CHECK_THROWS_AS(extract(fe, Tensor::zeros(Shape{2, 1, 16, 16})), std::invalid_argument);
}

TEST_CASE("extractor: finite on a constant image, params are frozen") {
  auto fe = build_extractor<float>(7, {8, 16, 32});
  TapeScope<float> tape;
  Tensor x = Tensor::zeros(Shape{1, 3, 16, 16}).set_requires_grad(true);
  auto taps = extract(fe, x);
  for (const auto& t : taps) {
    bool finite = true;
    for (int64_t i = 0; i < t.numel(); ++i) finite &= bool(std::isfinite(t.data()[i]));
    CHECK(finite);
  }
  backward(sum(taps[2]));
  CHECK(x.has_grad());
  for (const auto& [name, p] : fe.params) CHECK_FALSE(p.has_grad());
}

TEST_CASE("extractor: deepest tap separates the synthetic domains") {
  auto fe = build_extractor<float>(7, {16, 32, 64});
  auto specs = default_domains();
  std::vector<Tensor> imgs;
  for (int d = 0; d < 3; ++d)
    for (int i = 0; i < 4; ++i)
      imgs.push_back(generate_image(specs[size_t(d)], 32, stream_key(5, "img", d, i)));
  Tensor batch = stack_images(imgs, 0, imgs.size());
  Tensor f3 = extract(fe, batch)[2];
  const int64_t per = f3.numel() / 12;
  auto row = [&](int i) {
    return Tensor::from(Shape{int(per)},
                        std::vector<float>(f3.data() + i * per, f3.data() + (i + 1) * per));
  };
  // within-domain pairs must be more aligned than cross-domain pairs
  double within = (cosine(row(0), row(1)) + cosine(row(4), row(5)) + cosine(row(8), row(9))) / 3;
  double across = (cosine(row(0), row(4)) + cosine(row(4), row(8)) + cosine(row(0), row(8))) / 3;
  CHECK(within > across);
  CHECK(across < 0.99);
}

TEST_CASE("extractor: gradient toward the input matches finite differences") {
  auto fe = build_extractor<double>(7, {4, 6, 8});
  Rng rng(3);
  TensorD x = randn<double>(Shape{1, 3, 16, 16}, rng, 0.3);
  Rng pr(4);
  TensorD R = randn<double>(Shape{1, 8, 4, 4}, pr);
  double err = finite_diff_check<double>(
      [&] { return sum(mul(extract(fe, x)[2], R)); }, x, 1e-5);
  CHECK(err < 1e-4);
}

TEST_CASE("extractor: weight import roundtrip and failure modes") {
  namespace fs = std::filesystem;
  auto fe = build_extractor<float>(7, {8, 16, 32});
  fs::path dir = fs::temp_directory_path() / "umit_fe_import";
  fs::create_directories(dir);
  std::string path = (dir / "fe.ckpt").string();

  std::vector<std::pair<std::string, Tensor>> entries;
  Rng rng(9);
  for (const auto& [name, t] : fe.params)
    entries.emplace_back(name, randn<float>(t.shape(), rng, 0.1f));
  save_checkpoint(path, 0, entries);

  auto fresh = build_extractor<float>(7, {8, 16, 32});
  import_weights(fresh, path);
  for (const auto& [name, t] : entries) {
    const Tensor& got = fresh.params.at(name);
    for (int64_t i = 0; i < t.numel(); ++i) REQUIRE(got.data()[i] == t.data()[i]);
  }

  // a file missing one tensor must not touch the target extractor
  entries.pop_back();
  std::string partial = (dir / "partial.ckpt").string();
  save_checkpoint(partial, 0, entries);
  auto before = fresh.params.at("fe.b1.w").vec();
  CHECK_THROWS_AS(import_weights(fresh, partial), std::runtime_error);
  CHECK(fresh.params.at("fe.b1.w").vec() == before);

  // shape mismatch names the offender
  std::vector<std::pair<std::string, Tensor>> mangled;
  for (const auto& [name, t] : fresh.params)
    mangled.emplace_back(name, name == "fe.b6.bt" ? Tensor::zeros(Shape{99}) : t);
  std::string bad = (dir / "bad.ckpt").string();
  save_checkpoint(bad, 0, mangled);
  CHECK_THROWS_WITH_AS(import_weights(fresh, bad),
                       doctest::Contains("fe.b6.bt"), std::runtime_error);
  fs::remove_all(dir);
}
