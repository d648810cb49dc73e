#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>
#include <vector>

#include "doctest.h"
#include "umit/data.hpp"
#include "umit/png_io.hpp"

using namespace umit;

TEST_CASE("generate_image: deterministic, bounded, anti-aliased") {
  DomainSpec spec = default_domains()[0];
  Tensor a = generate_image(spec, 32, 99);
  Tensor b = generate_image(spec, 32, 99);
  Tensor c = generate_image(spec, 32, 100);
  REQUIRE(a.shape() == Shape{3, 32, 32});
  CHECK(a.vec() == b.vec());
  CHECK(a.vec() != c.vec());
  float lo = 1e9f, hi = -1e9f;
  for (float v : a.vec()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo >= -1.f);
  CHECK(hi <= 1.f);
  // supersampling leaves some pixels strictly between fg and bg
  int between = 0;
  for (float v : a.vec())
    if (v > -0.89f && v < 0.89f) ++between;
  CHECK(between > 0);
}

TEST_CASE("dataset: pool regenerates per-image streams") {
  Dataset ds(default_domains(), 5, 16, 21);
  REQUIRE(int(ds.images.size()) == 15);
  for (int d = 0; d < 3; ++d)
    for (int i = 0; i < 5; ++i) {
      const Tensor& got = ds.image(d, i);
      Tensor again = generate_image(ds.specs[size_t(d)], 16, ds.image_seed(d, i));
      CHECK(got.vec() == again.vec());
      CHECK(ds.labels[size_t(d * 5 + i)] == d);
    }
  // distinct images within a domain (jitter moves the shape)
  CHECK(ds.image(0, 0).vec() != ds.image(0, 1).vec());
  CHECK_THROWS_AS(ds.image(3, 0), std::out_of_range);
  CHECK_THROWS_AS(ds.image(0, 5), std::out_of_range);
}

TEST_CASE("domain_specs: first three are the defaults, nine are distinct") {
  auto def = default_domains();
  auto nine = domain_specs(9);
  REQUIRE(nine.size() == 9);
  for (int i = 0; i < 3; ++i) {
    CHECK(nine[size_t(i)].shape_family == def[size_t(i)].shape_family);
    CHECK(nine[size_t(i)].texture == def[size_t(i)].texture);
  }
  std::set<std::pair<int, int>> combos;
  for (const auto& s : nine) combos.insert({int(s.shape_family), int(s.texture)});
  CHECK(combos.size() == 9);
  CHECK(domain_specs(1).size() == 1);
  CHECK_THROWS_AS(domain_specs(0), std::invalid_argument);
  CHECK_THROWS_AS(domain_specs(10), std::invalid_argument);
}

TEST_CASE("make_batch: deterministic, near-uniform domain draw") {
  Dataset ds(default_domains(), 20, 16, 22);
  Batch a = make_batch(ds, 8, 123);
  Batch b = make_batch(ds, 8, 123);
  REQUIRE(a.images.shape() == Shape{8, 3, 16, 16});
  CHECK(a.images.vec() == b.images.vec());
  CHECK(a.src == b.src);
  CHECK(make_batch(ds, 8, 124).src != a.src);
  std::vector<int> counts(3, 0);
  for (int k = 0; k < 300; ++k) {
    Batch bb = make_batch(ds, 16, uint64_t(1000 + k));
    for (int s : bb.src) counts[size_t(s)]++;
  }
  const double total = 300.0 * 16.0;
  for (int d = 0; d < 3; ++d) {
    double frac = counts[size_t(d)] / total;
    CHECK(frac > 1.0 / 3 - 0.05);
    CHECK(frac < 1.0 / 3 + 0.05);
  }
  // batch rows are verbatim dataset images of the drawn domains
  const int64_t per = 3 * 16 * 16;
  bool matched_all = true;
  for (int i = 0; i < 8; ++i) {
    bool row_ok = false;
    for (int j = 0; j < 20 && !row_ok; ++j) {
      const Tensor& cand = ds.image(a.src[size_t(i)], j);
      row_ok = std::equal(cand.data(), cand.data() + per, a.images.data() + i * per);
    }
    matched_all &= row_ok;
  }
  CHECK(matched_all);
}

TEST_CASE("permutations: bijective, deterministic, target-shuffle stays valid") {
  Rng rng(55);
  auto p = random_permutation(10, rng);
  auto sorted = p;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> iota(10);
  std::iota(iota.begin(), iota.end(), 0);
  CHECK(sorted == iota);
  Rng rng2(55);
  CHECK(random_permutation(10, rng2) == p);

  std::vector<int> src{0, 1, 2, 0, 1, 2, 1, 1};
  Rng rng3(56);
  auto tgt = permute_targets(src, rng3);
  REQUIRE(tgt.size() == src.size());
  auto stgt = tgt;
  std::sort(stgt.begin(), stgt.end());
  auto ssrc = src;
  std::sort(ssrc.begin(), ssrc.end());
  CHECK(stgt == ssrc);  // targets are the sources reshuffled
}

TEST_CASE("gather_rows and stack_images: layout laws") {
  Dataset ds(default_domains(), 4, 16, 23);
  std::vector<Tensor> singles;
  for (int i = 0; i < 4; ++i) singles.push_back(ds.image(1, i));
  Tensor batch = stack_images(singles, 0, 4);
  REQUIRE(batch.shape() == Shape{4, 3, 16, 16});
  const int64_t per = 3 * 16 * 16;
  for (int i = 0; i < 4; ++i)
    CHECK(std::equal(singles[size_t(i)].data(), singles[size_t(i)].data() + per,
                     batch.data() + i * per));
  Tensor sub = stack_images(singles, 1, 2);
  CHECK(sub.shape() == Shape{2, 3, 16, 16});
  CHECK(std::equal(singles[1].data(), singles[1].data() + per, sub.data()));

  Tensor g = gather_rows(batch, {3, 0, 0});
  REQUIRE(g.shape() == Shape{3, 3, 16, 16});
  CHECK(std::equal(singles[3].data(), singles[3].data() + per, g.data()));
  CHECK(std::equal(singles[0].data(), singles[0].data() + per, g.data() + per));
  CHECK(std::equal(singles[0].data(), singles[0].data() + per, g.data() + 2 * per));
  CHECK_THROWS_AS(gather_rows(batch, {4}), std::out_of_range);

  CHECK_THROWS_AS(stack_images(singles, 2, 3), std::invalid_argument);
  CHECK_THROWS_AS(stack_images(singles, 0, 0), std::invalid_argument);
  // batched input is rejected rather than silently mis-stacked
  std::vector<Tensor> ranked{batch};
  CHECK_THROWS_AS(stack_images(ranked, 0, 1), std::invalid_argument);
  std::vector<Tensor> mixed{ds.image(0, 0), Tensor::zeros(Shape{3, 8, 8})};
  CHECK_THROWS_AS(stack_images(mixed, 0, 2), std::invalid_argument);
}

TEST_CASE("png: quantization roundtrip within one step") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "umit_png_test";
  fs::create_directories(dir);
  std::string path = (dir / "img.png").string();
  Tensor img = generate_image(default_domains()[2], 24, 7);
  save_png(path, img);
  Tensor back = load_png(path);
  REQUIRE(back.shape() == img.shape());
  float worst = 0;
  for (int64_t i = 0; i < img.numel(); ++i)
    worst = std::max(worst, std::fabs(img.data()[i] - back.data()[i]));
  CHECK(worst <= 1.0f / 127.5f);
  // a second save of the loaded image is byte-stable
  std::string path2 = (dir / "img2.png").string();
  save_png(path2, back);
  Tensor twice = load_png(path2);
  CHECK(twice.vec() == back.vec());
  CHECK_THROWS_AS(load_png((dir / "missing.png").string()), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("dataset dir: manifest covers every image, loader restores them") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "umit_ds_dir";
  fs::remove_all(dir);
  Dataset ds(default_domains(), 3, 16, 29);
  write_dataset_dir(ds, dir.string());
  REQUIRE(fs::exists(dir / "manifest.tsv"));
  DiskDataset dd = load_dataset_dir(dir.string());
  REQUIRE(dd.images.size() == 9);
  CHECK(dd.domains == 3);
  CHECK(dd.image_size == 16);
  CHECK(dd.labels == ds.labels);
  for (size_t i = 0; i < dd.images.size(); ++i) {
    float worst = 0;
    for (int64_t k = 0; k < dd.images[i].numel(); ++k)
      worst = std::max(worst,
                       std::fabs(dd.images[i].data()[k] - ds.images[i].data()[k]));
    CHECK(worst <= 1.0f / 127.5f);
  }
  CHECK_THROWS_AS(load_dataset_dir((dir / "nope").string()), std::runtime_error);
  fs::remove_all(dir);
}
