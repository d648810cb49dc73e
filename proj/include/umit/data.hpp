#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "umit/rng.hpp"
#include "umit/tensor.hpp"

namespace umit {

enum class ShapeFamily { Disk, Square, Triangle };
enum class TextureKind { Plain, Stripes, Dots };

struct Color {
  float r, g, b;  // in [-1,1]
};

struct JitterSpec {
  float pos = 0.10f;    // center offset range, fraction of image
  float scale = 0.12f;  // relative size range
  float rot = 0.4f;     // rotation range, radians
};

struct DomainSpec {
  ShapeFamily shape_family = ShapeFamily::Disk;
  TextureKind texture = TextureKind::Plain;
  Color fg{0.9f, 0.9f, 0.9f};
  Color bg{-0.9f, -0.9f, -0.9f};
  Color accent{0.0f, 0.0f, 0.0f};
  JitterSpec jitter;
};

// disk/stripes, square/dots, triangle/plain with distinct palettes
std::vector<DomainSpec> default_domains();
// first n of the 9 distinct shape/texture combinations; the first 3 are the
// defaults above, the rest get derived palettes. n must be in [1,9].
std::vector<DomainSpec> domain_specs(int n);

// Anti-aliased (2x2 supersampled) rasterization of one jittered shape on the
// domain background; deterministic in seed. Output [3,size,size] in [-1,1].
Tensor generate_image(const DomainSpec& spec, int size, uint64_t seed);

// Eagerly rendered pool of per-domain images; item (d, i) always renders from
// stream (seed, "img", d, i), so pools regenerate identically.
struct Dataset {
  std::vector<DomainSpec> specs;
  int per_domain = 0;
  int image_size = 0;
  uint64_t seed = 0;
  std::vector<Tensor> images;  // domain-major: images[d * per_domain + i]
  std::vector<int> labels;

  Dataset() = default;
  Dataset(std::vector<DomainSpec> specs, int per_domain, int image_size, uint64_t seed);
  int domains() const { return int(specs.size()); }
  uint64_t image_seed(int domain, int index) const;
  const Tensor& image(int domain, int index) const;
};

struct Batch {
  Tensor images;  // [B,3,H,W]
  std::vector<int> src;
};

Batch make_batch(const Dataset& ds, int B, uint64_t seed);

std::vector<int> random_permutation(int n, Rng& rng);
std::vector<int> permute_targets(const std::vector<int>& src, Rng& rng);

// rows of a [B,...] tensor gathered: out[i] = x[perm[i]]; repeats and
// subsets allowed, so the output may have a different row count
Tensor gather_rows(const Tensor& x, const std::vector<int>& perm);
// singles [3,H,W] stacked into [B,3,H,W]
Tensor stack_images(const std::vector<Tensor>& images, size_t from, size_t count);

// PNG directory with a line-oriented manifest `index<TAB>domain<TAB>seed`
struct DiskDataset {
  std::vector<Tensor> images;
  std::vector<int> labels;
  int domains = 0;
  int image_size = 0;
};
void write_dataset_dir(const Dataset& ds, const std::string& dir);
DiskDataset load_dataset_dir(const std::string& dir);

}  // namespace umit
