#include "umit/data.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "umit/png_io.hpp"

namespace umit {

namespace {

struct Placement {
  float cx, cy;      // center in unit coordinates
  float size;        // shape half-extent in unit coordinates
  float cos_r, sin_r;
  float phase_u, phase_v;  // texture offsets in shape-local units
};

Placement draw_placement(const DomainSpec& spec, Rng& rng) {
  auto span = [&](float range) { return float(rng.next_uniform() * 2.0 - 1.0) * range; };
  Placement pl;
  pl.cx = 0.5f + span(spec.jitter.pos);
  pl.cy = 0.5f + span(spec.jitter.pos);
  pl.size = 0.30f * (1.0f + span(spec.jitter.scale));
  float rot = span(spec.jitter.rot);
  pl.cos_r = std::cos(rot);
  pl.sin_r = std::sin(rot);
  pl.phase_u = float(rng.next_uniform());
  pl.phase_v = float(rng.next_uniform());
  return pl;
}

bool inside_shape(ShapeFamily family, float u, float v) {
  switch (family) {
    case ShapeFamily::Disk:
      return u * u + v * v <= 1.0f;
    case ShapeFamily::Square:
      return std::fabs(u) <= 0.9f && std::fabs(v) <= 0.9f;
    case ShapeFamily::Triangle: {
      // equilateral, apex up, circumradius 1.15 (area comparable to the disk)
      const float r = 1.15f;
      float y = -v;  // image v grows downward
      if (y > r || y < -0.5f * r) return false;
      // sides: from apex (0, r) to base corners (+-r*sqrt(3)/2, -r/2)
      const float s3 = 1.7320508f;
      return std::fabs(u) <= (r - y) / s3;
    }
  }
  return false;
}

Color texel(const DomainSpec& spec, const Placement& pl, float u, float v) {
  switch (spec.texture) {
    case TextureKind::Plain:
      return spec.fg;
    case TextureKind::Stripes: {
      // bands across the shape-local u axis, period 0.5 local units
      float band = std::floor((u + pl.phase_u * 2.0f) / 0.5f);
      return (int(std::llround(band)) % 2 == 0) ? spec.fg : spec.accent;
    }
    case TextureKind::Dots: {
      // accent dots on an fg field, grid spacing 0.6 local units
      float gu = u + pl.phase_u * 0.6f, gv = v + pl.phase_v * 0.6f;
      float du = gu - 0.6f * std::floor(gu / 0.6f + 0.5f);
      float dv = gv - 0.6f * std::floor(gv / 0.6f + 0.5f);
      return (du * du + dv * dv <= 0.18f * 0.18f) ? spec.accent : spec.fg;
    }
  }
  return spec.fg;
}

Color sample_color(const DomainSpec& spec, const Placement& pl, float x, float y) {
  // unit-square point -> shape-local frame
  float dx = x - pl.cx, dy = y - pl.cy;
  float u = (pl.cos_r * dx + pl.sin_r * dy) / pl.size;
  float v = (-pl.sin_r * dx + pl.cos_r * dy) / pl.size;
  if (!inside_shape(spec.shape_family, u, v)) return spec.bg;
  return texel(spec, pl, u, v);
}

}  // namespace

std::vector<DomainSpec> default_domains() {
  std::vector<DomainSpec> d(3);
  d[0].shape_family = ShapeFamily::Disk;
  d[0].texture = TextureKind::Stripes;
  d[0].fg = {0.85f, 0.10f, -0.45f};
  d[0].accent = {-0.55f, 0.05f, 0.90f};
  d[0].bg = {-0.80f, -0.75f, -0.70f};

  d[1].shape_family = ShapeFamily::Square;
  d[1].texture = TextureKind::Dots;
  d[1].fg = {-0.25f, 0.65f, 0.55f};
  d[1].accent = {0.90f, 0.75f, -0.60f};
  d[1].bg = {0.35f, 0.30f, 0.45f};

  d[2].shape_family = ShapeFamily::Triangle;
  d[2].texture = TextureKind::Plain;
  d[2].fg = {0.70f, -0.25f, 0.80f};
  d[2].accent = {0.70f, -0.25f, 0.80f};
  d[2].bg = {-0.15f, -0.05f, -0.30f};
  return d;
}

std::vector<DomainSpec> domain_specs(int n) {
  if (n < 1 || n > 9)
    throw std::invalid_argument("domain_specs: n must be in [1,9], got " + std::to_string(n));
  static const ShapeFamily shapes[9] = {
      ShapeFamily::Disk,     ShapeFamily::Square, ShapeFamily::Triangle,
      ShapeFamily::Disk,     ShapeFamily::Square, ShapeFamily::Triangle,
      ShapeFamily::Disk,     ShapeFamily::Square, ShapeFamily::Triangle};
  static const TextureKind textures[9] = {
      TextureKind::Stripes, TextureKind::Dots,    TextureKind::Plain,
      TextureKind::Dots,    TextureKind::Plain,   TextureKind::Stripes,
      TextureKind::Plain,   TextureKind::Stripes, TextureKind::Dots};
  std::vector<DomainSpec> out = default_domains();
  if (n <= 3) {
    out.resize(size_t(n));
    return out;
  }
  out.resize(size_t(n));
  for (int i = 3; i < n; ++i) {
    DomainSpec& s = out[size_t(i)];
    s.shape_family = shapes[i];
    s.texture = textures[i];
    // rotate the default palettes so every extra domain stays distinct
    const DomainSpec& base = out[size_t(i % 3)];
    const DomainSpec& alt = out[size_t((i + 1) % 3)];
    s.fg = alt.fg;
    s.accent = base.accent;
    s.bg = {0.5f * (base.bg.r + alt.fg.r), 0.5f * (base.bg.g + alt.fg.g),
            0.5f * (base.bg.b + alt.fg.b)};
  }
  return out;
}

Tensor generate_image(const DomainSpec& spec, int size, uint64_t seed) {
  if (size < 16) throw std::invalid_argument("generate_image: size must be >= 16");
  Rng rng(seed);
  Placement pl = draw_placement(spec, rng);

  Tensor img = Tensor::zeros(Shape{3, size, size});
  float* d = img.data();
  const size_t plane = size_t(size) * size_t(size);
  const float step = 1.0f / float(size);
  for (int py = 0; py < size; ++py) {
    for (int px = 0; px < size; ++px) {
      // 2x2 subsamples per pixel
      float acc[3] = {0, 0, 0};
      for (int sy = 0; sy < 2; ++sy)
        for (int sx = 0; sx < 2; ++sx) {
          float x = (float(px) + 0.25f + 0.5f * float(sx)) * step;
          float y = (float(py) + 0.25f + 0.5f * float(sy)) * step;
          Color c = sample_color(spec, pl, x, y);
          acc[0] += c.r;
          acc[1] += c.g;
          acc[2] += c.b;
        }
      size_t i = size_t(py) * size_t(size) + size_t(px);
      for (int c = 0; c < 3; ++c) d[size_t(c) * plane + i] = acc[c] * 0.25f;
    }
  }
  return img;
}

Dataset::Dataset(std::vector<DomainSpec> specs_, int per_domain_, int image_size_,
                 uint64_t seed_)
    : specs(std::move(specs_)), per_domain(per_domain_), image_size(image_size_), seed(seed_) {
  if (specs.empty()) throw std::invalid_argument("Dataset: no domains");
  if (per_domain < 1) throw std::invalid_argument("Dataset: per_domain must be >= 1");
  images.reserve(specs.size() * size_t(per_domain));
  for (int dom = 0; dom < domains(); ++dom)
    for (int i = 0; i < per_domain; ++i) {
      images.push_back(generate_image(specs[size_t(dom)], image_size, image_seed(dom, i)));
      labels.push_back(dom);
    }
}

uint64_t Dataset::image_seed(int domain, int index) const {
  return stream_key(seed, "img", uint64_t(domain), uint64_t(index));
}

const Tensor& Dataset::image(int domain, int index) const {
  if (domain < 0 || domain >= domains())
    throw std::out_of_range("Dataset::image: domain " + std::to_string(domain));
  if (index < 0 || index >= per_domain)
    throw std::out_of_range("Dataset::image: index " + std::to_string(index));
  return images.at(size_t(domain) * size_t(per_domain) + size_t(index));
}

Batch make_batch(const Dataset& ds, int B, uint64_t seed) {
  if (B < 2) throw std::invalid_argument("make_batch: B must be >= 2");
  Rng rng(seed);
  Batch out;
  out.images = Tensor::zeros(Shape{B, 3, ds.image_size, ds.image_size});
  const size_t per = size_t(3) * size_t(ds.image_size) * size_t(ds.image_size);
  for (int i = 0; i < B; ++i) {
    int dom = rng.next_below(ds.domains());
    int idx = rng.next_below(ds.per_domain);
    const Tensor& src = ds.image(dom, idx);
    std::memcpy(out.images.data() + size_t(i) * per, src.data(), per * sizeof(float));
    out.src.push_back(dom);
  }
  return out;
}

std::vector<int> random_permutation(int n, Rng& rng) {
  std::vector<int> p(size_t(n), 0);
  for (int i = 0; i < n; ++i) p[size_t(i)] = i;
  for (int i = n - 1; i > 0; --i) std::swap(p[size_t(i)], p[size_t(rng.next_below(i + 1))]);
  return p;
}

std::vector<int> permute_targets(const std::vector<int>& src, Rng& rng) {
  auto perm = random_permutation(int(src.size()), rng);
  std::vector<int> tgt(src.size());
  for (size_t i = 0; i < src.size(); ++i) tgt[i] = src[size_t(perm[i])];
  return tgt;
}

Tensor gather_rows(const Tensor& x, const std::vector<int>& perm) {
  const Shape& s = x.shape();
  if (s.rank() < 2 || perm.empty())
    throw std::invalid_argument("gather_rows: need rank >= 2 input and a nonempty index list");
  std::vector<int> od{int(perm.size())};
  for (int i = 1; i < s.rank(); ++i) od.push_back(s[i]);
  Tensor out = Tensor::zeros(Shape::of(od));
  const size_t per = size_t(x.numel() / s[0]);
  for (size_t i = 0; i < perm.size(); ++i) {
    int j = perm[i];
    if (j < 0 || j >= s[0]) throw std::out_of_range("gather_rows: index " + std::to_string(j));
    std::memcpy(out.data() + i * per, x.data() + size_t(j) * per, per * sizeof(float));
  }
  return out;
}

Tensor stack_images(const std::vector<Tensor>& images, size_t from, size_t count) {
  if (count == 0 || from + count > images.size())
    throw std::invalid_argument("stack_images: bad range");
  const Shape& s = images[from].shape();
  if (s.rank() != 3)
    throw std::invalid_argument("stack_images: images must be [C,H,W], got " + s.str());
  Tensor out = Tensor::zeros(Shape{int(count), s[0], s[1], s[2]});
  const size_t per = size_t(s.numel());
  for (size_t i = 0; i < count; ++i) {
    if (images[from + i].shape() != s)
      throw std::invalid_argument("stack_images: mixed shapes");
    std::memcpy(out.data() + i * per, images[from + i].data(), per * sizeof(float));
  }
  return out;
}

void write_dataset_dir(const Dataset& ds, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  std::ofstream manifest(dir + "/manifest.tsv", std::ios::trunc);
  if (!manifest) throw std::runtime_error("dataset: cannot write manifest in " + dir);
  int index = 0;
  char name[32];
  for (int dom = 0; dom < ds.domains(); ++dom)
    for (int i = 0; i < ds.per_domain; ++i, ++index) {
      std::snprintf(name, sizeof name, "%05d.png", index);
      save_png(dir + "/" + name, ds.image(dom, i));
      manifest << index << '\t' << dom << '\t' << ds.image_seed(dom, i) << '\n';
    }
  if (!manifest) throw std::runtime_error("dataset: manifest write failed in " + dir);
}

DiskDataset load_dataset_dir(const std::string& dir) {
  std::ifstream manifest(dir + "/manifest.tsv");
  if (!manifest) throw std::runtime_error("dataset: cannot open " + dir + "/manifest.tsv");
  DiskDataset out;
  std::string line;
  int lineno = 0;
  char name[32];
  while (std::getline(manifest, line)) {
    ++lineno;
    if (line.empty()) continue;
    long long index, dom;
    unsigned long long seed;
    if (std::sscanf(line.c_str(), "%lld\t%lld\t%llu", &index, &dom, &seed) != 3)
      throw std::runtime_error("dataset: manifest line " + std::to_string(lineno) +
                               " is malformed");
    std::snprintf(name, sizeof name, "%05lld.png", index);
    Tensor img = load_png(dir + "/" + name);
    if (out.images.empty())
      out.image_size = img.shape()[1];
    else if (img.shape()[1] != out.image_size || img.shape()[2] != out.image_size)
      throw std::runtime_error("dataset: mixed image sizes in " + dir);
    out.images.push_back(std::move(img));
    out.labels.push_back(int(dom));
    out.domains = std::max(out.domains, int(dom) + 1);
  }
  if (out.images.empty()) throw std::runtime_error("dataset: " + dir + " is empty");
  return out;
}

}  // namespace umit
