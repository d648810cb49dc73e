#include "umit/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "umit/ops.hpp"
#include "umit/rng.hpp"

namespace umit {

namespace {

void check_labels(const std::vector<int>& labels, int domains, const char* who) {
  for (int v : labels)
    if (v < 0 || v >= domains)
      throw std::out_of_range(std::string(who) + ": label " + std::to_string(v) +
                              " outside [0," + std::to_string(domains) + ")");
}

void check_size(int image_size, const char* who) {
  if (image_size < 16 || (image_size & (image_size - 1)) != 0)
    throw std::invalid_argument(std::string(who) + ": image_size must be a power of two >= 16, got " +
                                std::to_string(image_size));
}

template <typename T>
struct ParamInit {
  ParamMap<T>& p;
  uint64_t seed;
  void weight(const std::string& name, Shape s) {
    Rng rng = stream(seed, name);
    p[name] = randn<T>(s, rng, T(0.02)).set_requires_grad(true);
  }
  void bias(const std::string& name, int n) {
    p[name] = TensorT<T>::zeros(Shape{n}).set_requires_grad(true);
  }
  void norm(const std::string& prefix, int n) {
    p[prefix + ".g"] = TensorT<T>::full(Shape{n}, T(1)).set_requires_grad(true);
    p[prefix + ".bt"] = TensorT<T>::zeros(Shape{n}).set_requires_grad(true);
  }
};

}  // namespace

int model_depth(int image_size) {
  check_size(image_size, "model_depth");
  int log2 = 0;
  while ((1 << log2) < image_size) ++log2;
  return log2 - 2;
}

int stage_width(int base, int stage) {
  int mult = 1 << (stage - 1);
  return base * std::min(mult, 16);
}

void GeneratorConfig::validate() const {
  check_size(image_size, "GeneratorConfig");
  if (channels < 1 || domains < 1 || base_width < 1 || res_stages < 0)
    throw std::invalid_argument("GeneratorConfig: nonpositive field");
}

void DiscriminatorConfig::validate() const {
  check_size(image_size, "DiscriminatorConfig");
  if (channels < 1 || domains < 1 || base_width < 1 || fc_width_mult < 1)
    throw std::invalid_argument("DiscriminatorConfig: nonpositive field");
  if (dilation_count < 0 || dilation_count > 3)
    throw std::invalid_argument("DiscriminatorConfig: dilation_count must be in [0,3]");
  int d = depth();
  if (tap1() < 1 || tap1() > d || tap2() < 1 || tap2() > d)
    throw std::invalid_argument("DiscriminatorConfig: classifier tap outside [1,depth]");
}

int DiscriminatorConfig::tap1() const {
  if (cls_tap1 > 0) return cls_tap1;
  return int(std::lround(2.0 * depth() / 3.0));
}

int DiscriminatorConfig::tap2() const { return cls_tap2 > 0 ? cls_tap2 : depth(); }

int DiscriminatorConfig::dilated_from() const {
  int d = depth();
  int m = std::min(dilation_count, d - 1);
  return d - m;  // stages [d-m, d-1] dilate; m == 0 gives d, exceeding d-1
}

template <typename T>
ParamMap<T> init_generator_params(const GeneratorConfig& cfg, uint64_t seed) {
  cfg.validate();
  ParamMap<T> p;
  ParamInit<T> init{p, seed};
  const int d = cfg.depth();
  const int res_upto = std::min(cfg.res_stages, d);

  int in_c = cfg.in_channels();
  for (int j = 1; j <= d; ++j) {
    const int out_c = stage_width(cfg.base_width, j);
    const std::string e = "g.enc" + std::to_string(j);
    init.weight(e + ".w", Shape{out_c, in_c, 4, 4});
    init.bias(e + ".b", out_c);
    init.norm(e, out_c);
    if (j <= res_upto) {
      const std::string r = "g.res" + std::to_string(j);
      for (const char* c : {"c1", "c2"}) {
        init.weight(r + "." + c + ".w", Shape{out_c, out_c, 3, 3});
        init.bias(r + "." + c + ".b", out_c);
        init.norm(r + "." + c, out_c);
      }
    }
    in_c = out_c;
  }

  int prev = stage_width(cfg.base_width, d);
  for (int j = 1; j <= d; ++j) {
    const int out_c = stage_width(cfg.base_width, d - j + 1);
    const int skip = (j == 1) ? 0 : stage_width(cfg.base_width, d - j + 1);
    const std::string n = "g.dec" + std::to_string(j);
    init.weight(n + ".w", Shape{prev + skip, out_c, 4, 4});
    init.bias(n + ".b", out_c);
    init.norm(n, out_c);
    prev = out_c;
  }
  init.weight("g.final.w", Shape{prev, cfg.out_channels(), 3, 3});
  init.bias("g.final.b", cfg.out_channels());
  return p;
}

template <typename T>
ParamMap<T> init_discriminator_params(const DiscriminatorConfig& cfg, uint64_t seed) {
  cfg.validate();
  ParamMap<T> p;
  ParamInit<T> init{p, seed};
  const int d = cfg.depth();

  int in_c = cfg.channels;
  for (int j = 1; j <= d; ++j) {
    const int out_c = stage_width(cfg.base_width, j);
    const std::string s = "d.s" + std::to_string(j);
    init.weight(s + ".w", Shape{out_c, in_c, 4, 4});
    init.bias(s + ".b", out_c);
    in_c = out_c;
  }

  const int final_c = stage_width(cfg.base_width, d);
  const int final_hw = cfg.image_size >> d;  // k4 s2 halves every stage
  const int flat = final_c * final_hw * final_hw;
  const int hidden = cfg.fc_width_mult * cfg.base_width;
  init.weight("d.adv.fc1.w", Shape{flat, hidden});
  init.bias("d.adv.fc1.b", hidden);
  init.weight("d.adv.fc2.w", Shape{hidden, 1});
  init.bias("d.adv.fc2.b", 1);
  init.weight("d.cls1.w", Shape{stage_width(cfg.base_width, cfg.tap1()), cfg.domains});
  init.bias("d.cls1.b", cfg.domains);
  init.weight("d.cls2.w", Shape{stage_width(cfg.base_width, cfg.tap2()), cfg.domains});
  init.bias("d.cls2.b", cfg.domains);
  return p;
}

template <typename T>
TensorT<T> generator_forward(const GeneratorConfig& cfg, const ParamMap<T>& p,
                             const TensorT<T>& in) {
  const Shape& s = in.shape();
  if (s.rank() != 4 || s[1] != cfg.in_channels() || s[2] != cfg.image_size ||
      s[3] != cfg.image_size)
    throw std::invalid_argument("generator_forward: expected [B," +
                                std::to_string(cfg.in_channels()) + "," +
                                std::to_string(cfg.image_size) + "," +
                                std::to_string(cfg.image_size) + "], got " + s.str());
  const int d = cfg.depth();
  const int res_upto = std::min(cfg.res_stages, d);

  auto in_block = [&](const TensorT<T>& x, const std::string& n, Act act) {
    return activation(instance_norm(x, p.at(n + ".g"), p.at(n + ".bt")), act);
  };

  std::vector<TensorT<T>> enc;
  TensorT<T> h = in;
  for (int j = 1; j <= d; ++j) {
    const std::string e = "g.enc" + std::to_string(j);
    h = in_block(conv2d(h, p.at(e + ".w"), p.at(e + ".b"), 2, 1), e, Act::LeakyRelu);
    if (j <= res_upto) {
      const std::string r = "g.res" + std::to_string(j);
      auto t = in_block(conv2d(h, p.at(r + ".c1.w"), p.at(r + ".c1.b"), 1, 1), r + ".c1",
                        Act::Relu);
      t = instance_norm(conv2d(t, p.at(r + ".c2.w"), p.at(r + ".c2.b"), 1, 1),
                        p.at(r + ".c2.g"), p.at(r + ".c2.bt"));
      h = add(h, t);
    }
    enc.push_back(h);
  }

  TensorT<T> u = enc.back();
  for (int j = 1; j <= d; ++j) {
    const std::string n = "g.dec" + std::to_string(j);
    TensorT<T> t = (j == 1) ? u : concat_channels<T>({u, enc[size_t(d - j)]});
    u = in_block(transposed_conv2d(t, p.at(n + ".w"), p.at(n + ".b"), 2, 1), n, Act::Relu);
  }
  return activation(transposed_conv2d(u, p.at("g.final.w"), p.at("g.final.b"), 1, 1),
                    Act::Tanh);
}

template <typename T>
DiscOut<T> discriminator_forward(const DiscriminatorConfig& cfg, const ParamMap<T>& p,
                                 const TensorT<T>& x) {
  const Shape& s = x.shape();
  if (s.rank() != 4 || s[1] != cfg.channels || s[2] != cfg.image_size ||
      s[3] != cfg.image_size)
    throw std::invalid_argument("discriminator_forward: expected [B," +
                                std::to_string(cfg.channels) + "," +
                                std::to_string(cfg.image_size) + "," +
                                std::to_string(cfg.image_size) + "], got " + s.str());
  const int d = cfg.depth();
  const int dil_from = cfg.dilated_from();

  auto head = [&](const TensorT<T>& feat, const std::string& n) {
    return fully_connected(global_avg_pool(feat), p.at(n + ".w"), p.at(n + ".b"));
  };

  DiscOut<T> out;
  TensorT<T> h = x;
  for (int j = 1; j <= d; ++j) {
    const std::string n = "d.s" + std::to_string(j);
    // dilation 2 with pad 3 keeps the k4 s2 halving geometry
    const bool dilated = j >= dil_from && j < d;
    h = activation(conv2d(h, p.at(n + ".w"), p.at(n + ".b"), 2, dilated ? 3 : 1,
                          dilated ? 2 : 1),
                   Act::LeakyRelu);
    if (j == cfg.tap1()) out.cls1 = head(h, "d.cls1");
    if (j == cfg.tap2()) out.cls2 = head(h, "d.cls2");
  }

  const int B = s[0];
  auto flat = reshape(h, Shape{B, int(h.numel() / B)});
  auto a = activation(fully_connected(flat, p.at("d.adv.fc1.w"), p.at("d.adv.fc1.b")),
                      Act::LeakyRelu);
  out.adv = fully_connected(a, p.at("d.adv.fc2.w"), p.at("d.adv.fc2.b"));
  return out;
}

template <typename T>
TensorT<T> drawer_pack(const TensorT<T>& images, const std::vector<int>& src, int domains) {
  check_labels(src, domains, "drawer_pack");
  return place_slots(images, src, domains);
}

template <typename T>
TensorT<T> drawer_unpack(const TensorT<T>& packed, const std::vector<int>& tgt, int domains) {
  check_labels(tgt, domains, "drawer_unpack");
  return select_slots(packed, tgt, domains);
}

template <typename T>
TensorT<T> target_condition_maps(const std::vector<int>& tgt, int domains, int h, int w) {
  check_labels(tgt, domains, "target_condition_maps");
  const int B = int(tgt.size());
  TensorT<T> maps = TensorT<T>::zeros(Shape{B, domains, h, w});
  T* m = maps.data();
  const int64_t hw = int64_t(h) * w;
  for (int i = 0; i < B; ++i) {
    T* ch = m + (int64_t(i) * domains + tgt[size_t(i)]) * hw;
    for (int64_t q = 0; q < hw; ++q) ch[q] = T(1);
  }
  return maps;
}

template <typename T>
TensorT<T> translate_batch(const GeneratorConfig& cfg, const ParamMap<T>& p,
                           const TensorT<T>& x, const std::vector<int>& src,
                           const std::vector<int>& tgt) {
  const Shape& s = x.shape();
  if (s.rank() != 4) throw std::invalid_argument("translate_batch: expected [B,C,H,W]");
  if (size_t(s[0]) != src.size() || src.size() != tgt.size())
    throw std::invalid_argument("translate_batch: label count does not match batch");
  auto cond = target_condition_maps<T>(tgt, cfg.domains, s[2], s[3]);
  if (!cfg.drawer)
    return generator_forward(cfg, p, concat_channels<T>({x, cond}));
  auto packed = drawer_pack(x, src, cfg.domains);
  auto out = generator_forward(cfg, p, concat_channels<T>({packed, cond}));
  return drawer_unpack(out, tgt, cfg.domains);
}

int discriminator_receptive_field(const DiscriminatorConfig& cfg) {
  const int d = cfg.depth();
  const int dil_from = cfg.dilated_from();
  int r = 1, jump = 1;
  for (int j = 1; j <= d; ++j) {
    const int dil = (j >= dil_from && j < d) ? 2 : 1;
    r += 3 * dil * jump;  // (k-1) * dilation * input stride product
    jump *= 2;
  }
  return r;
}

#define UMIT_INSTANTIATE_MODEL(T)                                                          \
  template ParamMap<T> init_generator_params<T>(const GeneratorConfig&, uint64_t);         \
  template ParamMap<T> init_discriminator_params<T>(const DiscriminatorConfig&, uint64_t); \
  template TensorT<T> generator_forward<T>(const GeneratorConfig&, const ParamMap<T>&,     \
                                           const TensorT<T>&);                             \
  template DiscOut<T> discriminator_forward<T>(const DiscriminatorConfig&,                 \
                                               const ParamMap<T>&, const TensorT<T>&);     \
  template TensorT<T> drawer_pack<T>(const TensorT<T>&, const std::vector<int>&, int);     \
  template TensorT<T> drawer_unpack<T>(const TensorT<T>&, const std::vector<int>&, int);   \
  template TensorT<T> target_condition_maps<T>(const std::vector<int>&, int, int, int);    \
  template TensorT<T> translate_batch<T>(const GeneratorConfig&, const ParamMap<T>&,       \
                                         const TensorT<T>&, const std::vector<int>&,       \
                                         const std::vector<int>&);

UMIT_INSTANTIATE_MODEL(float)
UMIT_INSTANTIATE_MODEL(double)

}  // namespace umit
