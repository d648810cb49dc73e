#pragma once

#include <cstdint>
#include <vector>

#include "umit/params.hpp"

namespace umit {

// Stage widths follow base * min(2^(j-1), 16); depth = log2(image_size) - 2,
// so a 32x32 run uses 3 stages and a 128x128 run the full 5-stage table.
int model_depth(int image_size);
int stage_width(int base, int stage);  // stage is 1-indexed

struct GeneratorConfig {
  int image_size = 32;
  int channels = 3;  // C, per-image
  int domains = 3;   // N
  int base_width = 16;
  int res_stages = 3;  // residual block after encoder stages 1..min(res_stages, depth)
  bool drawer = true;  // false: plain C-channel in/out (ablation)

  int depth() const { return model_depth(image_size); }
  int in_channels() const {
    return (drawer ? channels * domains : channels) + domains;
  }
  int out_channels() const { return drawer ? channels * domains : channels; }
  void validate() const;
};

struct DiscriminatorConfig {
  int image_size = 32;
  int channels = 3;
  int domains = 3;
  int base_width = 16;
  int dilation_count = 3;  // stages immediately before the last run dilation 2,
                           // clamped to depth-1 so the final stage never dilates
  int fc_width_mult = 16;  // adv head hidden width = fc_width_mult * base_width
  int cls_tap1 = 0;        // 0 = auto: round(2*depth/3)
  int cls_tap2 = 0;        // 0 = auto: depth

  int depth() const { return model_depth(image_size); }
  int tap1() const;
  int tap2() const;
  int dilated_from() const;  // first 1-indexed dilated stage; depth+1 when none
  void validate() const;
};

template <typename T>
struct DiscOut {
  TensorT<T> adv;   // [B,1] unbounded critic score
  TensorT<T> cls1;  // [B,N] logits from the shallower tap
  TensorT<T> cls2;  // [B,N] logits from the final stage
};

// All trainable tensors are created with requires_grad set.
template <typename T>
ParamMap<T> init_generator_params(const GeneratorConfig& cfg, uint64_t seed);
template <typename T>
ParamMap<T> init_discriminator_params(const DiscriminatorConfig& cfg, uint64_t seed);

template <typename T>
TensorT<T> generator_forward(const GeneratorConfig& cfg, const ParamMap<T>& p,
                             const TensorT<T>& in);
template <typename T>
DiscOut<T> discriminator_forward(const DiscriminatorConfig& cfg, const ParamMap<T>& p,
                                 const TensorT<T>& x);

// Drawer mechanics: per-sample channel slots plus one-hot condition maps.
template <typename T>
TensorT<T> drawer_pack(const TensorT<T>& images, const std::vector<int>& src, int domains);
template <typename T>
TensorT<T> drawer_unpack(const TensorT<T>& packed, const std::vector<int>& tgt, int domains);
template <typename T>
TensorT<T> target_condition_maps(const std::vector<int>& tgt, int domains, int h, int w);

// pack -> append condition maps -> generator -> unpack (or the plain-image
// path when cfg.drawer is off)
template <typename T>
TensorT<T> translate_batch(const GeneratorConfig& cfg, const ParamMap<T>& p,
                           const TensorT<T>& x, const std::vector<int>& src,
                           const std::vector<int>& tgt);

// receptive field of the final discriminator stage: r += (k-1)*dil*jump
int discriminator_receptive_field(const DiscriminatorConfig& cfg);

}  // namespace umit
