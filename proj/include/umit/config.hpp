#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "umit/losses.hpp"
#include "umit/model.hpp"

namespace umit {

// Flat key=value run configuration. Keys match field names exactly; unknown
// keys and malformed lines are errors naming the offender.
struct TrainConfig {
  long long total_iters = 3000;
  int batch = 16;
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  long long decay_point = -1;  // -1: total_iters / 2
  double decay_factor = 10;
  int d_steps_per_g = 1;
  uint64_t seed = 17;

  double lambda_gp = 10;
  double lambda_1 = 1;
  double lambda_2 = 0.5;
  double lambda_identity = 10;
  double lambda_vgg = 0.5;
  double lambda_style_inner = 1;
  std::string style_stat = "gram";  // gram | meanstd
  bool cls_fake_to_d = false;
  bool identity_on_target = false;

  int image_size = 32;
  int channels = 3;
  int domains = 3;
  int base_width_g = 16;
  int base_width_d = 16;
  int res_stages = 3;
  bool drawer = true;
  int dilation_count = 3;
  int fc_width_mult = 16;
  int cls_tap1 = 0;
  int cls_tap2 = 0;
  std::vector<int> fe_channels = {16, 32, 64};

  int per_domain = 200;
  long long ckpt_interval = 1000;
  long long sample_interval = 1000;

  static TrainConfig from_file(const std::string& path);
  static TrainConfig from_string(const std::string& text);
  void set(const std::string& key, const std::string& value);
  void validate() const;

  long long effective_decay_point() const {
    return decay_point >= 0 ? decay_point : total_iters / 2;
  }
  GeneratorConfig generator_config() const;
  DiscriminatorConfig discriminator_config() const;
  LossWeights<float> loss_weights() const;
  StyleStat style() const;
};

}  // namespace umit
