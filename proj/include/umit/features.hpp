#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "umit/params.hpp"

namespace umit {

// Frozen random-weight perceptual network: six conv blocks (k3 s1 p1 +
// instance norm + relu) with 2x average pools after blocks 2 and 3, so the
// taps off blocks 2, 3, 4 sit at resolutions H, H/2, H/4. Weights come from
// the seed and are never trained; gradients flow into the input only.
template <typename T>
struct FeatureExtractor {
  ParamMap<T> params;
  std::vector<int> channels;  // per-block output widths, always length 6
  uint64_t seed = 0;
};

// channels: 3..6 entries; missing trailing blocks repeat the last width.
template <typename T>
FeatureExtractor<T> build_extractor(uint64_t seed, std::vector<int> channels);

// (f1, f2, f3), shallowest to deepest. Input must be [B,3,H,W], H and W >= 16.
template <typename T>
std::array<TensorT<T>, 3> extract(const FeatureExtractor<T>& fe, const TensorT<T>& x);

// Replaces all weights from a checkpoint container; every existing tensor
// must be present in the file with an identical shape. No partial updates.
void import_weights(FeatureExtractor<float>& fe, const std::string& path);

}  // namespace umit
