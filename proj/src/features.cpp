#include "umit/features.hpp"

#include <cmath>
#include <stdexcept>

#include "umit/checkpoint.hpp"
#include "umit/ops.hpp"
#include "umit/rng.hpp"

namespace umit {

namespace {
std::string block_name(int b, const char* leaf) {
  return "fe.b" + std::to_string(b) + "." + leaf;
}
}  // namespace

template <typename T>
FeatureExtractor<T> build_extractor(uint64_t seed, std::vector<int> channels) {
  if (channels.size() < 3 || channels.size() > 6)
    throw std::invalid_argument("build_extractor: channel list needs 3..6 entries, got " +
                                std::to_string(channels.size()));
  for (int c : channels)
    if (c <= 0) throw std::invalid_argument("build_extractor: nonpositive channel width");
  while (channels.size() < 6) channels.push_back(channels.back());

  FeatureExtractor<T> fe;
  fe.seed = seed;
  fe.channels = channels;
  int in_c = 3;
  for (int b = 1; b <= 6; ++b) {
    int out_c = channels[size_t(b - 1)];
    Rng rng = stream(seed, "fe_init", uint64_t(b));
    T stddev = T(std::sqrt(2.0 / (double(in_c) * 9.0)));
    fe.params[block_name(b, "w")] = randn<T>(Shape{out_c, in_c, 3, 3}, rng, stddev);
    fe.params[block_name(b, "b")] = TensorT<T>::zeros(Shape{out_c});
    fe.params[block_name(b, "g")] = TensorT<T>::full(Shape{out_c}, T(1));
    fe.params[block_name(b, "bt")] = TensorT<T>::zeros(Shape{out_c});
    in_c = out_c;
  }
  return fe;
}

template <typename T>
std::array<TensorT<T>, 3> extract(const FeatureExtractor<T>& fe, const TensorT<T>& x) {
  const Shape& s = x.shape();
  if (s.rank() != 4 || s[1] != 3)
    throw std::invalid_argument("extract: input must be [B,3,H,W], got " + s.str());
  if (s[2] < 16 || s[3] < 16)
    throw std::invalid_argument("extract: spatial size must be at least 16, got " + s.str());

  const ParamMap<T>& p = fe.params;
  auto block = [&](const TensorT<T>& in, int b) {
    auto y = conv2d(in, p.at(block_name(b, "w")), p.at(block_name(b, "b")), 1, 1);
    y = instance_norm(y, p.at(block_name(b, "g")), p.at(block_name(b, "bt")));
    return activation(y, Act::Relu);
  };
  // blocks 5 and 6 exist for weight import fidelity but feed no tap,
  // so they are not evaluated here
  auto h = block(x, 1);
  auto f1 = block(h, 2);
  auto f2 = block(avg_pool2(f1), 3);
  auto f3 = block(avg_pool2(f2), 4);
  return {f1, f2, f3};
}

void import_weights(FeatureExtractor<float>& fe, const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  ParamMap<float> next;
  for (const auto& [name, t] : fe.params) {
    const Tensor* src = ck.find(name);
    if (!src) throw std::runtime_error("import_weights: checkpoint missing tensor " + name);
    if (src->shape() != t.shape())
      throw std::runtime_error("import_weights: shape mismatch for " + name + ": file has " +
                               src->shape().str() + ", model has " + t.shape().str());
    next[name] = src->clone();
  }
  fe.params = std::move(next);
}

template FeatureExtractor<float> build_extractor<float>(uint64_t, std::vector<int>);
template FeatureExtractor<double> build_extractor<double>(uint64_t, std::vector<int>);
template std::array<TensorT<float>, 3> extract<float>(const FeatureExtractor<float>&,
                                                      const TensorT<float>&);
template std::array<TensorT<double>, 3> extract<double>(const FeatureExtractor<double>&,
                                                        const TensorT<double>&);

}  // namespace umit
