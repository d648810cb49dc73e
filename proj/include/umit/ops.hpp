#pragma once

#include <vector>

#include "umit/kernels.hpp"
#include "umit/rng.hpp"
#include "umit/tensor.hpp"

// Differentiable operator set. Every op runs its forward kernel and, when a
// tape is live and an input is tracked, records a node whose VJP is itself
// composed of these public ops wherever a second derivative can be needed
// (the gradient penalty path). The few fused VJPs (instance_norm,
// softmax_cross_entropy, gram_matrix, pooling) refuse to run while recording,
// which no supported loss path does.
namespace umit {

enum class Act { Relu, LeakyRelu, Tanh, Linear };
enum class Reduce { Mean, Sum, L1Mean, L2Norm };

template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& bias,
                  int stride, int pad, int dil = 1);
// out_h/out_w pin the geometry when the conv output size is ambiguous (odd
// input sizes under stride); -1 means the closed-form default.
template <typename T>
TensorT<T> transposed_conv2d(const TensorT<T>& x, const TensorT<T>& w,
                             const TensorT<T>& bias, int stride, int pad, int dil = 1,
                             int out_h = -1, int out_w = -1);
// weight gradient of conv2d as a first-class op (appears in second-order
// sweeps as the VJP of both conv flavors); not differentiable further
template <typename T>
TensorT<T> conv2d_wgrad(const TensorT<T>& x, const TensorT<T>& gy, int k, int stride,
                        int pad, int dil = 1);

template <typename T>
TensorT<T> instance_norm(const TensorT<T>& x, const TensorT<T>& gamma,
                         const TensorT<T>& beta, T eps = T(1e-5));
template <typename T>
TensorT<T> activation(const TensorT<T>& x, Act kind, T slope = T(0.2));
template <typename T>
TensorT<T> fully_connected(const TensorT<T>& x, const TensorT<T>& w,
                           const TensorT<T>& bias);
template <typename T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b);
template <typename T>
TensorT<T> transpose2(const TensorT<T>& a);

template <typename T>
TensorT<T> concat_channels(const std::vector<TensorT<T>>& parts);
template <typename T>
TensorT<T> slice_channels(const TensorT<T>& x, int from, int to);
template <typename T>
TensorT<T> pad_channels(const TensorT<T>& x, int from, int total);

template <typename T>
TensorT<T> gram_matrix(const TensorT<T>& f);
template <typename T>
TensorT<T> softmax_cross_entropy(const TensorT<T>& logits, const std::vector<int>& labels);
template <typename T>
TensorT<T> reduce(const TensorT<T>& x, Reduce kind);

// elementwise / scalar plumbing
template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b);
template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b);
template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b);
template <typename T>
TensorT<T> neg(const TensorT<T>& a);
template <typename T>
TensorT<T> scalar_mul(const TensorT<T>& a, T c);
template <typename T>
TensorT<T> scalar_add(const TensorT<T>& a, T c);
template <typename T>
TensorT<T> square(const TensorT<T>& a);
template <typename T>
TensorT<T> abs(const TensorT<T>& a);
template <typename T>
TensorT<T> reciprocal(const TensorT<T>& a);
template <typename T>
TensorT<T> sqrt_eps(const TensorT<T>& a, T eps);
// out = x * s with s a 1-element tensor
template <typename T>
TensorT<T> scale_by(const TensorT<T>& x, const TensorT<T>& s);

template <typename T>
TensorT<T> sum(const TensorT<T>& x);
template <typename T>
TensorT<T> mean(const TensorT<T>& x);
template <typename T>
TensorT<T> broadcast_scalar(const TensorT<T>& s, Shape shape);

template <typename T>
TensorT<T> reshape(const TensorT<T>& x, Shape shape);
template <typename T>
TensorT<T> row_sum(const TensorT<T>& x);  // [B,N] -> [B]
template <typename T>
TensorT<T> broadcast_row(const TensorT<T>& x, int n);  // [B] -> [B,n]
template <typename T>
TensorT<T> col_sum(const TensorT<T>& x);  // [B,N] -> [N]
template <typename T>
TensorT<T> add_row_bias(const TensorT<T>& x, const TensorT<T>& b);
template <typename T>
TensorT<T> add_channel_bias(const TensorT<T>& x, const TensorT<T>& b);
template <typename T>
TensorT<T> channel_sum(const TensorT<T>& x);  // [B,C,H,W] -> [C]

template <typename T>
TensorT<T> avg_pool2(const TensorT<T>& x);
template <typename T>
TensorT<T> global_avg_pool(const TensorT<T>& x);  // [B,C,H,W] -> [B,C]

// drawer mechanics: per-sample channel-slot scatter/gather
template <typename T>
TensorT<T> place_slots(const TensorT<T>& x, const std::vector<int>& slot, int n_slots);
template <typename T>
TensorT<T> select_slots(const TensorT<T>& x, const std::vector<int>& slot, int n_slots);

// per-sample convex combination t*a + (1-t)*b, t constant
template <typename T>
TensorT<T> lerp_rows(const TensorT<T>& a, const TensorT<T>& b, const std::vector<T>& t);

template <typename T>
TensorT<T> randn(Shape shape, Rng& rng, T stddev = T(1), T mean = T(0));
template <typename T>
TensorT<T> ones(Shape shape);

}  // namespace umit
