#include "umit/ops.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace umit {

namespace {

template <typename T>
void check_finite(const TensorT<T>& t, const char* op) {
#ifdef UMIT_CHECK_FINITE
  for (T v : t.vec())
    if (!std::isfinite(double(v)))
      throw std::runtime_error(std::string(op) + ": non-finite output value");
#else
  (void)t;
  (void)op;
#endif
}

inline void expect(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

template <typename T>
bool is_tracked(const TensorT<T>& t, Tape<T>* tape) {
  if (!t.defined()) return false;
  if (tape && t.tape_id == tape->id() && t.node >= 0) return true;
  return t.requires_grad();
}

template <typename T>
bool want_record(std::initializer_list<const TensorT<T>*> ins) {
  if (!Tape<T>::recording()) return false;
  Tape<T>* tape = Tape<T>::current();
  for (auto* p : ins)
    if (is_tracked(*p, tape)) return true;
  return false;
}

template <typename T, typename F>
void record_node(const char* name, TensorT<T>& out,
                 std::initializer_list<const TensorT<T>*> ins, F&& vjp) {
  Tape<T>* tape = Tape<T>::current();
  TapeNode<T> nd;
  nd.name = name;
  nd.n_parents = int(ins.size());
  int i = 0;
  for (auto* p : ins) {
    if (p->defined() && tape && p->tape_id == tape->id() && p->node >= 0)
      nd.parents[size_t(i)] = p->node;
    else if (p->defined() && p->requires_grad())
      nd.parents[size_t(i)] = -2 - tape->leaf_slot(*p);
    else
      nd.parents[size_t(i)] = -1;
    ++i;
  }
  nd.vjp = std::forward<F>(vjp);
  out.node = tape->append(std::move(nd));
  out.tape_id = tape->id();
}

template <typename T>
[[noreturn]] void no_second_order(const char* op) {
  throw std::logic_error(std::string(op) +
                         ": VJP cannot be recorded (second-order unsupported here)");
}

}  // namespace

// ---------------------------------------------------------------------------
// elementwise & scalar

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  expect(a.shape() == b.shape(), "add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  TensorT<T> y = TensorT<T>::zeros(a.shape());
  kernels<T>::add(a.data(), b.data(), a.numel(), y.data());
  check_finite(y, "add");
  if (want_record<T>({&a, &b}))
    record_node("add", y, {&a, &b},
                [](const TensorT<T>& g, const std::array<bool, 3>& need,
                   std::array<TensorT<T>, 3>& out) {
                  if (need[0]) out[0] = g;
                  if (need[1]) out[1] = g;
                });
  return y;
}

template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  expect(a.shape() == b.shape(), "sub: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  TensorT<T> y = TensorT<T>::zeros(a.shape());
  kernels<T>::sub(a.data(), b.data(), a.numel(), y.data());
  check_finite(y, "sub");
  if (want_record<T>({&a, &b}))
    record_node("sub", y, {&a, &b},
                [](const TensorT<T>& g, const std::array<bool, 3>& need,
                   std::array<TensorT<T>, 3>& out) {
                  if (need[0]) out[0] = g;
                  if (need[1]) out[1] = neg(g);
                });
  return y;
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  expect(a.shape() == b.shape(), "mul: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  TensorT<T> y = TensorT<T>::zeros(a.shape());
  kernels<T>::mul(a.data(), b.data(), a.numel(), y.data());
  check_finite(y, "mul");
  // captures keep their tape linkage so a re-recorded VJP (second order)
  // still sees the dependence on a and b
  if (want_record<T>({&a, &b}))
    record_node("mul", y, {&a, &b},
                [a, b](const TensorT<T>& g, const std::array<bool, 3>& need,
                       std::array<TensorT<T>, 3>& out) {
                  if (need[0]) out[0] = mul(g, b);
                  if (need[1]) out[1] = mul(g, a);
                });
  return y;
}

template <typename T>
TensorT<T> neg(const TensorT<T>& a) {
  TensorT<T> y = TensorT<T>::zeros(a.shape());
  kernels<T>::neg(a.data(), a.numel(), y.data());
  if (want_record<T>({&a}))
    record_node("neg", y, {&a},
                [](const TensorT<T>& g, const std::array<bool, 3>& need,
                   std::array<TensorT<T>, 3>& out) {
                  if (need[0]) out[0] = neg(g);
                });
  return y;
}

template <typename T>
TensorT<T> scalar_mul(const TensorT<T>& a, T c) {
  TensorT<T> y = TensorT<T>::zeros(a.shape());
  kernels<T>::scalar_mul(a.data(), c, a.numel(), y.data());
  check_finite(y, "scalar_mul");
  if (want_record<T>({&a}))
    record_node("scalar_mul", y, {&a},
                [c](const TensorT<T>& g, const std::array<bool, 3>& need,
                    std::array<TensorT<T>, 3>& out) {
                  if (need[0]) out[0] = scalar_mul(g, c);
                });
  return y;
}

template <typename T>
TensorT<T> scalar_add(const TensorT<T>& a, T c) {
  TensorT<T> y = TensorT<T>::zeros(a.shape());
  kernels<T>::scalar_add(a.data(), c, a.numel(), y.data());
  if (want_record<T>({&a}))
    record_node("scalar_add", y, {&a},
                [](const TensorT<T>& g, const std::array<bool, 3>& need,
                   std::array<TensorT<T>, 3>& out) {
                  if (need[0]) out[0] = g;
                });
  return y;
}

template <typename T>
TensorT<T> square(const TensorT<T>& a) {
  TensorT<T> y = TensorT<T>::zeros(a.shape());
  kernels<T>::square(a.data(), a.numel(), y.data());
  check_finite(y, "square");
  if (want_record<T>({&a}))
    record_node("square", y, {&a},
                [a](const TensorT<T>& g, const std::array<bool, 3>& need,
                    std::array<TensorT<T>, 3>& out) {
                  if (need[0]) out[0] = mul(g, scalar_mul(a, T(2)));
                });
  return y;
}

template <typename T>
TensorT<T> abs(const TensorT<T>& a) {
  TensorT<T> y = TensorT<T>::zeros(a.shape());
  kernels<T>::abs_(a.data(), a.numel(), y.data());
  if (want_record<T>({&a})) {
    TensorT<T> mask = TensorT<T>::zeros(a.shape());
    kernels<T>::sign(a.data(), a.numel(), mask.data());
    record_node("abs", y, {&a},
                [mask](const TensorT<T>& g, const std::array<bool, 3>& need,
                       std::array<TensorT<T>, 3>& out) {
                  if (need[0]) out[0] = mul(g, mask);
                });
  }
  return y;
}

template <typename T>
TensorT<T> reciprocal(const TensorT<T>& a) {
  TensorT<T> y = TensorT<T>::zeros(a.shape());
  kernels<T>::reciprocal(a.data(), a.numel(), y.data());
  check_finite(y, "reciprocal");
  if (want_record<T>({&a})) {
    // the VJP references the op's own (recorded) output; patched in below once
    // the node id exists, so second-order sweeps see the full dependence
    auto self = std::make_shared<TensorT<T>>();
    record_node("reciprocal", y, {&a},
                [self](const TensorT<T>& g, const std::array<bool, 3>& need,
                       std::array<TensorT<T>, 3>& out) {
                  if (need[0]) out[0] = neg(mul(g, square(*self)));
                });
    *self = y;
  }
  return y;
}

template <typename T>
TensorT<T> sqrt_eps(const TensorT<T>& a, T eps) {
  TensorT<T> y = TensorT<T>::zeros(a.shape());
  kernels<T>::sqrt_eps(a.data(), eps, a.numel(), y.data());
  check_finite(y, "sqrt_eps");
  if (want_record<T>({&a})) {
    auto self = std::make_shared<TensorT<T>>();
    record_node("sqrt_eps", y, {&a},
                [self](const TensorT<T>& g, const std::array<bool, 3>& need,
                       std::array<TensorT<T>, 3>& out) {
                  if (need[0]) out[0] = mul(g, scalar_mul(reciprocal(*self), T(0.5)));
                });
    *self = y;
  }
  return y;
}

template <typename T>
TensorT<T> scale_by(const TensorT<T>& x, const TensorT<T>& s) {
  expect(s.numel() == 1, "scale_by: scale must be a 1-element tensor");
  TensorT<T> y = TensorT<T>::zeros(x.shape());
  kernels<T>::scalar_mul(x.data(), s.data()[0], x.numel(), y.data());
  check_finite(y, "scale_by");
  if (want_record<T>({&x, &s}))
    record_node("scale_by", y, {&x, &s},
                [x, s](const TensorT<T>& g, const std::array<bool, 3>& need,
                       std::array<TensorT<T>, 3>& out) {
                  if (need[0]) out[0] = scale_by(g, s);
                  if (need[1]) out[1] = sum(mul(g, x));
                });
  return y;
}

// ---------------------------------------------------------------------------
// reductions / broadcasts

template <typename T>
TensorT<T> sum(const TensorT<T>& x) {
  TensorT<T> y = TensorT<T>::scalar(kernels<T>::sum(x.data(), x.numel()));
  check_finite(y, "sum");
  if (want_record<T>({&x})) {
    Shape sh = x.shape();
    record_node("sum", y, {&x},
                [sh](const TensorT<T>& g, const std::array<bool, 3>& need,
                     std::array<TensorT<T>, 3>& out) {
                  if (need[0]) out[0] = broadcast_scalar(g, sh);
                });
  }
  return y;
}

template <typename T>
TensorT<T> broadcast_scalar(const TensorT<T>& s, Shape shape) {
  expect(s.numel() == 1, "broadcast_scalar: source must be scalar");
  TensorT<T> y = TensorT<T>::full(shape, s.data()[0]);
  if (want_record<T>({&s}))
    record_node("broadcast_scalar", y, {&s},
                [](const TensorT<T>& g, const std::array<bool, 3>& need,
                   std::array<TensorT<T>, 3>& out) {
                  if (need[0]) out[0] = sum(g);
                });
  return y;
}

template <typename T>
TensorT<T> mean(const TensorT<T>& x) {
  return scalar_mul(sum(x), T(1) / T(x.numel()));
}

template <typename T>
TensorT<T> reduce(const TensorT<T>& x, Reduce kind) {
  switch (kind) {
    case Reduce::Sum:
      return sum(x);
    case Reduce::Mean:
      return mean(x);
    case Reduce::L1Mean:
      return scalar_mul(sum(abs(x)), T(1) / T(x.numel()));
    case Reduce::L2Norm:
      return sqrt_eps(sum(square(x)), T(0));
  }
  throw std::logic_error("reduce: bad kind");
}

template <typename T>
TensorT<T> reshape(const TensorT<T>& x, Shape shape) {
  expect(shape.numel() == x.numel(),
         "reshape: element count mismatch " + x.shape().str() + " -> " + shape.str());
  TensorT<T> y = TensorT<T>::from(shape, x.vec());
  if (want_record<T>({&x})) {
    Shape orig = x.shape();
    record_node("reshape", y, {&x},
                [orig](const TensorT<T>& g, const std::array<bool, 3>& need,
                       std::array<TensorT<T>, 3>& out) {
                  if (need[0]) out[0] = reshape(g, orig);
                });
  }
  return y;
}

template <typename T>
TensorT<T> row_sum(const TensorT<T>& x) {
  expect(x.shape().rank() == 2, "row_sum: expected rank-2, got " + x.shape().str());
  const int B = x.shape()[0], N = x.shape()[1];
  TensorT<T> y = TensorT<T>::zeros(Shape{B});
  kernels<T>::row_sum(x.data(), B, N, y.data());
  if (want_record<T>({&x}))
    record_node("row_sum", y, {&x},
                [N](const TensorT<T>& g, const std::array<bool, 3>& need,
                    std::array<TensorT<T>, 3>& out) {
                  if (need[0]) out[0] = broadcast_row(g, N);
                });
  return y;
}

template <typename T>
TensorT<T> broadcast_row(const TensorT<T>& x, int n) {
  expect(x.shape().rank() == 1, "broadcast_row: expected rank-1, got " + x.shape().str());
  const int B = x.shape()[0];
  TensorT<T> y = TensorT<T>::zeros(Shape{B, n});
  kernels<T>::broadcast_row_scalar(x.data(), B, n, y.data());
  if (want_record<T>({&x}))
    record_node("broadcast_row", y, {&x},
                [](const TensorT<T>& g, const std::array<bool, 3>& need,
                   std::array<TensorT<T>, 3>& out) {
                  if (need[0]) out[0] = row_sum(g);
                });
  return y;
}

template <typename T>
TensorT<T> col_sum(const TensorT<T>& x) {
  expect(x.shape().rank() == 2, "col_sum: expected rank-2, got " + x.shape().str());
  const int B = x.shape()[0], N = x.shape()[1];
  TensorT<T> y = TensorT<T>::zeros(Shape{N});
  kernels<T>::col_sum(x.data(), B, N, y.data());
  if (want_record<T>({&x}))
    record_node("col_sum", y, {&x},
                [B, N](const TensorT<T>& g, const std::array<bool, 3>& need,
                       std::array<TensorT<T>, 3>& out) {
                  if (!need[0]) return;
                  if (Tape<T>::recording()) no_second_order<T>("col_sum");
                  TensorT<T> dx = TensorT<T>::zeros(Shape{B, N});
                  kernels<T>::broadcast_rows(g.data(), B, N, dx.data());
                  out[0] = dx;
                });
  return y;
}

// ---------------------------------------------------------------------------
// activations

template <typename T>
TensorT<T> activation(const TensorT<T>& x, Act kind, T slope) {
  TensorT<T> y = TensorT<T>::zeros(x.shape());
  const int64_t n = x.numel();
  switch (kind) {
    case Act::Relu:
      kernels<T>::relu(x.data(), n, y.data());
      break;
    case Act::LeakyRelu:
      kernels<T>::leaky_relu(x.data(), n, slope, y.data());
      break;
    case Act::Tanh:
      kernels<T>::tanh_(x.data(), n, y.data());
      break;
    case Act::Linear:
      std::memcpy(y.data(), x.data(), sizeof(T) * size_t(n));
      break;
  }
  check_finite(y, "activation");
  if (!want_record<T>({&x})) return y;
  if (kind == Act::Relu || kind == Act::LeakyRelu) {
    TensorT<T> mask = TensorT<T>::zeros(x.shape());
    kernels<T>::slope_mask(x.data(), n, kind == Act::Relu ? T(0) : slope, mask.data());
    record_node("activation", y, {&x},
                [mask](const TensorT<T>& g, const std::array<bool, 3>& need,
                       std::array<TensorT<T>, 3>& out) {
                  if (need[0]) out[0] = mul(g, mask);
                });
  } else if (kind == Act::Tanh) {
    auto self = std::make_shared<TensorT<T>>();
    record_node("activation", y, {&x},
                [self](const TensorT<T>& g, const std::array<bool, 3>& need,
                       std::array<TensorT<T>, 3>& out) {
                  if (need[0]) out[0] = mul(g, scalar_add(neg(square(*self)), T(1)));
                });
    *self = y;
  } else {
    record_node("activation", y, {&x},
                [](const TensorT<T>& g, const std::array<bool, 3>& need,
                   std::array<TensorT<T>, 3>& out) {
                  if (need[0]) out[0] = g;
                });
  }
  return y;
}

// ---------------------------------------------------------------------------
// linear algebra

template <typename T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
  expect(a.shape().rank() == 2 && b.shape().rank() == 2,
         "matmul: expected rank-2 operands");
  const int M = a.shape()[0], K = a.shape()[1];
  expect(b.shape()[0] == K, "matmul: inner dims disagree " + a.shape().str() + " * " +
                                b.shape().str());
  const int N = b.shape()[1];
  TensorT<T> y = TensorT<T>::zeros(Shape{M, N});
  kernels<T>::gemm_nn(a.data(), b.data(), y.data(), M, K, N, false);
  check_finite(y, "matmul");
  if (want_record<T>({&a, &b}))
    record_node("matmul", y, {&a, &b},
                [a, b](const TensorT<T>& g, const std::array<bool, 3>& need,
                       std::array<TensorT<T>, 3>& out) {
                  if (need[0]) out[0] = matmul(g, transpose2(b));
                  if (need[1]) out[1] = matmul(transpose2(a), g);
                });
  return y;
}

template <typename T>
TensorT<T> transpose2(const TensorT<T>& a) {
  expect(a.shape().rank() == 2, "transpose2: expected rank-2");
  const int M = a.shape()[0], N = a.shape()[1];
  TensorT<T> y = TensorT<T>::zeros(Shape{N, M});
  kernels<T>::transpose2(a.data(), M, N, y.data());
  if (want_record<T>({&a}))
    record_node("transpose2", y, {&a},
                [](const TensorT<T>& g, const std::array<bool, 3>& need,
                   std::array<TensorT<T>, 3>& out) {
                  if (need[0]) out[0] = transpose2(g);
                });
  return y;
}

template <typename T>
TensorT<T> add_row_bias(const TensorT<T>& x, const TensorT<T>& b) {
  expect(x.shape().rank() == 2 && b.shape().rank() == 1 && b.shape()[0] == x.shape()[1],
         "add_row_bias: bias shape mismatch");
  TensorT<T> y = x.clone().detached();
  kernels<T>::add_row_bias(y.data(), x.shape()[0], x.shape()[1], b.data());
  check_finite(y, "add_row_bias");
  if (want_record<T>({&x, &b}))
    record_node("add_row_bias", y, {&x, &b},
                [](const TensorT<T>& g, const std::array<bool, 3>& need,
                   std::array<TensorT<T>, 3>& out) {
                  if (need[0]) out[0] = g;
                  if (need[1]) out[1] = col_sum(g);
                });
  return y;
}

template <typename T>
TensorT<T> fully_connected(const TensorT<T>& x, const TensorT<T>& w,
                           const TensorT<T>& bias) {
  TensorT<T> y = matmul(x, w);
  if (bias.defined()) y = add_row_bias(y, bias);
  return y;
}

// ---------------------------------------------------------------------------
// convolution family

template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& bias,
                  int stride, int pad, int dil) {
  expect(x.shape().rank() == 4 && w.shape().rank() == 4, "conv2d: expected rank-4 x and w");
  expect(stride >= 1 && dil >= 1 && pad >= 0, "conv2d: bad geometry parameters");
  const int B = x.shape()[0], Ci = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  const int Co = w.shape()[0], k = w.shape()[2];
  expect(w.shape()[2] == w.shape()[3], "conv2d: kernels must be square");
  expect(w.shape()[1] == Ci, "conv2d: input channels " + std::to_string(Ci) +
                                 " do not match kernel channels " + std::to_string(w.shape()[1]));
  ConvGeom geom{stride, pad, dil};
  const int Ho = conv_out_dim(H, k, geom), Wo = conv_out_dim(W, k, geom);
  expect(Ho > 0 && Wo > 0, "conv2d: output size <= 0 for input " + x.shape().str());
  TensorT<T> y = TensorT<T>::zeros(Shape{B, Co, Ho, Wo});
  kernels<T>::conv2d(x.data(), B, Ci, H, W, w.data(), Co, k, nullptr, geom, y.data());
  check_finite(y, "conv2d");
  if (want_record<T>({&x, &w}))
    record_node("conv2d", y, {&x, &w},
                [x, w, stride, pad, dil, H, W, k](const TensorT<T>& g,
                                                  const std::array<bool, 3>& need,
                                                  std::array<TensorT<T>, 3>& out) {
                  if (need[0])
                    out[0] = transposed_conv2d(g, w, TensorT<T>{}, stride, pad, dil, H, W);
                  if (need[1]) out[1] = conv2d_wgrad(x, g, k, stride, pad, dil);
                });
  if (bias.defined()) {
    expect(bias.shape().rank() == 1 && bias.shape()[0] == Co, "conv2d: bias shape mismatch");
    y = add_channel_bias(y, bias);
  }
  return y;
}

template <typename T>
TensorT<T> transposed_conv2d(const TensorT<T>& x, const TensorT<T>& w,
                             const TensorT<T>& bias, int stride, int pad, int dil,
                             int out_h, int out_w) {
  expect(x.shape().rank() == 4 && w.shape().rank() == 4,
         "transposed_conv2d: expected rank-4 x and w");
  const int B = x.shape()[0], Cz = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  const int Co = w.shape()[1], k = w.shape()[2];
  expect(w.shape()[2] == w.shape()[3], "transposed_conv2d: kernels must be square");
  expect(w.shape()[0] == Cz, "transposed_conv2d: input channels " + std::to_string(Cz) +
                                 " do not match kernel channels " + std::to_string(w.shape()[0]));
  ConvGeom geom{stride, pad, dil};
  const int Ho = out_h > 0 ? out_h : tconv_out_dim(H, k, geom);
  const int Wo = out_w > 0 ? out_w : tconv_out_dim(W, k, geom);
  expect(Ho > 0 && Wo > 0, "transposed_conv2d: output size <= 0");
  expect(conv_out_dim(Ho, k, geom) == H && conv_out_dim(Wo, k, geom) == W,
         "transposed_conv2d: requested output size is not adjoint-consistent");
  TensorT<T> y = TensorT<T>::zeros(Shape{B, Co, Ho, Wo});
  kernels<T>::tconv2d(x.data(), B, Cz, H, W, w.data(), Co, k, nullptr, geom, Ho, Wo,
                      y.data());
  check_finite(y, "transposed_conv2d");
  if (want_record<T>({&x, &w}))
    record_node("transposed_conv2d", y, {&x, &w},
                [x, w, stride, pad, dil, k](const TensorT<T>& g,
                                            const std::array<bool, 3>& need,
                                            std::array<TensorT<T>, 3>& out) {
                  if (need[0]) out[0] = conv2d(g, w, TensorT<T>{}, stride, pad, dil);
                  if (need[1]) out[1] = conv2d_wgrad(g, x, k, stride, pad, dil);
                });
  if (bias.defined()) {
    expect(bias.shape().rank() == 1 && bias.shape()[0] == Co,
           "transposed_conv2d: bias shape mismatch");
    y = add_channel_bias(y, bias);
  }
  return y;
}

template <typename T>
TensorT<T> conv2d_wgrad(const TensorT<T>& x, const TensorT<T>& gy, int k, int stride,
                        int pad, int dil) {
  expect(x.shape().rank() == 4 && gy.shape().rank() == 4, "conv2d_wgrad: rank-4 expected");
  const int B = x.shape()[0], Ci = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  const int Co = gy.shape()[1];
  expect(gy.shape()[0] == B, "conv2d_wgrad: batch mismatch");
  ConvGeom geom{stride, pad, dil};
  expect(gy.shape()[2] == conv_out_dim(H, k, geom) && gy.shape()[3] == conv_out_dim(W, k, geom),
         "conv2d_wgrad: gy spatial size inconsistent with geometry");
  TensorT<T> dw = TensorT<T>::zeros(Shape{Co, Ci, k, k});
  kernels<T>::conv2d_wgrad(x.data(), B, Ci, H, W, gy.data(), Co, k, geom, dw.data());
  check_finite(dw, "conv2d_wgrad");
  if (want_record<T>({&x, &gy}))
    record_node("conv2d_wgrad", dw, {&x, &gy},
                [](const TensorT<T>&, const std::array<bool, 3>&,
                   std::array<TensorT<T>, 3>&) { no_second_order<T>("conv2d_wgrad"); });
  return dw;
}

template <typename T>
TensorT<T> add_channel_bias(const TensorT<T>& x, const TensorT<T>& b) {
  expect(x.shape().rank() == 4 && b.shape().rank() == 1 && b.shape()[0] == x.shape()[1],
         "add_channel_bias: bias shape mismatch");
  TensorT<T> y = x.clone().detached();
  kernels<T>::add_channel_bias(y.data(), x.shape()[0], x.shape()[1],
                               x.shape()[2] * x.shape()[3], b.data());
  check_finite(y, "add_channel_bias");
  if (want_record<T>({&x, &b}))
    record_node("add_channel_bias", y, {&x, &b},
                [](const TensorT<T>& g, const std::array<bool, 3>& need,
                   std::array<TensorT<T>, 3>& out) {
                  if (need[0]) out[0] = g;
                  if (need[1]) out[1] = channel_sum(g);
                });
  return y;
}

template <typename T>
TensorT<T> channel_sum(const TensorT<T>& x) {
  expect(x.shape().rank() == 4, "channel_sum: rank-4 expected");
  const int B = x.shape()[0], C = x.shape()[1], HW = x.shape()[2] * x.shape()[3];
  TensorT<T> y = TensorT<T>::zeros(Shape{C});
  kernels<T>::channel_sum(x.data(), B, C, HW, y.data());
  if (want_record<T>({&x})) {
    Shape sh = x.shape();
    record_node("channel_sum", y, {&x},
                [sh](const TensorT<T>& g, const std::array<bool, 3>& need,
                     std::array<TensorT<T>, 3>& out) {
                  if (!need[0]) return;
                  if (Tape<T>::recording()) no_second_order<T>("channel_sum");
                  TensorT<T> dx = TensorT<T>::zeros(sh);
                  kernels<T>::broadcast_channel(g.data(), sh[0], sh[1], sh[2] * sh[3],
                                                dx.data());
                  out[0] = dx;
                });
  }
  return y;
}

// ---------------------------------------------------------------------------
// structural ops

namespace {
template <typename T>
TensorT<T> cat2(const TensorT<T>& a, const TensorT<T>& b) {
  expect(a.shape().rank() == 4 && b.shape().rank() == 4, "concat_channels: rank-4 expected");
  expect(a.shape()[0] == b.shape()[0] && a.shape()[2] == b.shape()[2] &&
             a.shape()[3] == b.shape()[3],
         "concat_channels: B/H/W mismatch " + a.shape().str() + " vs " + b.shape().str());
  const int B = a.shape()[0], Ca = a.shape()[1], Cb = b.shape()[1];
  const int HW = a.shape()[2] * a.shape()[3];
  TensorT<T> y = TensorT<T>::zeros(Shape{B, Ca + Cb, a.shape()[2], a.shape()[3]});
  for (int i = 0; i < B; ++i) {
    std::memcpy(y.data() + int64_t(i) * (Ca + Cb) * HW, a.data() + int64_t(i) * Ca * HW,
                sizeof(T) * size_t(Ca) * HW);
    std::memcpy(y.data() + (int64_t(i) * (Ca + Cb) + Ca) * HW,
                b.data() + int64_t(i) * Cb * HW, sizeof(T) * size_t(Cb) * HW);
  }
  if (want_record<T>({&a, &b}))
    record_node("concat_channels", y, {&a, &b},
                [Ca, Cb](const TensorT<T>& g, const std::array<bool, 3>& need,
                         std::array<TensorT<T>, 3>& out) {
                  if (need[0]) out[0] = slice_channels(g, 0, Ca);
                  if (need[1]) out[1] = slice_channels(g, Ca, Ca + Cb);
                });
  return y;
}
}  // namespace

template <typename T>
TensorT<T> concat_channels(const std::vector<TensorT<T>>& parts) {
  expect(!parts.empty(), "concat_channels: empty part list");
  TensorT<T> y = parts[0];
  for (size_t i = 1; i < parts.size(); ++i) y = cat2(y, parts[i]);
  return y;
}

template <typename T>
TensorT<T> slice_channels(const TensorT<T>& x, int from, int to) {
  expect(x.shape().rank() == 4, "slice_channels: rank-4 expected");
  const int C = x.shape()[1];
  if (!(0 <= from && from < to && to <= C))
    throw std::out_of_range("slice_channels: bad range [" + std::to_string(from) + "," +
                            std::to_string(to) + ") of C=" + std::to_string(C));
  const int B = x.shape()[0], HW = x.shape()[2] * x.shape()[3];
  TensorT<T> y = TensorT<T>::zeros(Shape{B, to - from, x.shape()[2], x.shape()[3]});
  kernels<T>::slice_channels(x.data(), B, C, HW, from, to, y.data());
  if (want_record<T>({&x}))
    record_node("slice_channels", y, {&x},
                [from, C](const TensorT<T>& g, const std::array<bool, 3>& need,
                          std::array<TensorT<T>, 3>& out) {
                  if (need[0]) out[0] = pad_channels(g, from, C);
                });
  return y;
}

template <typename T>
TensorT<T> pad_channels(const TensorT<T>& x, int from, int total) {
  expect(x.shape().rank() == 4, "pad_channels: rank-4 expected");
  const int B = x.shape()[0], Cin = x.shape()[1], HW = x.shape()[2] * x.shape()[3];
  expect(from >= 0 && from + Cin <= total, "pad_channels: window outside target");
  TensorT<T> y = TensorT<T>::zeros(Shape{B, total, x.shape()[2], x.shape()[3]});
  kernels<T>::pad_channels(x.data(), B, Cin, HW, from, total, y.data());
  if (want_record<T>({&x}))
    record_node("pad_channels", y, {&x},
                [from, Cin](const TensorT<T>& g, const std::array<bool, 3>& need,
                            std::array<TensorT<T>, 3>& out) {
                  if (need[0]) out[0] = slice_channels(g, from, from + Cin);
                });
  return y;
}

template <typename T>
TensorT<T> place_slots(const TensorT<T>& x, const std::vector<int>& slot, int n_slots) {
  expect(x.shape().rank() == 4, "place_slots: rank-4 expected");
  const int B = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  expect(int(slot.size()) == B, "place_slots: one slot index per sample required");
  for (int s : slot)
    if (s < 0 || s >= n_slots)
      throw std::out_of_range("place_slots: slot " + std::to_string(s) + " >= " +
                              std::to_string(n_slots));
  TensorT<T> y = TensorT<T>::zeros(Shape{B, C * n_slots, H, W});
  kernels<T>::place_slots(x.data(), B, C, H, W, slot.data(), n_slots, y.data());
  if (want_record<T>({&x}))
    record_node("place_slots", y, {&x},
                [slot, n_slots](const TensorT<T>& g, const std::array<bool, 3>& need,
                                std::array<TensorT<T>, 3>& out) {
                  if (need[0]) out[0] = select_slots(g, slot, n_slots);
                });
  return y;
}

template <typename T>
TensorT<T> select_slots(const TensorT<T>& x, const std::vector<int>& slot, int n_slots) {
  expect(x.shape().rank() == 4, "select_slots: rank-4 expected");
  const int B = x.shape()[0], CN = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  expect(CN % n_slots == 0, "select_slots: channels not divisible by slot count");
  const int C = CN / n_slots;
  expect(int(slot.size()) == B, "select_slots: one slot index per sample required");
  for (int s : slot)
    if (s < 0 || s >= n_slots)
      throw std::out_of_range("select_slots: slot " + std::to_string(s) + " >= " +
                              std::to_string(n_slots));
  TensorT<T> y = TensorT<T>::zeros(Shape{B, C, H, W});
  kernels<T>::select_slots(x.data(), B, C, H, W, slot.data(), n_slots, y.data());
  if (want_record<T>({&x}))
    record_node("select_slots", y, {&x},
                [slot, n_slots](const TensorT<T>& g, const std::array<bool, 3>& need,
                                std::array<TensorT<T>, 3>& out) {
                  if (need[0]) out[0] = place_slots(g, slot, n_slots);
                });
  return y;
}

// ---------------------------------------------------------------------------
// normalization, pooling, losses

template <typename T>
TensorT<T> instance_norm(const TensorT<T>& x, const TensorT<T>& gamma,
                         const TensorT<T>& beta, T eps) {
  expect(x.shape().rank() == 4, "instance_norm: rank-4 expected");
  expect(eps > T(0), "instance_norm: eps must be positive");
  const int B = x.shape()[0], C = x.shape()[1], HW = x.shape()[2] * x.shape()[3];
  if (gamma.defined())
    expect(gamma.shape().rank() == 1 && gamma.shape()[0] == C, "instance_norm: gamma shape");
  if (beta.defined())
    expect(beta.shape().rank() == 1 && beta.shape()[0] == C, "instance_norm: beta shape");
  TensorT<T> y = TensorT<T>::zeros(x.shape());
  TensorT<T> xhat = TensorT<T>::zeros(x.shape());
  TensorT<T> invstd = TensorT<T>::zeros(Shape{B, C});
  kernels<T>::instance_norm(x.data(), B, C, HW, gamma.defined() ? gamma.data() : nullptr,
                            beta.defined() ? beta.data() : nullptr, eps, y.data(),
                            xhat.data(), invstd.data());
  check_finite(y, "instance_norm");
  if (want_record<T>({&x, &gamma, &beta})) {
    TensorT<T> gam = gamma;
    record_node("instance_norm", y, {&x, &gamma, &beta},
                [xhat, invstd, gam, B, C, HW](const TensorT<T>& g,
                                              const std::array<bool, 3>& need,
                                              std::array<TensorT<T>, 3>& out) {
                  if (Tape<T>::recording()) no_second_order<T>("instance_norm");
                  TensorT<T> dx, dgm, dbt;
                  if (need[0]) dx = TensorT<T>::zeros(xhat.shape());
                  if (need[1] || need[2]) {
                    dgm = TensorT<T>::zeros(Shape{C});
                    dbt = TensorT<T>::zeros(Shape{C});
                  }
                  kernels<T>::instance_norm_backward(
                      g.data(), xhat.data(), invstd.data(),
                      gam.defined() ? gam.data() : nullptr, B, C, HW,
                      need[0] ? dx.data() : nullptr,
                      (need[1] || need[2]) ? dgm.data() : nullptr,
                      (need[1] || need[2]) ? dbt.data() : nullptr);
                  if (need[0]) out[0] = dx;
                  if (need[1]) out[1] = dgm;
                  if (need[2]) out[2] = dbt;
                });
  }
  return y;
}

template <typename T>
TensorT<T> avg_pool2(const TensorT<T>& x) {
  expect(x.shape().rank() == 4, "avg_pool2: rank-4 expected");
  const int B = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  expect(H % 2 == 0 && W % 2 == 0, "avg_pool2: odd spatial size");
  TensorT<T> y = TensorT<T>::zeros(Shape{B, C, H / 2, W / 2});
  kernels<T>::avg_pool2(x.data(), B, C, H, W, y.data());
  if (want_record<T>({&x})) {
    Shape sh = x.shape();
    record_node("avg_pool2", y, {&x},
                [sh](const TensorT<T>& g, const std::array<bool, 3>& need,
                     std::array<TensorT<T>, 3>& out) {
                  if (!need[0]) return;
                  if (Tape<T>::recording()) no_second_order<T>("avg_pool2");
                  TensorT<T> dx = TensorT<T>::zeros(sh);
                  kernels<T>::un_avg_pool2(g.data(), sh[0], sh[1], sh[2], sh[3], dx.data());
                  out[0] = dx;
                });
  }
  return y;
}

template <typename T>
TensorT<T> global_avg_pool(const TensorT<T>& x) {
  expect(x.shape().rank() == 4, "global_avg_pool: rank-4 expected");
  const int B = x.shape()[0], C = x.shape()[1], HW = x.shape()[2] * x.shape()[3];
  TensorT<T> y = TensorT<T>::zeros(Shape{B, C});
  kernels<T>::global_avg_pool(x.data(), B, C, HW, y.data());
  if (want_record<T>({&x})) {
    Shape sh = x.shape();
    record_node("global_avg_pool", y, {&x},
                [sh](const TensorT<T>& g, const std::array<bool, 3>& need,
                     std::array<TensorT<T>, 3>& out) {
                  if (!need[0]) return;
                  if (Tape<T>::recording()) no_second_order<T>("global_avg_pool");
                  TensorT<T> dx = TensorT<T>::zeros(sh);
                  kernels<T>::broadcast_spatial(g.data(), sh[0], sh[1], sh[2] * sh[3],
                                                T(1) / T(sh[2] * sh[3]), dx.data());
                  out[0] = dx;
                });
  }
  return y;
}

template <typename T>
TensorT<T> gram_matrix(const TensorT<T>& f) {
  expect(f.shape().rank() == 4, "gram_matrix: rank-4 expected");
  const int B = f.shape()[0], C = f.shape()[1], HW = f.shape()[2] * f.shape()[3];
  TensorT<T> y = TensorT<T>::zeros(Shape{B, C, C});
  kernels<T>::gram(f.data(), B, C, HW, y.data());
  check_finite(y, "gram_matrix");
  if (want_record<T>({&f}))
    record_node("gram_matrix", y, {&f},
                [f, B, C, HW](const TensorT<T>& g, const std::array<bool, 3>& need,
                              std::array<TensorT<T>, 3>& out) {
                  if (!need[0]) return;
                  if (Tape<T>::recording()) no_second_order<T>("gram_matrix");
                  TensorT<T> df = TensorT<T>::zeros(f.shape());
                  kernels<T>::gram_backward(g.data(), f.data(), B, C, HW, df.data());
                  out[0] = df;
                });
  return y;
}

template <typename T>
TensorT<T> softmax_cross_entropy(const TensorT<T>& logits, const std::vector<int>& labels) {
  expect(logits.shape().rank() == 2, "softmax_cross_entropy: rank-2 logits expected");
  const int B = logits.shape()[0], N = logits.shape()[1];
  expect(int(labels.size()) == B, "softmax_cross_entropy: one label per row required");
  for (int l : labels)
    if (l < 0 || l >= N)
      throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(l) +
                              " outside [0," + std::to_string(N) + ")");
  TensorT<T> probs = TensorT<T>::zeros(logits.shape());
  TensorT<T> y = TensorT<T>::scalar(
      kernels<T>::softmax_ce(logits.data(), B, N, labels.data(), probs.data()));
  check_finite(y, "softmax_cross_entropy");
  if (want_record<T>({&logits}))
    record_node("softmax_cross_entropy", y, {&logits},
                [probs, labels, B, N](const TensorT<T>& g, const std::array<bool, 3>& need,
                                      std::array<TensorT<T>, 3>& out) {
                  if (!need[0]) return;
                  if (Tape<T>::recording()) no_second_order<T>("softmax_cross_entropy");
                  TensorT<T> dx = TensorT<T>::zeros(probs.shape());
                  kernels<T>::softmax_ce_backward(probs.data(), labels.data(), B, N,
                                                  g.item() / T(B), dx.data());
                  out[0] = dx;
                });
  return y;
}

template <typename T>
TensorT<T> lerp_rows(const TensorT<T>& a, const TensorT<T>& b, const std::vector<T>& t) {
  expect(a.shape() == b.shape(), "lerp_rows: shape mismatch");
  const int B = a.shape()[0];
  expect(int(t.size()) == B, "lerp_rows: one coefficient per sample required");
  TensorT<T> y = TensorT<T>::zeros(a.shape());
  kernels<T>::lerp(a.data(), b.data(), t.data(), B, a.numel() / B, y.data());
  if (want_record<T>({&a, &b}))
    record_node("lerp_rows", y, {&a, &b},
                [t](const TensorT<T>& g, const std::array<bool, 3>& need,
                    std::array<TensorT<T>, 3>& out) {
                  TensorT<T> zero = TensorT<T>::zeros(g.shape());
                  if (need[0]) out[0] = lerp_rows(g, zero, t);
                  if (need[1]) out[1] = lerp_rows(zero, g, t);
                });
  return y;
}

template <typename T>
TensorT<T> randn(Shape shape, Rng& rng, T stddev, T mean_) {
  TensorT<T> y = TensorT<T>::zeros(shape);
  for (int64_t i = 0; i < y.numel(); ++i)
    y.data()[i] = T(rng.next_normal()) * stddev + mean_;
  return y;
}

template <typename T>
TensorT<T> ones(Shape shape) {
  return TensorT<T>::full(shape, T(1));
}

// ---------------------------------------------------------------------------
// reverse sweeps

namespace {

template <typename T>
void accum(TensorT<T>& dst, const TensorT<T>& g) {
  dst = dst.defined() ? add(dst, g) : g;
}

}  // namespace

template <typename T>
void backward(const TensorT<T>& loss) {
  Tape<T>* tape = Tape<T>::current();
  if (!tape) throw std::logic_error("backward: no live tape");
  if (tape->consumed) throw std::logic_error("backward: tape already consumed");
  if (!loss.defined() || loss.numel() != 1)
    throw std::invalid_argument("backward: loss must be a defined scalar");
  if (loss.tape_id != tape->id() || loss.node < 0)
    throw std::logic_error("backward: loss was not recorded on the live tape");
  tape->consumed = true;
  NoRecordScope<T> quiet;

  const int64_t root = loss.node;
  std::vector<char> needs(size_t(root) + 1, 0);
  for (int64_t i = 0; i <= root; ++i) {
    const TapeNode<T>& nd = tape->node(i);
    for (int j = 0; j < nd.n_parents; ++j) {
      const int64_t p = nd.parents[size_t(j)];
      if (p <= -2 || (p >= 0 && needs[size_t(p)])) {
        needs[size_t(i)] = 1;
        break;
      }
    }
  }

  std::vector<TensorT<T>> adj(size_t(root) + 1);
  std::vector<TensorT<T>> leaf_adj(tape->leaves().size());
  adj[size_t(root)] = TensorT<T>::scalar(T(1));
  for (int64_t i = root; i >= 0; --i) {
    if (!adj[size_t(i)].defined() || !needs[size_t(i)]) {
      adj[size_t(i)] = {};
      continue;
    }
    const TapeNode<T>& nd = tape->node(i);
    std::array<bool, 3> need{false, false, false};
    for (int j = 0; j < nd.n_parents; ++j) {
      const int64_t p = nd.parents[size_t(j)];
      need[size_t(j)] = (p <= -2) || (p >= 0 && needs[size_t(p)]);
    }
    std::array<TensorT<T>, 3> grads;
    nd.vjp(adj[size_t(i)], need, grads);
    for (int j = 0; j < nd.n_parents; ++j) {
      if (!need[size_t(j)] || !grads[size_t(j)].defined()) continue;
      const int64_t p = nd.parents[size_t(j)];
      if (p >= 0)
        accum(adj[size_t(p)], grads[size_t(j)]);
      else
        accum(leaf_adj[size_t(-p - 2)], grads[size_t(j)]);
    }
    adj[size_t(i)] = {};
  }

  const auto& leaves = tape->leaves();
  for (size_t s = 0; s < leaves.size(); ++s) {
    if (!leaf_adj[s].defined()) continue;
    TensorT<T> leaf = leaves[s];
    if (leaf.grad_vec().empty()) leaf.ensure_zero_grad();
    kernels<T>::accumulate(leaf.grad_vec().data(), leaf_adj[s].data(), leaf.numel());
  }
}

template <typename T>
std::vector<TensorT<T>> gradient(const TensorT<T>& out, const std::vector<TensorT<T>>& wrt,
                                 bool create_graph) {
  Tape<T>* tape = Tape<T>::current();
  if (!tape) throw std::logic_error("gradient: no live tape");
  if (!out.defined() || out.numel() != 1)
    throw std::invalid_argument("gradient: output must be a defined scalar");
  if (out.tape_id != tape->id() || out.node < 0)
    throw std::logic_error("gradient: output was not recorded on the live tape");

  const int64_t root = out.node;
  // resolve targets: node index or leaf slot per wrt entry
  std::vector<int64_t> wrt_node(wrt.size(), -1);
  std::vector<int64_t> wrt_leaf(wrt.size(), -1);
  std::vector<char> is_target_node(size_t(root) + 1, 0);
  std::vector<char> is_target_leaf(tape->leaves().size(), 0);
  for (size_t i = 0; i < wrt.size(); ++i) {
    const TensorT<T>& w = wrt[i];
    if (w.defined() && w.tape_id == tape->id() && w.node >= 0 && w.node <= root) {
      wrt_node[i] = w.node;
      is_target_node[size_t(w.node)] = 1;
    } else if (w.defined()) {
      const int64_t slot = tape->find_leaf(w.storage());
      wrt_leaf[i] = slot;
      if (slot >= 0) is_target_leaf[size_t(slot)] = 1;
    }
  }

  std::vector<char> needs(size_t(root) + 1, 0);
  for (int64_t i = 0; i <= root; ++i) {
    const TapeNode<T>& nd = tape->node(i);
    for (int j = 0; j < nd.n_parents; ++j) {
      const int64_t p = nd.parents[size_t(j)];
      const bool hit = (p >= 0 && (is_target_node[size_t(p)] || needs[size_t(p)])) ||
                       (p <= -2 && is_target_leaf[size_t(-p - 2)]);
      if (hit) {
        needs[size_t(i)] = 1;
        break;
      }
    }
  }

  struct MaybeQuiet {
    std::unique_ptr<NoRecordScope<T>> s;
  } quiet;
  if (!create_graph) quiet.s = std::make_unique<NoRecordScope<T>>();

  std::vector<TensorT<T>> adj(size_t(root) + 1);
  std::vector<TensorT<T>> leaf_adj(tape->leaves().size());
  adj[size_t(root)] = TensorT<T>::scalar(T(1));
  for (int64_t i = root; i >= 0; --i) {
    if (!adj[size_t(i)].defined()) continue;
    if (!needs[size_t(i)]) continue;
    // with create_graph the vjp call records fresh nodes, which can grow the
    // tape and move its storage; work on a copy, never a reference
    const TapeNode<T> nd = tape->node(i);
    std::array<bool, 3> need{false, false, false};
    for (int j = 0; j < nd.n_parents; ++j) {
      const int64_t p = nd.parents[size_t(j)];
      need[size_t(j)] = (p >= 0 && (is_target_node[size_t(p)] || needs[size_t(p)])) ||
                        (p <= -2 && is_target_leaf[size_t(-p - 2)]);
    }
    std::array<TensorT<T>, 3> grads;
    nd.vjp(adj[size_t(i)], need, grads);
    for (int j = 0; j < nd.n_parents; ++j) {
      if (!need[size_t(j)] || !grads[size_t(j)].defined()) continue;
      const int64_t p = nd.parents[size_t(j)];
      if (p >= 0)
        accum(adj[size_t(p)], grads[size_t(j)]);
      else
        accum(leaf_adj[size_t(-p - 2)], grads[size_t(j)]);
    }
  }

  std::vector<TensorT<T>> result(wrt.size());
  for (size_t i = 0; i < wrt.size(); ++i) {
    TensorT<T> g;
    if (wrt_node[i] >= 0)
      g = adj[size_t(wrt_node[i])];
    else if (wrt_leaf[i] >= 0)
      g = leaf_adj[size_t(wrt_leaf[i])];
    result[i] = g.defined() ? g : TensorT<T>::zeros(wrt[i].shape());
  }
  return result;
}

// ---------------------------------------------------------------------------

#define UMIT_INSTANTIATE_OPS(T)                                                            \
  template TensorT<T> conv2d<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&,  \
                                int, int, int);                                           \
  template TensorT<T> transposed_conv2d<T>(const TensorT<T>&, const TensorT<T>&,          \
                                           const TensorT<T>&, int, int, int, int, int);   \
  template TensorT<T> conv2d_wgrad<T>(const TensorT<T>&, const TensorT<T>&, int, int,     \
                                      int, int);                                          \
  template TensorT<T> instance_norm<T>(const TensorT<T>&, const TensorT<T>&,              \
                                       const TensorT<T>&, T);                             \
  template TensorT<T> activation<T>(const TensorT<T>&, Act, T);                           \
  template TensorT<T> fully_connected<T>(const TensorT<T>&, const TensorT<T>&,            \
                                         const TensorT<T>&);                              \
  template TensorT<T> matmul<T>(const TensorT<T>&, const TensorT<T>&);                    \
  template TensorT<T> transpose2<T>(const TensorT<T>&);                                   \
  template TensorT<T> concat_channels<T>(const std::vector<TensorT<T>>&);                 \
  template TensorT<T> slice_channels<T>(const TensorT<T>&, int, int);                     \
  template TensorT<T> pad_channels<T>(const TensorT<T>&, int, int);                       \
  template TensorT<T> gram_matrix<T>(const TensorT<T>&);                                  \
  template TensorT<T> softmax_cross_entropy<T>(const TensorT<T>&, const std::vector<int>&); \
  template TensorT<T> reduce<T>(const TensorT<T>&, Reduce);                               \
  template TensorT<T> add<T>(const TensorT<T>&, const TensorT<T>&);                       \
  template TensorT<T> sub<T>(const TensorT<T>&, const TensorT<T>&);                       \
  template TensorT<T> mul<T>(const TensorT<T>&, const TensorT<T>&);                       \
  template TensorT<T> neg<T>(const TensorT<T>&);                                          \
  template TensorT<T> scalar_mul<T>(const TensorT<T>&, T);                                \
  template TensorT<T> scalar_add<T>(const TensorT<T>&, T);                                \
  template TensorT<T> square<T>(const TensorT<T>&);                                       \
  template TensorT<T> abs<T>(const TensorT<T>&);                                          \
  template TensorT<T> reciprocal<T>(const TensorT<T>&);                                   \
  template TensorT<T> sqrt_eps<T>(const TensorT<T>&, T);                                  \
  template TensorT<T> scale_by<T>(const TensorT<T>&, const TensorT<T>&);                  \
  template TensorT<T> sum<T>(const TensorT<T>&);                                          \
  template TensorT<T> mean<T>(const TensorT<T>&);                                         \
  template TensorT<T> broadcast_scalar<T>(const TensorT<T>&, Shape);                      \
  template TensorT<T> reshape<T>(const TensorT<T>&, Shape);                               \
  template TensorT<T> row_sum<T>(const TensorT<T>&);                                      \
  template TensorT<T> broadcast_row<T>(const TensorT<T>&, int);                           \
  template TensorT<T> col_sum<T>(const TensorT<T>&);                                      \
  template TensorT<T> add_row_bias<T>(const TensorT<T>&, const TensorT<T>&);              \
  template TensorT<T> add_channel_bias<T>(const TensorT<T>&, const TensorT<T>&);          \
  template TensorT<T> channel_sum<T>(const TensorT<T>&);                                  \
  template TensorT<T> avg_pool2<T>(const TensorT<T>&);                                    \
  template TensorT<T> global_avg_pool<T>(const TensorT<T>&);                              \
  template TensorT<T> place_slots<T>(const TensorT<T>&, const std::vector<int>&, int);    \
  template TensorT<T> select_slots<T>(const TensorT<T>&, const std::vector<int>&, int);   \
  template TensorT<T> lerp_rows<T>(const TensorT<T>&, const TensorT<T>&,                  \
                                   const std::vector<T>&);                                \
  template TensorT<T> randn<T>(Shape, Rng&, T, T);                                        \
  template TensorT<T> ones<T>(Shape);                                                     \
  template void backward<T>(const TensorT<T>&);                                           \
  template std::vector<TensorT<T>> gradient<T>(const TensorT<T>&,                         \
                                               const std::vector<TensorT<T>>&, bool);

UMIT_INSTANTIATE_OPS(float)
UMIT_INSTANTIATE_OPS(double)

#undef UMIT_INSTANTIATE_OPS

}  // namespace umit
