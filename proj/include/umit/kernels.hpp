#pragma once

#include <cstdint>

namespace umit {

struct ConvGeom {
  int stride = 1;
  int pad = 0;
  int dil = 1;
};

inline int conv_out_dim(int in, int k, const ConvGeom& g) {
  return (in + 2 * g.pad - g.dil * (k - 1) - 1) / g.stride + 1;
}
inline int tconv_out_dim(int in, int k, const ConvGeom& g) {
  return (in - 1) * g.stride - 2 * g.pad + g.dil * (k - 1) + 1;
}

// Parallel kernels. Work is partitioned so each output element is written by
// exactly one thread and inner reductions run serially in a fixed order:
// results are bitwise identical for any thread count.
template <typename T>
struct kernels {
  // col[(c*k*k + ky*k + kx)*(Ho*Wo) + oy*Wo + ox] = x[c, oy*s-p+ky*d, ox*s-p+kx*d]
  static void im2col(const T* x, int C, int H, int W, int k, const ConvGeom& g,
                     int Ho, int Wo, T* col);
  // exact adjoint of im2col: scatter-add back into x-layout
  static void col2im(const T* col, int C, int H, int W, int k, const ConvGeom& g,
                     int Ho, int Wo, T* x);

  // C[M,N] (+)= A[M,K] * B[K,N]
  static void gemm_nn(const T* A, const T* B, T* C, int M, int K, int N, bool acc);
  // C[M,N] (+)= A[M,K] * B[N,K]^T
  static void gemm_nt(const T* A, const T* B, T* C, int M, int K, int N, bool acc);
  // C[M,N] (+)= A[K,M]^T * B[K,N]
  static void gemm_tn(const T* A, const T* B, T* C, int K, int M, int N, bool acc);

  // y[B,Co,Ho,Wo] = cross-correlation(x[B,Ci,H,W], w[Co,Ci,k,k]) (+ bias)
  static void conv2d(const T* x, int B, int Ci, int H, int W, const T* w, int Co,
                     int k, const T* bias, const ConvGeom& g, T* y);
  // dw[Co,Ci,k,k] = sum_b correlation of x with gy
  static void conv2d_wgrad(const T* x, int B, int Ci, int H, int W, const T* gy,
                           int Co, int k, const ConvGeom& g, T* dw);
  // y[B,Co,Ho,Wo] = scatter(z[B,Cz,H,W], w[Cz,Co,k,k]); Ho/Wo passed explicitly
  // so the caller can pin the adjoint geometry.
  static void tconv2d(const T* z, int B, int Cz, int H, int W, const T* w, int Co,
                      int k, const T* bias, const ConvGeom& g, int Ho, int Wo, T* y);

  static void add_channel_bias(T* y, int B, int C, int HW, const T* bias);
  static void channel_sum(const T* g, int B, int C, int HW, T* out);
  static void broadcast_channel(const T* c, int B, int C, int HW, T* out);
  static void add_row_bias(T* y, int B, int N, const T* bias);
  static void col_sum(const T* g, int B, int N, T* out);
  static void broadcast_rows(const T* row, int B, int N, T* out);  // out[b,:] = row
  static void row_sum(const T* x, int B, int N, T* out);
  static void broadcast_row_scalar(const T* per_row, int B, int N, T* out);  // out[b,n] = per_row[b]
  static void transpose2(const T* a, int M, int N, T* out);

  static void instance_norm(const T* x, int B, int C, int HW, const T* gamma,
                            const T* beta, T eps, T* y, T* xhat, T* invstd);
  static void instance_norm_backward(const T* g, const T* xhat, const T* invstd,
                                     const T* gamma, int B, int C, int HW, T* dx,
                                     T* dgamma, T* dbeta);

  static T softmax_ce(const T* logits, int B, int N, const int* labels, T* probs);
  static void softmax_ce_backward(const T* probs, const int* labels, int B, int N,
                                  T gscale, T* dlogits);

  // elementwise
  static void relu(const T* x, int64_t n, T* y);
  static void leaky_relu(const T* x, int64_t n, T slope, T* y);
  static void tanh_(const T* x, int64_t n, T* y);
  static void slope_mask(const T* x, int64_t n, T neg_slope, T* m);  // 1 or slope
  static void add(const T* a, const T* b, int64_t n, T* y);
  static void sub(const T* a, const T* b, int64_t n, T* y);
  static void mul(const T* a, const T* b, int64_t n, T* y);
  static void neg(const T* a, int64_t n, T* y);
  static void scalar_mul(const T* a, T c, int64_t n, T* y);
  static void scalar_add(const T* a, T c, int64_t n, T* y);
  static void square(const T* a, int64_t n, T* y);
  static void abs_(const T* a, int64_t n, T* y);
  static void sign(const T* a, int64_t n, T* y);
  static void reciprocal(const T* a, int64_t n, T* y);
  static void sqrt_eps(const T* a, T eps, int64_t n, T* y);
  static void lerp(const T* a, const T* b, const T* t_per_row, int B, int64_t per, T* y);
  static void accumulate(T* dst, const T* src, int64_t n);  // dst += src

  // serial, fixed order: deterministic regardless of thread count
  static T sum(const T* x, int64_t n);
  static T asum(const T* x, int64_t n);

  static void avg_pool2(const T* x, int B, int C, int H, int W, T* y);
  static void un_avg_pool2(const T* g, int B, int C, int H, int W, T* dx);  // dims of dx
  static void global_avg_pool(const T* x, int B, int C, int HW, T* y);
  static void broadcast_spatial(const T* g, int B, int C, int HW, T scale, T* dx);

  static void gram(const T* f, int B, int C, int HW, T* G);           // G[b] = F F^T/(C*HW)
  static void gram_backward(const T* g, const T* f, int B, int C, int HW, T* df);

  static void place_slots(const T* x, int B, int C, int H, int W, const int* slot,
                          int N, T* y);
  static void select_slots(const T* y, int B, int C, int H, int W, const int* slot,
                           int N, T* x);
  static void pad_channels(const T* x, int B, int Cin, int HW, int from, int Cout, T* y);
  static void slice_channels(const T* x, int B, int Cin, int HW, int from, int to, T* y);

  static void adam(T* p, const T* g, T* m, T* v, int64_t n, T lr, T b1, T b2, T eps,
                   T b1t, T b2t);
};

extern template struct kernels<float>;
extern template struct kernels<double>;

}  // namespace umit
